//! Wing-to-billiard mass ratio over a set of eigenpairs, with cross-validated fits.

use serde::Serialize;

use super::checks::{check_large_modes, check_small_modes, Applicability, LargeModeReport, SmallModeReport};
use super::exponents::{alpha_large, alpha_small, exponent_from_f64, rho, to_f64, Exponent};
use crate::adiabatic::{compute_fg, decompose};
use crate::discretize::{EigenPair, Region, Snapped, TensorGrid};
use crate::error::{param, Error, Result};
use crate::export::{fmt15, Assertion, CsvTable};
use crate::parallel::par_map;
use crate::{resonance, stats};

/// Fewest in-`Z_eps` pairs for which fits are attempted.
pub const MIN_PAIRS: usize = 20;
/// Allowed excess of the upper half over the bound fitted on the lower half.
pub const VALIDATION_TOL: f64 = 1.1;
/// Slack on the ratio slope above `rho`.
pub const SLOPE_SLACK: f64 = 0.1;
/// Band for the per-term constant slopes.
pub const TERM_SLOPE_BAND: f64 = 0.3;

/// `b_large = M_large E^{-alpha_large}` and `b_small = M_small E^{-alpha_small}` before snapping.
pub fn b_values(energy: f64, gamma: Exponent, eps: Exponent, m_large: f64, m_small: f64) -> Result<(f64, f64)> {
    if !(energy > 0.0) || !(m_large > 0.0) || !(m_small > 0.0) {
        return param(format!("need E, M_large, M_small > 0 (got {energy}, {m_large}, {m_small})"));
    }
    let al = to_f64(alpha_large(gamma)?);
    let asm = to_f64(alpha_small(gamma, eps)?);
    Ok((m_large * energy.powf(-al), m_small * energy.powf(-asm)))
}

/// Both wing depths snapped to s-grid lines; each must stay below `b0`.
#[derive(Clone, Copy, Debug)]
pub struct ChosenB {
    pub large: Snapped,
    pub small: Snapped,
}

pub fn choose_b(
    grid: &TensorGrid,
    energy: f64,
    gamma: Exponent,
    eps: Exponent,
    (m_large, m_small): (f64, f64),
    b0: f64,
) -> Result<ChosenB> {
    let (bl, bs) = b_values(energy, gamma, eps, m_large, m_small)?;
    let large = grid.snap(bl)?;
    let small = grid.snap(bs)?;
    for s in [large, small] {
        if s.value >= b0 {
            return Err(Error::Precondition(format!("b = {} is not below b0 = {b0} at E = {energy}", s.value)));
        }
    }
    Ok(ChosenB { large, small })
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub eps: f64,
    /// `None` picks the largest `c0` keeping `c0_fraction` of the pairs in `Z_0`.
    pub c0: Option<f64>,
    pub c0_fraction: f64,
    pub m_large: f64,
    pub m_small: f64,
    /// Defaults to `B1 / 4`.
    pub b0: Option<f64>,
    /// Pairs below `e0` are dropped; defaults to the lowest energy supplied.
    pub e0: Option<f64>,
    /// Extra `eps` values whose `Z_eps` membership is recorded per row.
    pub flag_eps: Vec<f64>,
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps: 0.0,
            c0: None,
            c0_fraction: 0.3,
            m_large: 1.0,
            m_small: 1.0,
            b0: None,
            e0: None,
            flag_eps: vec![0.0, 0.0625, 0.125],
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub index: usize,
    pub energy: f64,
    pub nu: f64,
    pub in_z: bool,
    pub z_flags: Vec<(f64, bool)>,
    pub wing_norm: f64,
    pub rect_norm: f64,
    pub omega_norm: f64,
    /// `||u||_Omega / ||u||_W`.
    pub ratio: f64,
    pub e_rho: f64,
    /// `ratio / E`, the classical comparison.
    pub bhw: f64,
    pub b_large: f64,
    pub b_small: f64,
    pub b_large_snap: f64,
    pub b_small_snap: f64,
    /// `||u_-||²_R + ||u_+||²_R - ||u||²_R - tail`, non-positive up to rounding.
    pub bookkeeping_excess: f64,
    pub large: LargeModeReport,
    pub small: SmallModeReport,
}

impl BoundRow {
    pub fn scaled(&self) -> f64 {
        self.ratio / self.e_rho
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SkippedPair {
    pub index: usize,
    pub energy: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub gamma: String,
    pub eps: String,
    pub rho: String,
    pub rho_value: f64,
    pub c0: f64,
    pub c0_chosen: bool,
    pub b0: f64,
    pub e0: f64,
    pub rows: Vec<BoundRow>,
    pub skipped: Vec<SkippedPair>,
    pub in_z_count: usize,
    pub z_fraction: f64,
    pub insufficient: bool,
    /// Max of `ratio / E^rho` over the lower-energy half of the in-`Z` pairs.
    pub c_fit: Option<f64>,
    /// Max of `ratio / (c_fit E^rho)` over the upper half.
    pub validation: Option<f64>,
    /// Theil–Sen slope of `ln ratio` against `ln E` over in-`Z` pairs.
    pub ratio_slope: Option<f64>,
    pub large_slope: Option<f64>,
    pub small_slope: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub assertions: Vec<Assertion>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        crate::export::all_passed(&self.assertions)
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = [
            "index",
            "E",
            "nu",
            "in_z",
            "wing_norm",
            "omega_norm",
            "ratio",
            "E_rho",
            "ratio_over_E_rho",
            "bhw",
            "b_large",
            "b_small",
            "large_lhs",
            "large_t1",
            "large_t2",
            "large_t3",
            "large_C",
            "large_mode_C_max",
            "small_lhs",
            "small_t1",
            "small_t2",
            "small_t3",
            "small_C",
            "small_mode_C_max",
            "small_status",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if let Some(r) = self.rows.first() {
            header.extend(r.z_flags.iter().map(|(e, _)| format!("z_eps_{}", fmt15(*e))));
        }
        let mut t = CsvTable::new(&header);
        let opt = |v: Option<f64>| v.map(fmt15).unwrap_or_default();
        for r in &self.rows {
            let (l, s) = (&r.large.report, &r.small.report);
            let mut cells = vec![
                r.index.to_string(),
                fmt15(r.energy),
                fmt15(r.nu),
                r.in_z.to_string(),
                fmt15(r.wing_norm),
                fmt15(r.omega_norm),
                fmt15(r.ratio),
                fmt15(r.e_rho),
                fmt15(r.scaled()),
                fmt15(r.bhw),
                fmt15(r.b_large_snap),
                fmt15(r.b_small_snap),
                fmt15(l.lhs),
                fmt15(l.terms[0]),
                fmt15(l.terms[1]),
                fmt15(l.terms[2]),
                opt(l.constant),
                opt(l.max_mode_constant()),
                fmt15(s.lhs),
                fmt15(s.terms[0]),
                fmt15(s.terms[1]),
                fmt15(s.terms[2]),
                opt(s.constant),
                opt(s.max_mode_constant()),
                format!("{:?}", r.small.status),
            ];
            cells.extend(r.z_flags.iter().map(|(_, f)| f.to_string()));
            t.push_row(&cells);
        }
        t.render()
    }

    /// Fitted constants, validation statistics and warnings.
    pub fn summary_json(&self, config_echo: &[(String, String)]) -> String {
        let echo: serde_json::Map<String, serde_json::Value> =
            config_echo.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
        let f = |v: Option<f64>| v.map(fmt15);
        let value = serde_json::json!({
            "gamma": self.gamma,
            "eps": self.eps,
            "rho": self.rho,
            "c0": fmt15(self.c0),
            "c0_chosen": self.c0_chosen,
            "b0": fmt15(self.b0),
            "E0": fmt15(self.e0),
            "pairs": self.rows.len(),
            "skipped": self.skipped,
            "in_z": self.in_z_count,
            "z_fraction": fmt15(self.z_fraction),
            "insufficient_data": self.insufficient,
            "c_fit": f(self.c_fit),
            "validation": f(self.validation),
            "ratio_slope": f(self.ratio_slope),
            "large_constant_slope": f(self.large_slope),
            "small_constant_slope": f(self.small_slope),
            "warnings": self.warnings,
            "assertions": self.assertions.iter().map(|a| a.line()).collect::<Vec<_>>(),
            "config": echo,
        });
        serde_json::to_string_pretty(&value).expect("plain JSON values") + "\n"
    }
}

struct Context {
    gamma: Exponent,
    eps: Exponent,
    rho: f64,
    c0: f64,
    b0: f64,
    cfg: SweepConfig,
}

fn bound_row(grid: &TensorGrid, pair: &EigenPair, ctx: &Context) -> Result<BoundRow> {
    let profile = grid.profile();
    let e = pair.energy;
    let chosen = choose_b(grid, e, ctx.gamma, ctx.eps, (ctx.cfg.m_large, ctx.cfg.m_small), ctx.b0)?;
    let (bl, bs) = b_values(e, ctx.gamma, ctx.eps, ctx.cfg.m_large, ctx.cfg.m_small)?;
    let decomp = decompose(grid, pair, None)?;
    let fg_large = compute_fg(grid, pair, chosen.large, decomp.kmax)?;
    let fg_small = compute_fg(grid, pair, chosen.small, decomp.kmax)?;
    let eps = to_f64(ctx.eps);
    let large = check_large_modes(grid, pair, &decomp, &fg_large, chosen.large)?;
    let small = check_small_modes(grid, pair, &decomp, &fg_small, chosen.small, eps, ctx.c0)?;
    let full = grid.expand(&pair.vector);
    let omega = grid.quadratic(&full, Region::All).mass;
    let wing = grid.quadratic(&full, Region::Wing).mass;
    let rect = grid.quadratic(&full, Region::Rectangle).mass;
    if wing <= 0.0 {
        return Err(Error::EmptyRegion(format!("pair {} has no wing mass", pair.index)));
    }
    let nu = resonance::nu(e, profile.l0, profile.b0)?.value;
    let z_flags = ctx
        .cfg
        .flag_eps
        .iter()
        .map(|&x| Ok((x, resonance::in_z_eps(e, x, ctx.c0, profile.l0, profile.b0)?)))
        .collect::<Result<Vec<_>>>()?;
    let ratio = (omega / wing).sqrt();
    Ok(BoundRow {
        index: pair.index,
        energy: e,
        nu,
        in_z: small.status == Applicability::Applicable,
        z_flags,
        wing_norm: wing.sqrt(),
        rect_norm: rect.sqrt(),
        omega_norm: omega.sqrt(),
        ratio,
        e_rho: e.powf(ctx.rho),
        bhw: ratio / e,
        b_large: bl,
        b_small: bs,
        b_large_snap: chosen.large.value,
        b_small_snap: chosen.small.value,
        bookkeeping_excess: large.report.lhs + small.report.lhs - rect - decomp.tail_mass,
        large,
        small,
    })
}

fn theil_sen_loglog(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite()).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    stats::theil_sen_slope(&xs, &ys)
}

/// Mass ratios against `E^rho` with per-term checks for every pair at or above `E0`.
pub fn theorem_sweep(grid: &TensorGrid, pairs: &[EigenPair], cfg: &SweepConfig) -> Result<BoundReport> {
    let profile = grid.profile();
    let gamma = exponent_from_f64(profile.gamma)?;
    let eps = exponent_from_f64(cfg.eps)?;
    let rho_q = rho(gamma, eps)?;
    let rho_value = to_f64(rho_q);
    let b0 = cfg.b0.unwrap_or(profile.b1 / 4.0);
    let e0 = cfg.e0.unwrap_or_else(|| pairs.iter().map(|p| p.energy).fold(f64::INFINITY, f64::min));
    let mut sorted: Vec<&EigenPair> = pairs.iter().filter(|p| p.energy >= e0).collect();
    sorted.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut warnings = Vec::new();

    let (c0, c0_chosen) = match cfg.c0 {
        Some(c) => (c, false),
        None => {
            let nus = sorted
                .iter()
                .map(|p| Ok(resonance::nu(p.energy, profile.l0, profile.b0)?.value))
                .collect::<Result<Vec<_>>>()?;
            match resonance::choose_c0(&nus, cfg.c0_fraction) {
                Some(c) => (c, true),
                None => return Err(Error::Precondition("no pair has nu(E) > 0, cannot choose c0".into())),
            }
        }
    };
    let ctx = Context { gamma, eps, rho: rho_value, c0, b0, cfg: cfg.clone() };
    let results = par_map(&sorted, cfg.jobs.max(1), |p| bound_row(grid, p, &ctx));
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (p, r) in sorted.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push(SkippedPair { index: p.index, energy: p.energy, reason: e.to_string() }),
        }
    }
    if let (Some(lo), Some(hi)) = (rows.first(), rows.last()) {
        if hi.energy < 10.0 * lo.energy {
            warnings.push(format!("energies span less than a decade ({} to {})", fmt15(lo.energy), fmt15(hi.energy)));
        }
    }
    if !skipped.is_empty() {
        warnings.push(format!("{} pairs skipped", skipped.len()));
    }

    let fit_rows: Vec<&BoundRow> = rows.iter().filter(|r| r.in_z && !r.large.fixture).collect();
    let in_z_count = rows.iter().filter(|r| r.in_z).count();
    let z_fraction = if rows.is_empty() { 0.0 } else { in_z_count as f64 / rows.len() as f64 };
    let insufficient = fit_rows.len() < MIN_PAIRS;
    let (mut c_fit, mut validation, mut ratio_slope) = (None, None, None);
    if !insufficient {
        let half = fit_rows.len() / 2;
        let c = fit_rows[..half].iter().map(|r| r.scaled()).fold(0.0, f64::max);
        c_fit = Some(c);
        validation = Some(fit_rows[half..].iter().map(|r| r.scaled() / c).fold(0.0, f64::max));
        ratio_slope = theil_sen_loglog(&fit_rows.iter().map(|r| (r.energy, r.ratio)).collect::<Vec<_>>());
    } else {
        warnings.push(format!("only {} pairs in Z_eps, need {MIN_PAIRS}", fit_rows.len()));
    }
    let trend_rows: Vec<&BoundRow> = rows.iter().filter(|r| !r.large.fixture).collect();
    let large_slope = theil_sen_loglog(
        &trend_rows.iter().filter_map(|r| r.large.report.constant.map(|c| (r.energy, c))).collect::<Vec<_>>(),
    );
    let small_slope = theil_sen_loglog(
        &fit_rows.iter().filter_map(|r| r.small.report.constant.map(|c| (r.energy, c))).collect::<Vec<_>>(),
    );

    let mut a = Vec::new();
    let ratio_ok = rows.iter().filter(|r| r.ratio < 1.0 - 1e-12).count();
    a.push(Assertion::check("ratio >= 1", ratio_ok == 0, format!("{ratio_ok} of {} rows below 1", rows.len())));
    let split = rows
        .iter()
        .map(|r| (r.wing_norm.powi(2) + r.rect_norm.powi(2) - r.omega_norm.powi(2)).abs() / r.omega_norm.powi(2))
        .fold(0.0, f64::max);
    a.push(Assertion::check("W + R = Omega", split <= 1e-12, format!("max relative gap {split:.3e}")));
    let book = rows
        .iter()
        .map(|r| r.bookkeeping_excess / r.rect_norm.powi(2).max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    a.push(Assertion::check(
        "mode bookkeeping",
        rows.is_empty() || book <= 1e-10,
        format!("max relative excess {book:.3e}"),
    ));
    let b_ok = rows.iter().all(|r| r.b_large_snap < b0 && r.b_small_snap < b0);
    a.push(Assertion::check("b below b0", b_ok, format!("b0 = {}", fmt15(b0))));
    if !insufficient {
        let v = validation.unwrap_or(f64::INFINITY);
        a.push(Assertion::check(
            "upper half within fitted bound",
            v <= VALIDATION_TOL,
            format!("C_fit = {}, validation = {}", fmt15(c_fit.unwrap_or(f64::NAN)), fmt15(v)),
        ));
        let s = ratio_slope.unwrap_or(f64::INFINITY);
        a.push(Assertion::check(
            "ratio slope",
            s <= rho_value + SLOPE_SLACK,
            format!("Theil-Sen slope {} against rho + {SLOPE_SLACK} = {}", fmt15(s), fmt15(rho_value + SLOPE_SLACK)),
        ));
        for (name, slope) in [("large-mode constant slope", large_slope), ("small-mode constant slope", small_slope)] {
            let s = slope.unwrap_or(f64::INFINITY);
            a.push(Assertion::check(name, s.abs() <= TERM_SLOPE_BAND, format!("Theil-Sen slope {}", fmt15(s))));
        }
    }
    let growth = rows.iter().map(|r| r.small.growth).fold(0.0, f64::max);
    a.push(Assertion::info("small-mode growth factor <= 4", growth <= 4.0, format!("max {}", fmt15(growth))));
    let bhw = rows.iter().map(|r| r.bhw).fold(0.0, f64::max);
    a.push(Assertion::info("ratio / E <= 1", bhw <= 1.0, format!("max {}", fmt15(bhw))));
    let max_in = rows.iter().filter(|r| r.in_z).map(|r| r.ratio).fold(0.0, f64::max);
    let max_out = rows.iter().filter(|r| !r.in_z).map(|r| r.ratio).fold(0.0, f64::max);
    a.push(Assertion::info(
        "largest ratios outside Z",
        max_out >= max_in,
        format!("max ratio in Z {}, outside {}", fmt15(max_in), fmt15(max_out)),
    ));
    a.push(Assertion::info("Z fraction", true, format!("{in_z_count} of {} pairs, c0 = {}", rows.len(), fmt15(c0))));

    Ok(BoundReport {
        gamma: gamma.to_string(),
        eps: eps.to_string(),
        rho: rho_q.to_string(),
        rho_value,
        c0,
        c0_chosen,
        b0,
        e0,
        rows,
        skipped,
        in_z_count,
        z_fraction,
        insufficient,
        c_fit,
        validation,
        ratio_slope,
        large_slope,
        small_slope,
        warnings,
        assertions: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_forms, solve_eigenpairs, SolverOptions, Window};
    use crate::geometry::BilliardProfile;

    #[test]
    fn worked_b_values() {
        let (two, zero) = (Exponent::from_integer(2), Exponent::from_integer(0));
        let (bl, bs) = b_values(1000.0, two, zero, 1.0, 1.0).unwrap();
        assert!((bl - 0.1).abs() < 1e-12);
        assert!((bs - 0.01).abs() < 1e-12);
        // prefactor sanity for gamma = 2, eps = 0
        for e in [1.0, 10.0, 1e3, 1e6] {
            let (_, bs) = b_values(e, two, zero, 1.0, 1.0).unwrap();
            assert!((1.0 + e * bs.powi(4)).powi(2) <= 4.0 + 1e-12);
        }
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 2.0, 0.95).unwrap();
        let grid = TensorGrid::new(p, 59, 20).unwrap();
        let c = choose_b(&grid, 1000.0, two, zero, (1.0, 1.0), 0.95 / 4.0);
        assert!(matches!(c, Err(Error::Resolution(_))));
        let c = choose_b(&grid, 1.0, two, zero, (1.0, 1.0), 0.95 / 4.0);
        assert!(matches!(c, Err(Error::Precondition(_))));
    }

    #[test]
    fn small_sweep_reports_insufficient_data() {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 2.0, 0.95).unwrap();
        let grid = TensorGrid::new(p, 118, 40).unwrap();
        let forms = assemble_forms(&grid).unwrap();
        let s = solve_eigenpairs(&forms, Window::Range { lo: 150.0, hi: 230.0 }, &SolverOptions::default()).unwrap();
        let r = theorem_sweep(&grid, &s.pairs, &SweepConfig::default()).unwrap();
        assert!(r.insufficient);
        assert!(r.c_fit.is_none());
        assert_eq!(r.rows.len() + r.skipped.len(), s.pairs.len());
        assert!(r.rows.iter().all(|row| row.ratio >= 1.0));
        assert!(r.passed(), "{:?}", r.assertions.iter().map(|a| a.line()).collect::<Vec<_>>());
        assert!(r.c0_chosen);
        assert!(r.z_fraction >= 0.3 - 1e-12);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), r.rows.len() + 1);
        assert!(r.summary_json(&[]).contains("\"insufficient_data\": true"));
        // a job count does not change the result
        let r2 = theorem_sweep(&grid, &s.pairs, &SweepConfig { jobs: 3, ..SweepConfig::default() }).unwrap();
        assert_eq!(csv, r2.to_csv());
    }
}
