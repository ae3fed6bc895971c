//! Per-pair evaluation of the large- and small-mode estimates.

use serde::Serialize;

use crate::adiabatic::{mode_masses, trapezoid, FgData, ModeDecomposition};
use crate::discretize::{EigenPair, Region, Snapped, TensorGrid};
use crate::error::{param, Result};
use crate::resonance;

/// Measured constant of one mode: `lhs <= C rhs`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModeConstant {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

/// Left side, the three right-hand terms and their ratio.
#[derive(Clone, Debug, Serialize)]
pub struct TermReport {
    pub b: f64,
    pub lhs: f64,
    pub terms: [f64; 3],
    /// `lhs / sum(terms)`; `None` when there is nothing to measure.
    pub constant: Option<f64>,
    pub per_mode: Vec<ModeConstant>,
}

impl TermReport {
    pub fn max_mode_constant(&self) -> Option<f64> {
        self.per_mode.iter().map(|m| m.constant).reduce(f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LargeModeReport {
    pub report: TermReport,
    /// Flat-wing fixture: the estimate holds trivially and the pair is kept out of fits.
    pub fixture: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Applicability {
    Applicable,
    /// `E` lies outside `Z_eps`; numbers are recorded but not used.
    OutsideZ,
    /// `nu(E) = 0`.
    Resonant,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallModeReport {
    pub report: TermReport,
    pub nu: f64,
    pub status: Applicability,
    /// `E / nu²`.
    pub prefactor: f64,
    /// `(1 + E b^{gamma+2})²`.
    pub growth: f64,
}

fn mode_norm(grid: &TensorGrid, coef: &[f64], from: usize, to: usize) -> f64 {
    let s = &grid.s_nodes()[from..=to];
    trapezoid(s, &coef[from..=to].iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
}

fn consistent(pair: &EigenPair, decomp: &ModeDecomposition, fg: &FgData, b: Snapped) -> Result<()> {
    if decomp.index != pair.index {
        return param(format!("decomposition of pair {} used for pair {}", decomp.index, pair.index));
    }
    if fg.b != b.value {
        return param(format!("F/G computed at b = {} but checked at b = {}", fg.b, b.value));
    }
    Ok(())
}

fn ratio(lhs: f64, rhs: f64) -> Option<f64> {
    (rhs > 0.0).then(|| lhs / rhs)
}

/// `||u_+||²_R <= C [b^{2g-1} ||dx u||²_{W_b} + E^{-1} b^{2g-3} ||dy u||²_{W_b} + b^{-1} ||u||²_{W_b}]`
/// and the per-mode version for every large `k <= kmax`.
pub fn check_large_modes(
    grid: &TensorGrid,
    pair: &EigenPair,
    decomp: &ModeDecomposition,
    fg: &FgData,
    b: Snapped,
) -> Result<LargeModeReport> {
    consistent(pair, decomp, fg, b)?;
    let profile = grid.profile();
    let (e, g, bv) = (pair.energy, profile.gamma, b.value);
    let full = grid.expand(&pair.vector);
    let wb = grid.quadratic(&full, Region::WingBelow(b.node));
    let masses = mode_masses(grid, decomp, Region::Rectangle);
    let large: Vec<usize> = (decomp.k_star..=decomp.kmax).collect();
    let lhs: f64 = large.iter().map(|&k| masses[k - 1]).sum();
    let terms = [bv.powf(2.0 * g - 1.0) * wb.dx, bv.powf(2.0 * g - 3.0) / e * wb.dy, wb.mass / bv];
    let per_mode = large
        .iter()
        .filter(|&&k| k <= fg.f.len())
        .filter_map(|&k| {
            let coef = decomp.mode(k);
            let l = mode_norm(grid, coef, 0, b.node);
            let r = bv.powf(g - 0.5) * fg.f_norm(k)
                + bv.powf(g - 1.5) / e.sqrt() * fg.g_norm(k)
                + mode_norm(grid, coef, grid.junction(), b.node) / bv.sqrt();
            ratio(l, r).map(|c| ModeConstant { k, lhs: l, rhs: r, constant: c })
        })
        .collect();
    let constant = if large.is_empty() { None } else { ratio(lhs, terms.iter().sum()) };
    Ok(LargeModeReport { report: TermReport { b: bv, lhs, terms, constant, per_mode }, fixture: profile.is_fixture() })
}

/// `||u_-||²_R <= C E/nu² [E b^{2g+1} ||dx u||²_W + b^{2g-1} ||dy u||²_W + (1 + E b^{g+2})² b^{-1} ||u||²_W]`
/// and the per-mode version for every small `k`.
#[allow(clippy::too_many_arguments)]
pub fn check_small_modes(
    grid: &TensorGrid,
    pair: &EigenPair,
    decomp: &ModeDecomposition,
    fg: &FgData,
    b: Snapped,
    eps: f64,
    c0: f64,
) -> Result<SmallModeReport> {
    consistent(pair, decomp, fg, b)?;
    let profile = grid.profile();
    let (e, g, bv) = (pair.energy, profile.gamma, b.value);
    let nu = resonance::nu(e, profile.l0, profile.b0)?.value;
    let in_z = resonance::in_z_eps(e, eps, c0, profile.l0, profile.b0)?;
    let growth = (1.0 + e * bv.powf(g + 2.0)).powi(2);
    let masses = mode_masses(grid, decomp, Region::Rectangle);
    let small: Vec<usize> = (1..decomp.k_star.min(decomp.kmax + 1)).collect();
    let lhs: f64 = small.iter().map(|&k| masses[k - 1]).sum();
    if nu == 0.0 {
        return Ok(SmallModeReport {
            report: TermReport { b: bv, lhs, terms: [f64::INFINITY; 3], constant: None, per_mode: Vec::new() },
            nu,
            status: Applicability::Resonant,
            prefactor: f64::INFINITY,
            growth,
        });
    }
    let full = grid.expand(&pair.vector);
    let w = grid.quadratic(&full, Region::Wing);
    let prefactor = e / (nu * nu);
    let terms = [
        prefactor * e * bv.powf(2.0 * g + 1.0) * w.dx,
        prefactor * bv.powf(2.0 * g - 1.0) * w.dy,
        prefactor * growth * w.mass / bv,
    ];
    let scale = e.sqrt() / nu;
    let per_mode = small
        .iter()
        .filter(|&&k| k <= fg.f.len())
        .filter_map(|&k| {
            let coef = decomp.mode(k);
            let l = mode_norm(grid, coef, 0, b.node);
            let r = scale
                * (e.sqrt() * bv.powf(g + 0.5) * fg.f_norm(k)
                    + bv.powf(g - 0.5) * fg.g_norm(k)
                    + (1.0 + e * bv.powf(g + 2.0)) * mode_norm(grid, coef, grid.junction(), b.node) / bv.sqrt());
            ratio(l, r).map(|c| ModeConstant { k, lhs: l, rhs: r, constant: c })
        })
        .collect();
    let constant = if small.is_empty() { None } else { ratio(lhs, terms.iter().sum()) };
    Ok(SmallModeReport {
        report: TermReport { b: bv, lhs, terms, constant, per_mode },
        nu,
        status: if in_z { Applicability::Applicable } else { Applicability::OutsideZ },
        prefactor,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::{compute_fg, decompose, split_modes};
    use crate::discretize::{assemble_forms, solve_eigenpairs, SolverOptions, Window};
    use crate::geometry::BilliardProfile;

    fn stadium_pairs() -> (TensorGrid, Vec<EigenPair>) {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 2.0, 0.95).unwrap();
        let grid = TensorGrid::new(p, 118, 40).unwrap();
        let forms = assemble_forms(&grid).unwrap();
        let s = solve_eigenpairs(&forms, Window::Range { lo: 150.0, hi: 260.0 }, &SolverOptions::default()).unwrap();
        (grid, s.pairs)
    }

    #[test]
    fn mode_masses_match_the_split_fields() {
        let (grid, pairs) = stadium_pairs();
        let pair = &pairs[0];
        let d = decompose(&grid, pair, None).unwrap();
        let split = split_modes(&grid, &d);
        let m = mode_masses(&grid, &d, Region::Rectangle);
        let plus: f64 = m[d.k_star - 1..].iter().sum();
        let minus: f64 = m[..d.k_star - 1].iter().sum();
        let plus_field = grid.quadratic(&split.plus, Region::Rectangle).mass;
        let minus_field = grid.quadratic(&split.minus, Region::Rectangle).mass;
        assert!((plus - plus_field).abs() < 1e-12 * (1.0 + plus_field), "{plus} {plus_field}");
        assert!((minus - minus_field).abs() < 1e-12 * (1.0 + minus_field), "{minus} {minus_field}");
        let rect = grid.quadratic(&grid.expand(&pair.vector), Region::Rectangle).mass;
        assert!(plus + minus <= rect + d.tail_mass + 1e-12);
    }

    #[test]
    fn reports_are_finite_and_consistent() {
        let (grid, pairs) = stadium_pairs();
        let pair = &pairs[pairs.len() / 2];
        let d = decompose(&grid, pair, None).unwrap();
        let bl = grid.snap(pair.energy.powf(-1.0 / 3.0)).unwrap();
        let fg = compute_fg(&grid, pair, bl, d.kmax).unwrap();
        let large = check_large_modes(&grid, pair, &d, &fg, bl).unwrap();
        assert!(large.report.constant.unwrap().is_finite());
        assert!(large.report.terms.iter().all(|t| *t > 0.0));
        assert_eq!(large.report.per_mode.len(), d.kmax - d.k_star + 1);
        assert!(!large.fixture);

        let bs = grid.snap(pair.energy.powf(-2.0 / 3.0)).unwrap();
        let fgs = compute_fg(&grid, pair, bs, d.kmax).unwrap();
        let small = check_small_modes(&grid, pair, &d, &fgs, bs, 0.0, 1e-9).unwrap();
        assert_eq!(small.status, Applicability::Applicable);
        assert!(small.report.constant.unwrap().is_finite());
        assert_eq!(small.report.per_mode.len(), d.k_star - 1);
        let nu = resonance::nu(pair.energy, 1.0, 2.0).unwrap().value;
        assert!((small.prefactor - pair.energy / (nu * nu)).abs() < 1e-12 * small.prefactor);
        // c0 above nu puts the pair outside Z_0
        let out = check_small_modes(&grid, pair, &d, &fgs, bs, 0.0, 2.0 * nu).unwrap();
        assert_eq!(out.status, Applicability::OutsideZ);

        // mismatched b is rejected
        assert!(check_large_modes(&grid, pair, &d, &fgs, bl).is_err());
    }

    #[test]
    fn empty_small_part_gives_zero_constant() {
        // pure large-mode field: only k >= k* present
        let (grid, pairs) = stadium_pairs();
        let pair = &pairs[0];
        let d = decompose(&grid, pair, None).unwrap();
        let split = split_modes(&grid, &d);
        let only_plus = EigenPair { vector: grid.restrict(&split.plus), ..pair.clone() };
        let d2 = decompose(&grid, &only_plus, Some(d.kmax)).unwrap();
        let bs = grid.snap(0.05).unwrap();
        let fg = compute_fg(&grid, &only_plus, bs, d2.kmax).unwrap();
        let small = check_small_modes(&grid, &only_plus, &d2, &fg, bs, 0.0, 1e-9).unwrap();
        assert!(small.report.lhs < 1e-20, "{}", small.report.lhs);
        assert!(small.report.constant.unwrap() < 1e-12);
    }

    #[test]
    fn fixture_is_flagged() {
        let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
        let grid = TensorGrid::new(p, 64, 24).unwrap();
        let forms = assemble_forms(&grid).unwrap();
        let s = solve_eigenpairs(&forms, Window::Lowest(3), &SolverOptions::default()).unwrap();
        let pair = &s.pairs[2];
        let d = decompose(&grid, pair, Some(10)).unwrap();
        let b = grid.snap(0.25).unwrap();
        let fg = compute_fg(&grid, pair, b, d.kmax).unwrap();
        let r = check_large_modes(&grid, pair, &d, &fg, b).unwrap();
        assert!(r.fixture);
        assert!(r.report.terms.iter().all(|t| t.is_finite()));
    }
}
