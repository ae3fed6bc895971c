//! Identity-level checks of the mode decomposition on computed eigenpairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adiabatic::{compute_fg, decompose, form_values, GapProbe};
use crate::discretize::{AssembledForms, EigenPair};
use crate::error::Result;
use crate::export::{fmt15, Assertion, CsvTable};
use crate::parallel::par_map;

/// Mode sum against matrix value of `a_b`.
pub const MODE_SUM_TOL: f64 = 1e-6;
/// `|N_{B1}(u) - 1|`.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Plancherel ratio of the `G_k` against `y dy u`.
pub const PLANCHEREL_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct FormsConfig {
    /// Random test fields per pair for the `a_b - q_b` bound.
    pub random_fields: usize,
    /// Support of the test fields and depth of the `a_b` comparison; `None` is `B1 / 4`.
    pub b: Option<f64>,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for FormsConfig {
    fn default() -> Self {
        FormsConfig { random_fields: 100, b: None, seed: 0xf0f5, jobs: 1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FormsRow {
    pub index: usize,
    pub energy: f64,
    pub b: f64,
    /// Relative mode-sum gap of `a_b` at `b` and at `B1`.
    pub a_gap_b: f64,
    pub a_gap_b1: f64,
    /// `|N_{B1}(u) - 1|`.
    pub normalization: f64,
    pub g_plancherel: f64,
    /// Largest `|a_b(u, v) - q_b(u, v)| / (delta(b) sqrt(q_b(u) q_b(v)))` over the test fields.
    pub gap_ratio: f64,
    pub gap_violations: usize,
}

#[derive(Clone, Debug)]
pub struct FormsSuite {
    pub rows: Vec<FormsRow>,
    pub assertions: Vec<Assertion>,
}

impl FormsSuite {
    pub fn passed(&self) -> bool {
        crate::export::all_passed(&self.assertions)
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&[
            "index",
            "E",
            "b",
            "a_gap_b",
            "a_gap_B1",
            "normalization",
            "g_plancherel",
            "gap_ratio",
            "gap_violations",
        ]);
        for r in &self.rows {
            t.push_row(&[
                r.index.to_string(),
                fmt15(r.energy),
                fmt15(r.b),
                fmt15(r.a_gap_b),
                fmt15(r.a_gap_b1),
                fmt15(r.normalization),
                fmt15(r.g_plancherel),
                fmt15(r.gap_ratio),
                r.gap_violations.to_string(),
            ]);
        }
        t.render()
    }
}

fn forms_row(forms: &AssembledForms, pair: &EigenPair, cfg: &FormsConfig) -> Result<FormsRow> {
    let grid = &forms.grid;
    let profile = grid.profile();
    let b = grid.snap(cfg.b.unwrap_or(profile.b1 / 4.0))?;
    let b1 = grid.snap(profile.b1)?;
    let nt = grid.nt();
    let decomp = decompose(grid, pair, Some(nt - 1))?;
    let at_b = form_values(grid, pair, &decomp, b);
    let at_b1 = form_values(grid, pair, &decomp, b1);
    let fg = compute_fg(grid, pair, b, nt - 1)?;

    let probe = GapProbe::new(forms, pair, b)?;
    let support: Vec<usize> = (1..b.node).flat_map(|i| (1..nt).filter_map(move |j| grid.dof(i, j))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (pair.index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut v = vec![0.0; forms.n()];
    let (mut worst, mut violations) = (0.0f64, 0);
    for _ in 0..cfg.random_fields {
        for &d in &support {
            v[d] = rng.gen_range(-1.0..1.0);
        }
        let g = probe.check(&v)?;
        if !g.within_bound() {
            violations += 1;
        }
        if g.bound > 0.0 {
            worst = worst.max(g.lambda.abs() / g.bound);
        }
    }
    Ok(FormsRow {
        index: pair.index,
        energy: pair.energy,
        b: b.value,
        a_gap_b: at_b.a_gap(),
        a_gap_b1: at_b1.a_gap(),
        normalization: (at_b1.n_b_matrix - 1.0).abs(),
        g_plancherel: fg.g_plancherel,
        gap_ratio: worst,
        gap_violations: violations,
    })
}

/// Mode-sum identities, normalization, Plancherel and the `a_b - q_b` bound on every pair.
pub fn run_forms_suite(forms: &AssembledForms, pairs: &[EigenPair], cfg: &FormsConfig) -> Result<FormsSuite> {
    let rows = par_map(pairs, cfg.jobs, |p| forms_row(forms, p, cfg)).into_iter().collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&FormsRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let a_gap = max(|r| r.a_gap_b.max(r.a_gap_b1));
    let norm = max(|r| r.normalization);
    let planch = max(|r| (r.g_plancherel - 1.0).abs());
    let violations: usize = rows.iter().map(|r| r.gap_violations).sum();
    let n = rows.len();
    let assertions = vec![
        Assertion::check("a_b mode sum", a_gap <= MODE_SUM_TOL, format!("max relative gap {a_gap:.3e} over {n} pairs")),
        Assertion::check("N_B1 normalization", norm <= NORMALIZATION_TOL, format!("max |N - 1| = {norm:.3e}")),
        Assertion::check("Plancherel identity", planch <= PLANCHEREL_TOL, format!("max |ratio - 1| = {planch:.3e}")),
        Assertion::check(
            "a_b - q_b bound",
            violations == 0,
            format!(
                "{violations} violations in {} fields, max ratio {}",
                n * cfg.random_fields,
                fmt15(max(|r| r.gap_ratio))
            ),
        ),
    ];
    Ok(FormsSuite { rows, assertions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_forms, solve_eigenpairs, SolverOptions, TensorGrid, Window};
    use crate::geometry::BilliardProfile;

    #[test]
    fn stadium_pairs_pass() {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 2.0, 0.95).unwrap();
        let grid = TensorGrid::new(p, 118, 40).unwrap();
        let forms = assemble_forms(&grid).unwrap();
        let s = solve_eigenpairs(&forms, Window::Range { lo: 100.0, hi: 160.0 }, &SolverOptions::default()).unwrap();
        let cfg = FormsConfig { random_fields: 20, ..FormsConfig::default() };
        let suite = run_forms_suite(&forms, &s.pairs, &cfg).unwrap();
        assert_eq!(suite.rows.len(), s.pairs.len());
        assert!(suite.passed(), "{:?}", suite.assertions.iter().map(|a| a.line()).collect::<Vec<_>>());
        assert!(suite.rows.iter().all(|r| r.gap_ratio > 0.0 && r.gap_ratio <= 1.0));
        let again = run_forms_suite(&forms, &s.pairs, &FormsConfig { jobs: 2, ..cfg }).unwrap();
        assert_eq!(suite.to_csv(), again.to_csv());
    }
}
