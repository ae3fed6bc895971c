use super::{
    convexity_check, convexity_samples, green_g, green_ratio, manufactured, mode_solution, sinh_ratio_f,
    verify_control, Regime,
};
use crate::error::{param, Result};
use crate::export::{fmt15, Assertion, CsvTable};
use crate::geometry::BilliardProfile;
use crate::parallel::par_map;
use crate::stats::loglog_slope;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Parameters of the one-dimensional verification suite.
#[derive(Clone, Debug, Serialize)]
pub struct OnedimConfig {
    pub b0: f64,
    /// Defaults to `π/(2 B0)`.
    pub beta: Option<f64>,
    pub eps_hat: f64,
    /// Mesh cells per unit length (raised automatically for oscillatory `z`).
    pub density: f64,
    pub samples: usize,
    pub b_values: Vec<f64>,
    pub slope_tol: f64,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for OnedimConfig {
    fn default() -> Self {
        Self {
            b0: 1.0,
            beta: None,
            eps_hat: 0.1,
            density: 64.0,
            samples: 50,
            b_values: vec![0.05, 0.1, 0.2],
            slope_tol: 0.15,
            seed: 0x0d1e,
            jobs: 1,
        }
    }
}

impl OnedimConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(PI / (2.0 * self.b0))
    }
}

/// The six `z` families swept against `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ZFamily {
    Fixed(f64),
    HalfBetaSquared,
    OverBSquared(f64),
}

impl ZFamily {
    pub const STANDARD: [ZFamily; 6] = [
        ZFamily::Fixed(-25.0),
        ZFamily::Fixed(-1.0),
        ZFamily::HalfBetaSquared,
        ZFamily::OverBSquared(0.5),
        ZFamily::OverBSquared(4.0),
        ZFamily::OverBSquared(25.0),
    ];

    pub fn z(&self, b: f64, beta: f64) -> f64 {
        match *self {
            ZFamily::Fixed(z) => z,
            ZFamily::HalfBetaSquared => 0.5 * beta * beta,
            ZFamily::OverBSquared(c) => c / (b * b),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ZFamily::Fixed(z) => format!("{z}"),
            ZFamily::HalfBetaSquared => "0.5*beta^2".into(),
            ZFamily::OverBSquared(c) => format!("{c}/b^2"),
        }
    }
}

/// Worst measured constant over the manufactured solutions of one `(z, b)` cell.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub z: f64,
    pub b: f64,
    pub regime: Regime,
    pub measured_constant: f64,
    pub sin_factor: Option<f64>,
    pub mesh_n: usize,
    pub samples: usize,
    pub excluded: usize,
    pub all_finite: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OnedimSuite {
    pub config: OnedimConfig,
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the worst constant against `b`, per family.
    pub slopes: Vec<(String, f64)>,
    pub assertions: Vec<Assertion>,
}

impl OnedimSuite {
    pub fn passed(&self) -> bool {
        crate::export::all_passed(&self.assertions)
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["z", "b", "regime", "measured_constant", "sin_factor", "mesh_n", "family"]);
        for r in &self.rows {
            t.push_row(&[
                fmt15(r.z),
                fmt15(r.b),
                r.regime.label().to_string(),
                fmt15(r.measured_constant),
                r.sin_factor.map(fmt15).unwrap_or_default(),
                r.mesh_n.to_string(),
                r.family.clone(),
            ]);
        }
        t.render()
    }
}

/// Runs the manufactured-solution sweep and the Green, convexity and `F` checks.
pub fn run_suite(cfg: &OnedimConfig) -> Result<OnedimSuite> {
    if cfg.b_values.len() < 2 || cfg.samples == 0 {
        return param("the sweep needs at least two b values and one sample");
    }
    let beta = cfg.beta();
    let cells: Vec<(usize, ZFamily, f64)> = ZFamily::STANDARD
        .iter()
        .enumerate()
        .flat_map(|(f, fam)| cfg.b_values.iter().map(move |&b| (f, *fam, b)))
        .collect();
    let rows = par_map(&cells, cfg.jobs, |&(f, fam, b)| sweep_cell(cfg, f, fam, b, beta));
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut assertions = Vec::new();
    let finite = rows.iter().all(|r| r.all_finite);
    assertions.push(Assertion::check(
        "control constants finite",
        finite,
        format!("{} cells x {} manufactured solutions", rows.len(), cfg.samples),
    ));
    let mut slopes = Vec::new();
    for fam in ZFamily::STANDARD {
        let (bs, cs): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.family == fam.label()).map(|r| (r.b, r.measured_constant)).unzip();
        let slope = loglog_slope(&bs, &cs);
        assertions.push(Assertion::check(
            format!("b-slope of control constant, z = {}", fam.label()),
            slope.abs() <= cfg.slope_tol,
            format!("slope {slope:.4} (tolerance {})", cfg.slope_tol),
        ));
        slopes.push((fam.label(), slope));
    }

    assertions.extend(green_checks(cfg, beta)?);
    assertions.extend(convexity_checks(cfg)?);

    let near = sinh_ratio_f(0.01) / 0.01;
    assertions.push(Assertion::check(
        "F(X)/X -> 1/3 as X -> 0",
        (near - 1.0 / 3.0).abs() <= 0.01 / 3.0,
        format!("F(0.01)/0.01 = {near:.6}"),
    ));
    let far = sinh_ratio_f(30.0);
    assertions.push(Assertion::check(
        "F(X) -> 1/2 as X -> infinity",
        (far - 0.5).abs() <= 0.005,
        format!("F(30) = {far:.6}"),
    ));
    assertions.push(Assertion::info(
        "F(X) -> 1 as X -> infinity (claimed limit)",
        (far - 1.0).abs() <= 0.01,
        format!("F(30) = {far:.6}; the integral of sinh² is asymptotically half of sinh²"),
    ));

    Ok(OnedimSuite { config: cfg.clone(), rows, slopes, assertions })
}

fn sweep_cell(cfg: &OnedimConfig, family: usize, fam: ZFamily, b: f64, beta: f64) -> Result<SweepRow> {
    let z = fam.z(b, beta);
    let seed = cfg.seed ^ ((family as u64) << 32) ^ (b.to_bits().rotate_left(17));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut excluded, mut all_finite, mut mesh_n, mut sin_factor) = (0.0f64, 0, true, 0, None);
    let mut regime = Regime::classify(z, b, beta);
    for _ in 0..cfg.samples {
        let m = manufactured(cfg.b0, b, z, cfg.density, &mut rng)?;
        let r = verify_control(&m.problem, &m.u, beta)?;
        regime = r.regime;
        mesh_n = r.mesh_n;
        sin_factor = r.sin_factor;
        if r.excluded {
            excluded += 1;
            continue;
        }
        all_finite &= r.constant.is_finite() && r.constant > 0.0;
        worst = worst.max(r.constant);
    }
    Ok(SweepRow {
        family: fam.label(),
        z,
        b,
        regime,
        measured_constant: worst,
        sin_factor,
        mesh_n,
        samples: cfg.samples,
        excluded,
        all_finite,
    })
}

fn green_checks(cfg: &OnedimConfig, beta: f64) -> Result<Vec<Assertion>> {
    let mut out = Vec::new();
    let cap = |b: f64| (1.0 - cfg.eps_hat) * PI * PI / (b * b);

    // continuity and jump at 0, measured with one-sided differences
    let (mut worst_cont, mut worst_jump, mut tried) = (0.0f64, 0.0f64, 0);
    for &b in &cfg.b_values {
        for z in [-25.0, -1.0, 0.5 * beta * beta, 2.0 * beta * beta, 0.5 / (b * b), 0.9 * cap(b)] {
            let g = green_g(z, cfg.b0, b)?;
            let d = 1e-5 * b;
            let sup = (0..=200).map(|i| g.eval(-cfg.b0 + (cfg.b0 + b) * i as f64 / 200.0).abs()).fold(0.0, f64::max);
            worst_cont = worst_cont.max((g.eval(-1e-300) - g.eval(0.0)).abs() / sup);
            let right = (-3.0 * g.eval(0.0) + 4.0 * g.eval(d) - g.eval(2.0 * d)) / (2.0 * d);
            let left = (3.0 * g.eval(0.0) - 4.0 * g.eval(-d) + g.eval(-2.0 * d)) / (2.0 * d);
            let want = -super::trig_s(z, cfg.b0 + b);
            worst_jump = worst_jump.max(((right - left) - want).abs() / want.abs());
            tried += 1;
        }
    }
    out.push(Assertion::check(
        "Green function continuous at 0",
        worst_cont <= 1e-12,
        format!("worst relative gap {worst_cont:.2e} over {tried} (z, b)"),
    ));
    out.push(Assertion::check(
        "Green function derivative jump equals -S_z(B0 + b)",
        worst_jump <= 1e-6,
        format!("worst relative error {worst_jump:.2e} over {tried} (z, b)"),
    ));

    // regime (1): b^{1/2} ‖G‖_left / ‖G‖_right flat in b
    for z in [-25.0, -1.0, 0.5 * beta * beta] {
        let ratios: Vec<f64> =
            cfg.b_values.iter().map(|&b| green_ratio(z, cfg.b0, b, cfg.density)).collect::<Result<_>>()?;
        let slope = loglog_slope(&cfg.b_values, &ratios);
        out.push(Assertion::check(
            format!("Green ratio b-slope, z = {z:.4}"),
            slope.abs() <= cfg.slope_tol,
            format!("slope {slope:.4}"),
        ));
    }

    // regime (2): |sin(√z B0)| times the same ratio stays bounded
    let mut worst = 0.0f64;
    for &b in &cfg.b_values {
        let (lo, hi) = (beta * beta, cap(b));
        for i in 0..=40 {
            let z = lo * (hi / lo).powf(i as f64 / 40.0);
            let s = (z.sqrt() * cfg.b0).sin().abs();
            if s < 1e-12 {
                continue;
            }
            worst = worst.max(s * green_ratio(z, cfg.b0, b, cfg.density)?);
        }
    }
    out.push(Assertion::check(
        "Green ratio times |sin(B0 sqrt z)| bounded for beta^2 <= z <= (1-eps)pi^2/b^2",
        worst.is_finite(),
        format!("max {worst:.4}"),
    ));
    Ok(out)
}

fn convexity_checks(cfg: &OnedimConfig) -> Result<Vec<Assertion>> {
    let b_cap = cfg.b_values.iter().cloned().fold(0.0, f64::max);
    let (mut violations, mut tried, mut worst) = (0, 0, f64::INFINITY);
    for &b in &cfg.b_values {
        for omega in [0.0, 1.0, 5.0, 20.0, 100.0] {
            let c = convexity_check(omega, cfg.b0, b, b_cap)?;
            tried += 1;
            violations += usize::from(!c.holds);
            worst = worst.min(c.margin);
        }
    }
    let profile = BilliardProfile::truncated_quarter_stadium(1.0, cfg.b0, 0.95)?;
    for energy in [100.0f64, 400.0, 1000.0] {
        let kmin = (profile.l0 * (2.0 * energy).sqrt() / PI).ceil() as usize;
        for k in [kmin, kmin + 2, kmin + 5] {
            for &b in &cfg.b_values {
                let (mesh, w) = mode_solution(&profile, k, energy, b)?;
                let c = convexity_samples(&mesh, &w, b_cap)?;
                tried += 1;
                violations += usize::from(!c.holds);
                worst = worst.min(c.margin);
            }
        }
    }
    Ok(vec![Assertion::check(
        "convexity inequality for decaying modes",
        violations == 0,
        format!("{violations} violations in {tried} cases, smallest margin {worst:.4}"),
    )])
}
