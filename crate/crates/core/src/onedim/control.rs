use super::hminus1::{from_cell, RhsRef};
use super::{trig_s, Mesh1d, ModeProblem, Rhs};
use crate::error::{param, Error, Result};
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Which estimate of the control theorem applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `z ≤ β²`
    Small,
    /// `β² < z ≤ 1/b²`
    Middle,
    /// `z > 1/b²`
    Large,
}

impl Regime {
    pub fn classify(z: f64, b: f64, beta: f64) -> Self {
        if z <= beta * beta {
            Regime::Small
        } else if z <= 1.0 / (b * b) {
            Regime::Middle
        } else {
            Regime::Large
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::Small => "z<=beta^2",
            Regime::Middle => "beta^2<=z<=1/b^2",
            Regime::Large => "z>=1/b^2",
        }
    }
}

/// Measured constant of the control estimate for one solution.
#[derive(Clone, Debug, Serialize)]
pub struct ControlReport {
    pub regime: Regime,
    pub z: f64,
    pub b: f64,
    pub b0: f64,
    pub beta: f64,
    /// `‖u‖_{L²(-B0,0)}` divided by the regime's right-hand side; NaN when excluded.
    pub constant: f64,
    /// `|sin(B0 √z)|` for `z > 0`.
    pub sin_factor: Option<f64>,
    pub u_left: f64,
    pub u_right: f64,
    pub h_norm: f64,
    /// Relative misfit of `u` against particular + homogeneous solution.
    pub residual: f64,
    pub mesh_n: usize,
    /// Middle regime with `|sin(B0 √z)| < 1e-12`.
    pub excluded: bool,
}

impl ControlReport {
    /// `b^{1/2} ‖h‖_{H⁻¹} + b^{-1/2} ‖u‖_{L²(0,b)}`.
    pub fn base_rhs(&self) -> f64 {
        self.b.sqrt() * self.h_norm + self.u_right / self.b.sqrt()
    }

    /// `‖u‖_{L²(-B0,0)}` over [`Self::base_rhs`], without the `1/|sin|` factor.
    pub fn raw_ratio(&self) -> f64 {
        self.u_left / self.base_rhs()
    }
}

pub const RESIDUAL_TOL: f64 = 1e-6;
const RESONANT: f64 = 1e-12;

/// Measures the control constant for samples `u` of a solution of `problem`.
pub fn verify_control(problem: &ModeProblem, u: &[f64], beta: f64) -> Result<ControlReport> {
    let mesh = &problem.mesh;
    if u.len() != mesh.len() {
        return param(format!("{} samples on {} nodes", u.len(), mesh.len()));
    }
    if !(beta > 0.0) {
        return param(format!("beta must be positive, got {beta}"));
    }
    let (z, b, b0) = (problem.z, problem.b(), problem.b0());
    let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if u[0].abs() > 1e-12 * peak {
        return Err(Error::Precondition(format!("u(-B0) = {} is not zero", u[0])));
    }

    // u - v_p must be a multiple of S_z(x + B0)
    let vp = problem.particular();
    let hom = mesh.sample(|x| trig_s(z, x + b0));
    let r: Vec<f64> = u.iter().zip(&vp).map(|(a, b)| a - b).collect();
    let amp = dot(&r, &hom) / dot(&hom, &hom);
    let misfit: f64 = r.iter().zip(&hom).map(|(r, s)| (r - amp * s).powi(2)).sum::<f64>().sqrt();
    let scale = dot(u, u).sqrt();
    let residual = if scale > 0.0 { misfit / scale } else { misfit };
    if residual > RESIDUAL_TOL {
        return Err(Error::NotASolution(residual));
    }

    let regime = Regime::classify(z, b, beta);
    let sin_factor = (z > 0.0).then(|| (b0 * z.sqrt()).sin().abs());
    let mut report = ControlReport {
        regime,
        z,
        b,
        b0,
        beta,
        constant: f64::NAN,
        sin_factor,
        u_left: mesh.norm_left(u),
        u_right: mesh.norm_right(u),
        h_norm: problem.h_norm().norm,
        residual,
        mesh_n: mesh.len(),
        excluded: false,
    };
    let rhs = match (regime, sin_factor) {
        (Regime::Middle, Some(s)) if s < RESONANT => {
            report.excluded = true;
            return Ok(report);
        }
        (Regime::Middle, Some(s)) => report.base_rhs() / s,
        _ => report.base_rhs(),
    };
    report.constant = if rhs > 0.0 { report.u_left / rhs } else { 0.0 };
    Ok(report)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A synthetic solution together with the problem it solves.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub problem: ModeProblem,
    pub u: Vec<f64>,
    /// Coefficient of the homogeneous solution `S_z(x + B0)`.
    pub amplitude: f64,
}

/// `u = A S_z(x + B0) + v_p[g]` with a smooth random `g` supported in `[0, b]`.
///
/// `g` is a random cosine polynomial on `[0, b]`, scaled so the driven part
/// is comparable to the homogeneous one up to a log-uniform factor in `[0.1, 10]`.
pub fn manufactured(b0: f64, b: f64, z: f64, density: f64, rng: &mut impl Rng) -> Result<Manufactured> {
    let mesh = Mesh1d::for_problem(b0, b, z, density)?;
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let amplitude: f64 = sign * rng.gen_range(0.5..2.0);
    let coef: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let spread = 10f64.powf(rng.gen_range(-1.0..1.0));
    let hom = mesh.sample(|x| trig_s(z, x + b0));
    let rms = (super::sq_norm(mesh.right(), &hom[mesh.zero()..]) / b).sqrt();
    let sigma = amplitude.abs() * rms / (b * b) * spread;
    let g = mesh.sample(|x| {
        if x < 0.0 {
            0.0
        } else {
            sigma * coef.iter().enumerate().map(|(m, c)| c * (m as f64 * PI * x / b).cos()).sum::<f64>()
        }
    });
    let problem = ModeProblem::new(z, Rhs::Density(g), mesh)?;
    let vp = problem.particular();
    let u = hom.iter().zip(&vp).map(|(s, v)| amplitude * s + v).collect();
    Ok(Manufactured { problem, u, amplitude })
}

/// `ρ_1` with its first two derivatives: `1` on `x ≤ 1/2`, `0` on `x ≥ 1`.
pub fn cutoff(x: f64) -> (f64, f64, f64) {
    if x <= 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    // ψ(t) = exp(-1/t) and its derivatives
    let psi = |t: f64| {
        let p = (-1.0 / t).exp();
        (p, p / (t * t), p * (1.0 / t.powi(4) - 2.0 / t.powi(3)))
    };
    let (a, a1, a2) = psi(1.0 - x);
    let (c, c1, c2) = psi(x - 0.5);
    let (a1, a2) = (-a1, a2);
    let s = a + c;
    let n = a1 * c - a * c1;
    let n1 = a2 * c - a * c2;
    (a / s, n / (s * s), n1 / (s * s) - 2.0 * n * (a1 + c1) / (s * s * s))
}

/// H⁻¹ norms of the two commutator terms of `ρ_b u`, with `ρ_b(x) = ρ_1(x/b)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Commutator {
    /// `‖(ρ_b' u)'‖_{H⁻¹(-B0,b)}`.
    pub first: f64,
    /// `‖ρ_b'' u‖_{H⁻¹(-B0,b)}`.
    pub second: f64,
    /// `b⁻¹ ‖u‖_{L²(0,b)}`.
    pub scale: f64,
}

impl Commutator {
    pub fn ratio_first(&self) -> f64 {
        self.first / self.scale
    }

    pub fn ratio_second(&self) -> f64 {
        self.second / self.scale
    }
}

pub fn cutoff_commutator(mesh: &Mesh1d, u: &[f64]) -> Result<Commutator> {
    if u.len() != mesh.len() {
        return param(format!("{} samples on {} nodes", u.len(), mesh.len()));
    }
    let b = mesh.b();
    let (mut first, mut second) = (vec![0.0; u.len()], vec![0.0; u.len()]);
    for (i, &x) in mesh.nodes().iter().enumerate().skip(mesh.zero()) {
        let (_, d1, d2) = cutoff(x / b);
        first[i] = d1 / b * u[i];
        second[i] = d2 / (b * b) * u[i];
    }
    let (nodes, zero) = (mesh.nodes(), mesh.zero());
    Ok(Commutator {
        first: from_cell(nodes, RhsRef::Antiderivative(&first), zero).norm,
        second: from_cell(nodes, RhsRef::Density(&second), zero).norm,
        scale: mesh.norm_right(u) / b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onedim::green_g;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regimes() {
        let beta = PI / 2.0;
        assert_eq!(Regime::classify(-25.0, 0.1, beta), Regime::Small);
        assert_eq!(Regime::classify(beta * beta, 0.1, beta), Regime::Small);
        assert_eq!(Regime::classify(50.0, 0.1, beta), Regime::Middle);
        assert_eq!(Regime::classify(99.0, 0.1, beta), Regime::Middle);
        assert_eq!(Regime::classify(100.1, 0.1, beta), Regime::Large);
    }

    #[test]
    fn homogeneous_solution_reduces_to_one_term() {
        let (b0, b, z) = (1.0, 0.1, 400.0);
        let mesh = Mesh1d::for_problem(b0, b, z, 64.0).unwrap();
        let u = mesh.sample(|x| 3.0 * trig_s(z, x + b0));
        let zero = vec![0.0; mesh.len()];
        let p = ModeProblem::new(z, Rhs::Density(zero), mesh.clone()).unwrap();
        let r = verify_control(&p, &u, PI / 2.0).unwrap();
        assert_eq!(r.regime, Regime::Large);
        assert_eq!(r.h_norm, 0.0);
        let expected = mesh.norm_left(&u) / (mesh.norm_right(&u) / b.sqrt());
        assert!(r.constant.is_finite() && (r.constant - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn manufactured_solutions_pass_the_residual_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for z in [-25.0, -1.0, 1.2, 50.0, 1600.0] {
            let m = manufactured(1.0, 0.05, z, 64.0, &mut rng).unwrap();
            let r = verify_control(&m.problem, &m.u, PI / 2.0).unwrap();
            assert!(r.residual < 1e-12 && r.constant.is_finite() && r.constant > 0.0, "{r:?}");
        }
        // a perturbed u is rejected
        let mut m = manufactured(1.0, 0.1, -25.0, 64.0, &mut rng).unwrap();
        let i = m.u.len() - 3;
        m.u[i] *= 1.01;
        assert!(matches!(verify_control(&m.problem, &m.u, PI / 2.0), Err(Error::NotASolution(_))));
        m.u[0] = 1.0;
        assert!(matches!(verify_control(&m.problem, &m.u, PI / 2.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn green_function_is_a_solution_with_a_point_mass() {
        let g = green_g(30.0, 1.0, 0.1).unwrap();
        let mesh = Mesh1d::for_problem(1.0, 0.1, 30.0, 128.0).unwrap();
        let (p, u) = g.as_problem(mesh).unwrap();
        let r = verify_control(&p, &u, PI / 2.0).unwrap();
        assert!(r.residual < 1e-10, "{}", r.residual);
        assert_eq!(r.regime, Regime::Middle);
    }

    #[test]
    fn resonant_middle_regime_is_excluded() {
        let (b0, b) = (1.0, 0.1);
        let z = (2.0 * PI / b0).powi(2);
        let mesh = Mesh1d::for_problem(b0, b, z, 64.0).unwrap();
        let u = mesh.sample(|x| trig_s(z, x + b0));
        let p = ModeProblem::new(z, Rhs::Density(vec![0.0; mesh.len()]), mesh).unwrap();
        let r = verify_control(&p, &u, PI / 2.0).unwrap();
        assert!(r.excluded && r.constant.is_nan());
    }

    #[test]
    fn near_resonance_scales_like_inverse_sine() {
        // same b, one z with |sin(B0 √z)| = 0.05 and one with |sin| = 1; b small
        // enough that the point mass at 0 does not mask the resonance (λ b << 0.05)
        let (b0, b) = (1.0, 0.01);
        let ratio = |lambda: f64| {
            let g = green_g(lambda * lambda, b0, b).unwrap();
            let mesh = Mesh1d::for_problem(b0, b, lambda * lambda, 256.0).unwrap();
            let (p, u) = g.as_problem(mesh).unwrap();
            verify_control(&p, &u, PI / 2.0).unwrap()
        };
        let near = ratio(PI - 0.05f64.asin());
        let far = ratio(1.5 * PI);
        assert!((near.sin_factor.unwrap() - 0.05).abs() < 1e-12);
        let growth = near.raw_ratio() / far.raw_ratio();
        assert!((20.0 / 3.0..=60.0).contains(&growth), "{growth}");
        assert!(near.constant / far.constant < 3.0 && far.constant / near.constant < 3.0);
    }

    #[test]
    fn cutoff_derivatives() {
        let h = 1e-5;
        for x in [0.55, 0.7, 0.8, 0.95] {
            let (r, d1, d2) = cutoff(x);
            assert!((0.0..=1.0).contains(&r));
            let fd1 = (cutoff(x + h).0 - cutoff(x - h).0) / (2.0 * h);
            let fd2 = (cutoff(x + h).1 - cutoff(x - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()), "{x} {d1} {fd1}");
            assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()), "{x} {d2} {fd2}");
        }
        assert_eq!(cutoff(0.3), (1.0, 0.0, 0.0));
        assert_eq!(cutoff(1.2), (0.0, 0.0, 0.0));
        assert!((cutoff(0.75).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn commutator_terms() {
        let b = 0.1;
        let mesh = Mesh1d::new(1.0, b, 4096.0).unwrap();
        let early = mesh.sample(|x| if (0.0..b / 4.0).contains(&x) { (x * 40.0 * PI).sin() } else { 0.0 });
        let c = cutoff_commutator(&mesh, &early).unwrap();
        assert_eq!((c.first, c.second), (0.0, 0.0));

        let ones = |density: f64, b: f64| {
            let mesh = Mesh1d::new(1.0, b, density).unwrap();
            let u = mesh.sample(|x| if x >= 0.0 { 1.0 } else { 0.0 });
            cutoff_commutator(&mesh, &u).unwrap()
        };
        let (a, c) = (ones(4096.0, b), ones(8192.0, b));
        assert!((a.ratio_first() - c.ratio_first()).abs() < 1e-3 * c.ratio_first());
        assert!((a.ratio_second() - c.ratio_second()).abs() < 1e-3 * c.ratio_second());

        let rs: Vec<Commutator> = [0.05, 0.1, 0.2].iter().map(|&b| ones(8192.0, b)).collect();
        for r in &rs[1..] {
            assert!((r.ratio_first() / rs[0].ratio_first() - 1.0).abs() < 0.2);
            assert!((r.ratio_second() / rs[0].ratio_second() - 1.0).abs() < 0.2);
        }
    }
}
