use super::hminus1::RhsRef;
use super::{trig_c, trig_s, Mesh1d, ModeProblem, Rhs};
use crate::error::{param, Error, Result};
use std::f64::consts::PI;

const GL_X: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_W: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// `v(x) = -∫_0^x S_z(x-y) h(y) dy`, or `-∫_0^x C_z(x-y) H(y) dy` for an antiderivative.
/// Both solve `-v'' - z v = h` with `v = 0` on `(-B0, 0]`.
pub(crate) fn duhamel(mesh: &Mesh1d, z: f64, rhs: RhsRef<'_>) -> Vec<f64> {
    let (x, zero) = (mesh.nodes(), mesh.zero());
    type Kernel = fn(f64, f64) -> f64;
    let (vals, kernel): (&[f64], Kernel) = match rhs {
        RhsRef::Density(v) => (v, trig_s),
        RhsRef::Antiderivative(v) => (v, trig_c),
    };
    let mut out = vec![0.0; x.len()];
    for i in zero + 1..x.len() {
        let mut acc = 0.0;
        for c in zero..i {
            let (a, b) = (x[c], x[c + 1]);
            let half = 0.5 * (b - a);
            for (g, w) in GL_X.iter().zip(GL_W) {
                let t = 0.5 * (1.0 + g);
                let y = a + (b - a) * t;
                let f = vals[c] * (1.0 - t) + vals[c + 1] * t;
                acc += w * half * kernel(z, x[i] - y) * f;
            }
        }
        out[i] = -acc;
    }
    out
}

/// Sine-series particular solution on `(0, b)`.
#[derive(Clone, Debug)]
pub struct FourierSolution {
    /// Values at the nodes of `[0, b]`; zero at both ends.
    pub values: Vec<f64>,
    /// `‖v_p‖_{L²(0,b)} / (b ‖h‖_{H⁻¹(-B0,b)})`.
    pub ratio: f64,
}

/// Expands `h` in `sin(kπx/b)` and divides by `k²π²/b² - z`.
pub fn vp_fourier(problem: &ModeProblem, eps_hat: f64) -> Result<FourierSolution> {
    let Rhs::Density(h) = &problem.rhs else {
        return param("the sine-series solution needs h as a density");
    };
    let (z, b) = (problem.z, problem.b());
    if !(0.0..1.0).contains(&eps_hat) {
        return param(format!("eps_hat must lie in [0, 1), got {eps_hat}"));
    }
    let cap = (1.0 - eps_hat) * PI * PI / (b * b);
    if z > cap {
        return Err(Error::Regime(format!("z = {z} exceeds (1 - eps_hat) pi²/b² = {cap}")));
    }
    let zero = problem.mesh.zero();
    let h = &h[zero..];
    let m = h.len() - 1;
    let table: Vec<f64> = (0..2 * m).map(|j| (PI * j as f64 / m as f64).sin()).collect();
    let mut values = vec![0.0; m + 1];
    for k in 1..m {
        // discrete sine transform on the interior nodes
        let coef = 2.0 / m as f64 * (1..m).map(|j| h[j] * table[(k * j) % (2 * m)]).sum::<f64>();
        let a = coef / ((k * k) as f64 * PI * PI / (b * b) - z);
        for j in 1..m {
            values[j] += a * table[(k * j) % (2 * m)];
        }
    }
    let norm = super::sq_norm(problem.mesh.right(), &values).sqrt();
    let hn = problem.h_norm().norm;
    let ratio = if hn > 0.0 { norm / (b * hn) } else { 0.0 };
    Ok(FourierSolution { values, ratio })
}

/// Duhamel particular solution on the whole mesh with the checks that go with it.
#[derive(Clone, Debug)]
pub struct DuhamelSolution {
    pub values: Vec<f64>,
    /// `‖H‖_{L²(0,b)}`.
    pub h_l2: f64,
    /// `|v_p(x)| ≤ ‖H‖ √x` at every node.
    pub envelope_ok: bool,
    /// `‖v_p‖_{L²(0,b)} ≤ b ‖H‖`.
    pub l2_ok: bool,
}

/// `v_p(x) = ∫_0^x cos(λ(x-y)) H(y) dy` for `λ ≥ 1/b`.
///
/// This is the textbook form, which solves `v'' + λ² v = h`; the solution of
/// `-v'' - λ² v = h` is its negative. The bounds checked here are sign-blind.
pub fn vp_duhamel(mesh: &Mesh1d, big_h: &[f64], lambda: f64) -> Result<DuhamelSolution> {
    if big_h.len() != mesh.len() {
        return param(format!("{} samples on {} nodes", big_h.len(), mesh.len()));
    }
    if let Some(i) = big_h[..mesh.zero()].iter().position(|&v| v != 0.0) {
        return Err(Error::Precondition(format!("H is nonzero at x = {} < 0", mesh.nodes()[i])));
    }
    let b = mesh.b();
    if !(lambda * b >= 1.0) {
        return Err(Error::Regime(format!("lambda = {lambda} is below 1/b = {}", 1.0 / b)));
    }
    let values: Vec<f64> = duhamel(mesh, lambda * lambda, RhsRef::Antiderivative(big_h)).iter().map(|v| -v).collect();
    let h_l2 = mesh.norm_right(big_h);
    let slack = 1e-12 * h_l2.max(f64::MIN_POSITIVE);
    let envelope_ok = mesh.nodes().iter().zip(&values).all(|(&x, v)| v.abs() <= h_l2 * x.max(0.0).sqrt() + slack);
    let l2_ok = mesh.norm_right(&values) <= b * h_l2 + slack;
    Ok(DuhamelSolution { values, h_l2, envelope_ok, l2_ok })
}
