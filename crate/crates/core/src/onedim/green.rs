use super::{sq_norm, trig_c, trig_s, Mesh1d, ModeProblem, Rhs};
use crate::error::{param, Error, Result};
use crate::geometry::BilliardProfile;
use std::f64::consts::PI;

/// Homogeneous solution on `(-B0, b) \ {0}` vanishing at both ends and continuous at `0`.
#[derive(Clone, Copy, Debug)]
pub struct Green {
    pub z: f64,
    pub b0: f64,
    pub b: f64,
}

pub fn green_g(z: f64, b0: f64, b: f64) -> Result<Green> {
    if !(b0 > 0.0 && b > 0.0) {
        return param(format!("need B0 > 0 and b > 0, got B0 = {b0}, b = {b}"));
    }
    if z > 0.0 && z.sqrt() * b >= PI {
        return Err(Error::Regime(format!("sqrt(z) b = {} reaches pi", z.sqrt() * b)));
    }
    Ok(Green { z, b0, b })
}

impl Green {
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            trig_s(self.z, x + self.b0) * trig_s(self.z, self.b)
        } else {
            trig_s(self.z, self.b - x) * trig_s(self.z, self.b0)
        }
    }

    /// `G'` from the left branch (valid for `x ≤ 0`).
    pub fn slope_left(&self, x: f64) -> f64 {
        trig_c(self.z, x + self.b0) * trig_s(self.z, self.b)
    }

    /// `G'` from the right branch (valid for `x ≥ 0`).
    pub fn slope_right(&self, x: f64) -> f64 {
        -trig_c(self.z, self.b - x) * trig_s(self.z, self.b0)
    }

    /// `G'(0+) - G'(0-)`; equals `-S_z(B0 + b)`.
    pub fn jump(&self) -> f64 {
        self.slope_right(0.0) - self.slope_left(0.0)
    }

    pub fn sample(&self, mesh: &Mesh1d) -> Vec<f64> {
        mesh.sample(|x| self.eval(x))
    }

    /// `G` as a mode problem: the kink at `0` is a point mass, i.e. `H = S_z(B0 + b)` on `[0, b]`.
    pub fn as_problem(&self, mesh: Mesh1d) -> Result<(ModeProblem, Vec<f64>)> {
        let mass = trig_s(self.z, self.b0 + self.b);
        let big_h = mesh.sample(|x| if x >= 0.0 { mass } else { 0.0 });
        let u = self.sample(&mesh);
        Ok((ModeProblem::new(self.z, Rhs::Antiderivative(big_h), mesh)?, u))
    }
}

/// `b^{1/2} ‖G‖_{L²(-B0,0)} / ‖G‖_{L²(0,b)}`.
pub fn green_ratio(z: f64, b0: f64, b: f64, density: f64) -> Result<f64> {
    let g = green_g(z, b0, b)?;
    let mesh = Mesh1d::for_problem(b0, b, z, density)?;
    let u = g.sample(&mesh);
    Ok(b.sqrt() * mesh.norm_left(&u) / mesh.norm_right(&u))
}

/// `F(X) = ∫_0^X sinh² / sinh²(X)`.
pub fn sinh_ratio_f(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x < 0.5 {
        // sinh(2X)/2 - X = Σ_{n≥1} (2X)^{2n+1} / (2 (2n+1)!)
        let y = 2.0 * x;
        let (mut term, mut sum, mut n) = (y * y * y / 12.0, 0.0f64, 1.0);
        while term > 1e-18 * sum.max(f64::MIN_POSITIVE) {
            sum += term;
            term *= y * y / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
            n += 1.0;
        }
        return sum / (2.0 * x.sinh().powi(2));
    }
    if x <= 20.0 {
        return ((2.0 * x).sinh() / 2.0 - x) / (2.0 * x.sinh().powi(2));
    }
    let q = (-2.0 * x).exp();
    ((1.0 - q * q) / 4.0 - x * q) / ((1.0 - q) * (1.0 - q) / 2.0)
}

/// Both sides of `b ∫_{-B0}^b w² ≤ (B0 + b0) ∫_0^b w²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convexity {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `(rhs - lhs) / rhs`.
    pub margin: f64,
}

/// Checks the convexity inequality for samples `w` on `mesh`, with cap `b_cap ≥ b`.
pub fn convexity_samples(mesh: &Mesh1d, w: &[f64], b_cap: f64) -> Result<Convexity> {
    if w.len() != mesh.len() {
        return param(format!("{} samples on {} nodes", w.len(), mesh.len()));
    }
    let b = mesh.b();
    if b > b_cap {
        return param(format!("b = {b} exceeds b0 = {b_cap}"));
    }
    let peak = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if w[0].abs() > 1e-12 * peak {
        return Err(Error::Precondition(format!("w(-B0) = {} is not zero", w[0])));
    }
    let right = mesh.norm_right(w).powi(2);
    let lhs = b * sq_norm(mesh.nodes(), w);
    let rhs = (mesh.b0() + b_cap) * right;
    Ok(Convexity { lhs, rhs, holds: lhs <= rhs, margin: (rhs - lhs) / rhs })
}

/// Convexity inequality for `w = sinh(ω(x + B0))` (and `x + B0` at `ω = 0`).
pub fn convexity_check(omega: f64, b0: f64, b: f64, b_cap: f64) -> Result<Convexity> {
    if !(omega >= 0.0) {
        return param(format!("omega must be non-negative, got {omega}"));
    }
    let mesh = Mesh1d::new(b0, b, 256f64.max(8.0 * omega))?;
    let w = mesh.sample(|x| {
        if omega * (b0 + b) < 1e-8 {
            (x + b0) / (b0 + b)
        } else {
            // sinh(ω(x+B0)) / sinh(ω(B0+b)) without overflow
            (omega * (x - b)).exp() * (-(-2.0 * omega * (x + b0)).exp_m1()) / (-(-2.0 * omega * (b0 + b)).exp_m1())
        }
    });
    convexity_samples(&mesh, &w, b_cap)
}

/// `-w'' + (k²π²/L(x)² - E) w = 0` on `(-B0, b)` with `w(-B0) = 0`, by RK4 on a mesh.
/// Requires the large-mode regime `k²π²/L0² - E ≥ E`. Returned samples are rescaled freely.
pub fn mode_solution(profile: &BilliardProfile, k: usize, energy: f64, b: f64) -> Result<(Mesh1d, Vec<f64>)> {
    let kpi2 = (k as f64 * PI).powi(2);
    if kpi2 / (profile.l0 * profile.l0) - energy < energy {
        return Err(Error::Regime(format!("k = {k} is not a large mode at E = {energy}")));
    }
    if b > profile.b1 {
        return param(format!("b = {b} exceeds the wing length {}", profile.b1));
    }
    let potential = |x: f64| kpi2 / profile.width(x).powi(2) - energy;
    let vmax = potential(b);
    let mesh = Mesh1d::new(profile.b0, b, 256f64.max(16.0 * vmax.sqrt()))?;
    let x = mesh.nodes();
    let mut w = vec![0.0; x.len()];
    let (mut y, mut dy) = (0.0, 1.0);
    for i in 1..x.len() {
        let (a, h) = (x[i - 1], x[i] - x[i - 1]);
        let f = |t: f64, y: f64| potential(t) * y;
        let (k1y, k1d) = (dy, f(a, y));
        let (k2y, k2d) = (dy + 0.5 * h * k1d, f(a + 0.5 * h, y + 0.5 * h * k1y));
        let (k3y, k3d) = (dy + 0.5 * h * k2d, f(a + 0.5 * h, y + 0.5 * h * k2y));
        let (k4y, k4d) = (dy + h * k3d, f(a + h, y + h * k3y));
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        w[i] = y;
        if y.abs() > 1e200 {
            for v in &mut w[..=i] {
                *v *= 1e-200;
            }
            y *= 1e-200;
            dy *= 1e-200;
        }
    }
    Ok((mesh, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_values_and_continuity() {
        let g = green_g(4.0, 1.0, 0.2).unwrap();
        let expected = (1f64.sin() / 2.0) * (0.4f64.sin() / 2.0);
        assert!((g.eval(-0.5) - expected).abs() < 1e-15);
        assert!((expected - 0.081926).abs() < 5e-6);
        let g = green_g(1.0, PI / 2.0, 1.0).unwrap();
        assert!((g.eval(-1e-300) - 1f64.sin()).abs() < 1e-14 && (g.eval(0.0) - 1f64.sin()).abs() < 1e-14);
        assert!((g.eval(-PI / 2.0)).abs() < 1e-15 && g.eval(1.0).abs() < 1e-15);
        assert!(matches!(green_g(100.0, 1.0, 0.4), Err(Error::Regime(_))));
    }

    #[test]
    fn green_solves_the_homogeneous_equation() {
        for (z, b) in [(-25.0, 0.1), (-1.0, 0.2), (1.2, 0.05), (50.0, 0.2), (900.0, 0.1)] {
            let g = green_g(z, 1.0, b).unwrap();
            let h = 1e-3;
            let sup = (0..=1200).map(|i| g.eval(-1.0 + i as f64 * 1e-3).abs()).fold(0.0, f64::max);
            for i in 1..1000 {
                let x = -1.0 + (i as f64) * (1.0 + b) / 1000.0;
                if x.abs() < 2.0 * h || x + h > b {
                    continue;
                }
                let d2 = (g.eval(x + h) - 2.0 * g.eval(x) + g.eval(x - h)) / (h * h);
                // centered differences are O(h²) accurate: z² h²/12 relative
                let tol = 1e-6f64.max(z * z * h * h / 6.0) * sup;
                assert!((-d2 - z * g.eval(x)).abs() <= tol, "z={z} x={x}");
            }
            let delta = 1e-5;
            let right = (-3.0 * g.eval(0.0) + 4.0 * g.eval(delta) - g.eval(2.0 * delta)) / (2.0 * delta);
            let left = (3.0 * g.eval(0.0) - 4.0 * g.eval(-delta) + g.eval(-2.0 * delta)) / (2.0 * delta);
            let want = -trig_s(z, 1.0 + b);
            assert!(((right - left) - want).abs() <= 1e-6 * want.abs(), "{} {}", right - left, want);
            assert!((g.jump() - want).abs() <= 1e-12 * want.abs());
        }
    }

    #[test]
    fn sinh_ratio_limits() {
        let f = sinh_ratio_f(0.01) / 0.01;
        assert!((0.333..=0.334).contains(&f), "{f}");
        assert!((sinh_ratio_f(1.0) - 0.29448).abs() < 1e-5);
        // branches meet continuously
        for x in [0.5, 20.0] {
            assert!((sinh_ratio_f(x * (1.0 - 1e-12)) - sinh_ratio_f(x * (1.0 + 1e-12))).abs() < 1e-10);
        }
        // the ratio saturates at 1/2
        assert!((sinh_ratio_f(30.0) - 0.5).abs() < 1e-12);
        assert!((sinh_ratio_f(800.0) - 0.5).abs() < 1e-12);
        assert!(sinh_ratio_f(0.0).is_nan());
    }

    #[test]
    fn green_ratio_matches_the_sinh_formula() {
        let (omega, b0, b): (f64, f64, f64) = (5.0, 1.0, 0.1);
        let oracle = b.sqrt() * (sinh_ratio_f(omega * b0) / sinh_ratio_f(omega * b)).sqrt();
        let r = green_ratio(-omega * omega, b0, b, 4096.0).unwrap();
        assert!((r - oracle).abs() < 1e-5 * oracle, "{r} {oracle}");
    }

    fn sinh_integral(omega: f64, a: f64) -> f64 {
        ((2.0 * omega * a).sinh() / (2.0 * omega) - a) / 2.0
    }

    #[test]
    fn convexity_closed_forms() {
        let (omega, b0, b) = (5.0, 1.0, 0.2);
        let c = convexity_check(omega, b0, b, b).unwrap();
        let scale = (omega * (b0 + b)).sinh().powi(2);
        let lhs = b * sinh_integral(omega, b0 + b) / scale;
        let rhs = (b0 + b) * (sinh_integral(omega, b0 + b) - sinh_integral(omega, b0)) / scale;
        assert!(c.holds && c.margin > 0.0);
        assert!((c.lhs - lhs).abs() < 1e-4 * lhs && (c.rhs - rhs).abs() < 1e-4 * rhs);

        let c = convexity_check(0.0, b0, b, b).unwrap();
        let n = (b0 + b).powi(2);
        let lhs = b * (b0 + b).powi(3) / 3.0 / n;
        let rhs = (b0 + b) * ((b0 + b).powi(3) - b0.powi(3)) / 3.0 / n;
        assert!(c.holds && (c.lhs - lhs).abs() < 1e-5 * lhs && (c.rhs - rhs).abs() < 1e-5 * rhs);

        let mesh = Mesh1d::new(1.0, 0.1, 64.0).unwrap();
        let w = mesh.sample(|x| x + 2.0);
        assert!(matches!(convexity_samples(&mesh, &w, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn convexity_for_variable_width() {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 1.0, 0.9).unwrap();
        for energy in [50.0f64, 400.0] {
            let kmin = ((2.0 * energy).sqrt() / PI).ceil() as usize;
            for k in [kmin, kmin + 3] {
                for b in [0.05, 0.1, 0.2] {
                    let (mesh, w) = mode_solution(&p, k, energy, b).unwrap();
                    let c = convexity_samples(&mesh, &w, 0.2).unwrap();
                    assert!(c.holds, "k={k} E={energy} b={b} {c:?}");
                }
            }
        }
        assert!(matches!(mode_solution(&p, 1, 50.0, 0.1), Err(Error::Regime(_))));
    }
}
