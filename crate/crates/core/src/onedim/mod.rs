//! One-dimensional model problems `-u'' - z u = h` on `(-B0, b)`.
//!
//! Sampled functions live on a [`Mesh1d`] with a node at `0`. A right-hand
//! side vanishes on `(-B0, 0)`; its nodal value at `0` is the right limit, so
//! an antiderivative `H` may jump there (a point mass in `h`).

mod control;
mod green;
mod hminus1;
mod particular;
mod suite;

pub use control::{
    cutoff, cutoff_commutator, manufactured, verify_control, Commutator, ControlReport, Manufactured, Regime,
};
pub use green::{
    convexity_check, convexity_samples, green_g, green_ratio, mode_solution, sinh_ratio_f, Convexity, Green,
};
pub use hminus1::{hminus1_norm, HMinus1, RhsRef};
pub use particular::{vp_duhamel, vp_fourier, DuhamelSolution, FourierSolution};
pub use suite::{run_suite, OnedimConfig, OnedimSuite, SweepRow};

use crate::error::{param, Error, Result};

/// `sin(√z s)/√z`, continued through `sinh` for `z < 0`; equals `s` at `z = 0`.
pub fn trig_s(z: f64, s: f64) -> f64 {
    if z > 0.0 {
        let l = z.sqrt();
        (l * s).sin() / l
    } else if z < 0.0 {
        let w = (-z).sqrt();
        (w * s).sinh() / w
    } else {
        s
    }
}

/// `cos(√z s)`, or `cosh(√-z s)` for `z < 0`.
pub fn trig_c(z: f64, s: f64) -> f64 {
    if z > 0.0 {
        (z.sqrt() * s).cos()
    } else if z < 0.0 {
        ((-z).sqrt() * s).cosh()
    } else {
        1.0
    }
}

/// Piecewise uniform mesh on `[-B0, b]`: one spacing left of `0`, another on `[0, b]`.
#[derive(Clone, Debug)]
pub struct Mesh1d {
    nodes: Vec<f64>,
    zero: usize,
}

impl Mesh1d {
    /// `density` is the number of cells per unit length; `(0, b)` always gets at least 32.
    pub fn new(b0: f64, b: f64, density: f64) -> Result<Self> {
        if !(b0 > 0.0 && b > 0.0) {
            return param(format!("need B0 > 0 and b > 0, got B0 = {b0}, b = {b}"));
        }
        if !(density >= 64.0) || !density.is_finite() {
            return param(format!("mesh density {density} is below 64 nodes per unit length"));
        }
        let left = (density * b0).ceil() as usize;
        let right = ((density * b).ceil() as usize).max(32);
        let mut nodes: Vec<f64> = (0..left).map(|i| -b0 + b0 * i as f64 / left as f64).collect();
        nodes.extend((0..right).map(|i| b * i as f64 / right as f64));
        nodes.push(b);
        Ok(Self { nodes, zero: left })
    }

    /// Mesh fine enough for oscillations of frequency `√|z|`.
    pub fn for_problem(b0: f64, b: f64, z: f64, density: f64) -> Result<Self> {
        Self::new(b0, b, density.max(4.0 * z.abs().sqrt()))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node at `x = 0`.
    pub fn zero(&self) -> usize {
        self.zero
    }

    pub fn b0(&self) -> f64 {
        -self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Nodes of `[0, b]`.
    pub fn right(&self) -> &[f64] {
        &self.nodes[self.zero..]
    }

    /// `‖u‖_{L²(-B0,0)}` of the piecewise linear interpolant.
    pub fn norm_left(&self, u: &[f64]) -> f64 {
        sq_norm(&self.nodes[..=self.zero], &u[..=self.zero]).sqrt()
    }

    /// `‖u‖_{L²(0,b)}` of the piecewise linear interpolant.
    pub fn norm_right(&self, u: &[f64]) -> f64 {
        sq_norm(self.right(), &u[self.zero..]).sqrt()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// `∫ u²` for the piecewise linear interpolant of nodal values.
pub(crate) fn sq_norm(x: &[f64], u: &[f64]) -> f64 {
    x.windows(2).zip(u.windows(2)).map(|(x, u)| (x[1] - x[0]) * (u[0] * u[0] + u[0] * u[1] + u[1] * u[1]) / 3.0).sum()
}

/// Right-hand side of a mode problem, nodal on the full mesh.
#[derive(Clone, Debug)]
pub enum Rhs {
    /// `h` itself, piecewise linear on `[0, b]`.
    Density(Vec<f64>),
    /// An antiderivative `H` with `H' = h`, piecewise linear on `[0, b]`.
    Antiderivative(Vec<f64>),
}

impl Rhs {
    pub fn as_ref(&self) -> RhsRef<'_> {
        match self {
            Rhs::Density(v) => RhsRef::Density(v),
            Rhs::Antiderivative(v) => RhsRef::Antiderivative(v),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Rhs::Density(v) | Rhs::Antiderivative(v) => v,
        }
    }
}

/// `-u'' - z u = h` on `(-B0, b)` with `h` supported in `[0, b]`.
#[derive(Clone, Debug)]
pub struct ModeProblem {
    pub z: f64,
    pub rhs: Rhs,
    pub mesh: Mesh1d,
}

impl ModeProblem {
    pub fn new(z: f64, rhs: Rhs, mesh: Mesh1d) -> Result<Self> {
        if !z.is_finite() {
            return param("z must be finite");
        }
        let v = rhs.values();
        if v.len() != mesh.len() {
            return param(format!("right-hand side has {} samples, mesh has {} nodes", v.len(), mesh.len()));
        }
        if let Some(i) = v[..mesh.zero()].iter().position(|&x| x != 0.0) {
            return Err(Error::Precondition(format!("right-hand side is nonzero at x = {} < 0", mesh.nodes()[i])));
        }
        Ok(Self { z, rhs, mesh })
    }

    pub fn b0(&self) -> f64 {
        self.mesh.b0()
    }

    pub fn b(&self) -> f64 {
        self.mesh.b()
    }

    /// `‖h‖_{H⁻¹(-B0,b)}`.
    pub fn h_norm(&self) -> HMinus1 {
        hminus1::from_cell(self.mesh.nodes(), self.rhs.as_ref(), self.mesh.zero())
    }

    /// Duhamel particular solution started at `0`; vanishes on `(-B0, 0)`.
    pub fn particular(&self) -> Vec<f64> {
        particular::duhamel(&self.mesh, self.z, self.rhs.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_branches_agree_near_zero() {
        for s in [0.0, 0.3, 1.7] {
            assert!((trig_s(1e-14, s) - s).abs() < 1e-12);
            assert!((trig_s(-1e-14, s) - s).abs() < 1e-12);
            assert!((trig_c(1e-14, s) - 1.0).abs() < 1e-12);
        }
        assert!((trig_s(-4.0, 1.0) - 2f64.sinh() / 2.0).abs() < 1e-15);
        assert!((trig_s(4.0, 1.0) - 2f64.sin() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn mesh_layout() {
        let m = Mesh1d::new(1.0, 0.05, 64.0).unwrap();
        assert_eq!(m.zero(), 64);
        assert_eq!(m.len(), 64 + 33);
        assert_eq!(m.nodes()[m.zero()], 0.0);
        assert!((m.b() - 0.05).abs() < 1e-15 && (m.b0() - 1.0).abs() < 1e-15);
        assert!(Mesh1d::new(1.0, 0.1, 32.0).is_err());
        let u = m.sample(|x| x);
        assert!((m.norm_left(&u).powi(2) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rhs_must_vanish_on_the_left() {
        let m = Mesh1d::new(1.0, 0.1, 64.0).unwrap();
        let h = m.sample(|_| 1.0);
        assert!(matches!(ModeProblem::new(1.0, Rhs::Density(h), m.clone()), Err(Error::Precondition(_))));
        let h = m.sample(|x| if x >= 0.0 { 1.0 } else { 0.0 });
        assert!(ModeProblem::new(1.0, Rhs::Antiderivative(h), m).is_ok());
    }
}
