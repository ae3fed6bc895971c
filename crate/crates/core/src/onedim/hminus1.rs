use crate::error::{param, Result};

/// Nodal right-hand side, piecewise linear between nodes.
#[derive(Clone, Copy, Debug)]
pub enum RhsRef<'a> {
    Density(&'a [f64]),
    Antiderivative(&'a [f64]),
}

/// `‖h‖_{H⁻¹} = sup |h(φ)| / ‖φ'‖`, plus `‖H‖_{L²}` when `h` came as an antiderivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HMinus1 {
    pub norm: f64,
    pub antiderivative_l2: Option<f64>,
}

impl HMinus1 {
    /// `‖H‖ ≥ (1 + b^{1/2})⁻¹ ‖h‖_{H⁻¹}`; `None` without an antiderivative.
    pub fn comparison_holds(&self, b: f64) -> Option<bool> {
        self.antiderivative_l2.map(|h| h * (1.0 + b.sqrt()) >= self.norm * (1.0 - 1e-12))
    }
}

/// H⁻¹ norm on the interval spanned by `nodes`, computed as `‖w'‖` where
/// `-w'' = h` with Dirichlet conditions at both ends (P1 elements).
pub fn hminus1_norm(nodes: &[f64], rhs: RhsRef<'_>) -> Result<HMinus1> {
    let n = match rhs {
        RhsRef::Density(v) | RhsRef::Antiderivative(v) => v.len(),
    };
    if n != nodes.len() {
        return param(format!("{n} samples on {} nodes", nodes.len()));
    }
    if n < 3 {
        return param("need at least one interior node");
    }
    Ok(from_cell(nodes, rhs, 0))
}

/// Cells left of `first` count as zero, so the value at node `first` acts as a right limit.
pub(crate) fn from_cell(nodes: &[f64], rhs: RhsRef<'_>, first: usize) -> HMinus1 {
    let n = nodes.len();
    let mut load = vec![0.0; n];
    let mut h_sq = 0.0;
    for c in first..n - 1 {
        let dx = nodes[c + 1] - nodes[c];
        match rhs {
            RhsRef::Density(v) => {
                load[c] += dx * (2.0 * v[c] + v[c + 1]) / 6.0;
                load[c + 1] += dx * (v[c] + 2.0 * v[c + 1]) / 6.0;
            }
            RhsRef::Antiderivative(v) => {
                // h(φ) = -∫ H φ'
                let mean = 0.5 * (v[c] + v[c + 1]);
                load[c] += mean;
                load[c + 1] -= mean;
                h_sq += dx * (v[c] * v[c] + v[c] * v[c + 1] + v[c + 1] * v[c + 1]) / 3.0;
            }
        }
    }
    let m = n - 2;
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m.saturating_sub(1)];
    for i in 0..m {
        let (l, r) = (nodes[i + 1] - nodes[i], nodes[i + 2] - nodes[i + 1]);
        diag[i] = 1.0 / l + 1.0 / r;
        if i + 1 < m {
            off[i] = -1.0 / r;
        }
    }
    let f = &load[1..n - 1];
    let w = solve_tridiagonal(&off, &diag, f);
    let energy: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
    HMinus1 {
        norm: energy.max(0.0).sqrt(),
        antiderivative_l2: matches!(rhs, RhsRef::Antiderivative(_)).then(|| h_sq.sqrt()),
    }
}

/// Symmetric tridiagonal solve (Thomas algorithm); `off[i]` couples rows `i` and `i + 1`.
fn solve_tridiagonal(off: &[f64], diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for i in 0..m {
        let sub = if i > 0 { off[i - 1] } else { 0.0 };
        let denom = diag[i] - if i > 0 { sub * c[i - 1] } else { 0.0 };
        c[i] = if i + 1 < m { off[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { sub * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..m.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}
