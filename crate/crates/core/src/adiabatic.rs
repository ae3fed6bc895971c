//! Adiabatic mode analysis of a discrete eigenfunction.
//!
//! On the straightened grid the transverse basis `sin(k pi y / L(x))` becomes
//! `sin(k pi t)`, and the discrete sine vectors `sin(k pi t_j)` diagonalize
//! both the 1D linear-element mass and stiffness matrices in `t`. Mode
//! coefficients are therefore taken by the discrete sine transform on the
//! t-nodes, and mode sums use the matching discrete symbols, which makes them
//! agree with the assembled quadratic forms to rounding error.

use std::f64::consts::PI;

use serde::Serialize;

use crate::discretize::grid::{Region, Snapped, TensorGrid, GAUSS, GAUSS_W};
use crate::discretize::{AssembledForms, EigenPair};
use crate::error::{param, Error, Result};
use crate::export::{fmt15, CsvTable};

/// Smallest `k` with `k² pi² / L0² - E >= E`; equality counts as large.
pub fn k_star(energy: f64, l0: f64) -> usize {
    let large = |k: usize| (k * k) as f64 * PI * PI / (l0 * l0) >= 2.0 * energy;
    let mut k = ((l0 * (2.0 * energy).sqrt() / PI).ceil() as usize).max(1);
    while k > 1 && large(k - 1) {
        k -= 1;
    }
    while !large(k) {
        k += 1;
    }
    k
}

/// Transverse symbols of mode `k` for the linear elements in `t`:
/// `(mass, stiffness)` of the vector `sin(k pi t_j)` scaled by the sine
/// transform normalization. They tend to `(1/2, k² pi² / 2)` as `ht -> 0`.
pub fn discrete_symbols(k: usize, nt: usize) -> (f64, f64) {
    let ht = 1.0 / nt as f64;
    let c = (k as f64 * PI * ht).cos();
    let half = nt as f64 / 2.0;
    (half * ht / 3.0 * (2.0 + c), half * 2.0 / ht * (1.0 - c))
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeDecomposition {
    pub index: usize,
    pub energy: f64,
    pub kmax: usize,
    pub k_star: usize,
    /// `modes[k - 1][i]` is `u_k(s_i)`.
    pub modes: Vec<Vec<f64>>,
    /// `N`-norm of the modes `k > kmax` resolved by the grid.
    pub tail_mass: f64,
    /// `N`-norm of the whole field.
    pub total_mass: f64,
}

impl ModeDecomposition {
    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k - 1]
    }

    pub fn is_large(&self, k: usize) -> bool {
        k >= self.k_star
    }

    /// Long-format table `s, k, value`.
    pub fn to_csv(&self, grid: &TensorGrid) -> String {
        let mut t = CsvTable::new(&["s", "k", "value"]);
        for (k, m) in self.modes.iter().enumerate() {
            for (s, v) in grid.s_nodes().iter().zip(m) {
                t.push_row(&[fmt15(*s), (k + 1).to_string(), fmt15(*v)]);
            }
        }
        t.render()
    }
}

fn sine_table(kmax: usize, nt: usize) -> Vec<Vec<f64>> {
    (1..=kmax).map(|k| (0..=nt).map(|j| (k as f64 * PI * j as f64 / nt as f64).sin()).collect()).collect()
}

/// `u_k(s_i) = 2 ∫ U(s_i, t) sin(k pi t) dt` (trapezoid on the t-nodes) for every s-node.
fn transform(grid: &TensorGrid, full: &[f64], table: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ns, nt) = (grid.ns(), grid.nt());
    let ht = grid.ht();
    table
        .iter()
        .map(|sk| {
            (0..=ns)
                .map(|i| {
                    let row = &full[grid.node(i, 0)..=grid.node(i, nt)];
                    2.0 * ht * row.iter().zip(sk).map(|(u, s)| u * s).sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// `∫ L u_k² ds` over the cells of `region`, with the assembly's s-quadrature
/// and linear interpolation of the nodal coefficients.
fn mode_integrals(grid: &TensorGrid, coef: &[f64], cells: std::ops::Range<usize>) -> (f64, f64, f64) {
    // (∫ L c², ∫ L c'², ∫ c² / L)
    let (mut m, mut d, mut p) = (0.0, 0.0, 0.0);
    let s = grid.s_nodes();
    for i in cells {
        let hs = grid.hs(i);
        let slope = (coef[i + 1] - coef[i]) / hs;
        for (g, w) in GAUSS.iter().zip(GAUSS_W) {
            let l = grid.profile().width(s[i] + g * hs);
            let c = coef[i] * (1.0 - g) + coef[i + 1] * g;
            m += w * hs * l * c * c;
            d += w * hs * l * slope * slope;
            p += w * hs * c * c / l;
        }
    }
    (m, d, p)
}

/// Sine-mode coefficients of an eigenvector, `kmax` defaults to `k* + 20`.
pub fn decompose(grid: &TensorGrid, pair: &EigenPair, kmax: Option<usize>) -> Result<ModeDecomposition> {
    let ks = k_star(pair.energy, grid.profile().l0);
    let nt = grid.nt();
    let kmax = kmax.unwrap_or(ks + 20);
    if kmax < ks + 5 {
        return param(format!("kmax = {kmax} is too small; need at least k* + 5 = {}", ks + 5));
    }
    if kmax > nt - 1 {
        return param(format!("kmax = {kmax} exceeds the {} transverse modes resolved by nt = {nt}", nt - 1));
    }
    let full = grid.expand(&pair.vector);
    let all = transform(grid, &full, &sine_table(nt - 1, nt));
    let mut total = 0.0;
    let mut tail = 0.0;
    for (k0, coef) in all.iter().enumerate() {
        let (mk, _) = discrete_symbols(k0 + 1, nt);
        let mass = mk * mode_integrals(grid, coef, 0..grid.ns()).0;
        total += mass;
        if k0 >= kmax {
            tail += mass;
        }
    }
    let mut modes = all;
    modes.truncate(kmax);
    Ok(ModeDecomposition {
        index: pair.index,
        energy: pair.energy,
        kmax,
        k_star: ks,
        modes,
        tail_mass: tail,
        total_mass: total,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FormValues {
    pub b: f64,
    pub b_node: usize,
    pub q_b: f64,
    pub a_b_matrix: f64,
    pub a_b_modes: f64,
    pub n_b_matrix: f64,
    pub n_b_modes: f64,
    /// Mode sums with the continuum symbols `1/2` and `k² pi² / 2` (informational).
    pub a_b_continuum: f64,
    pub n_b_continuum: f64,
}

impl FormValues {
    pub fn a_gap(&self) -> f64 {
        (self.a_b_modes - self.a_b_matrix).abs() / self.a_b_matrix.abs()
    }
    pub fn n_gap(&self) -> f64 {
        (self.n_b_modes - self.n_b_matrix).abs() / self.n_b_matrix.abs()
    }
}

/// `q_b`, `a_b`, `N_b` by cell quadrature and by mode sums over `k <= kmax`.
pub fn form_values(grid: &TensorGrid, pair: &EigenPair, decomp: &ModeDecomposition, b: Snapped) -> FormValues {
    let full = grid.expand(&pair.vector);
    let sums = grid.quadratic(&full, Region::Below(b.node));
    let nt = grid.nt();
    let (mut a, mut n, mut ac, mut nc) = (0.0, 0.0, 0.0, 0.0);
    for (k0, coef) in decomp.modes.iter().enumerate() {
        let k = k0 + 1;
        let (mk, sk) = discrete_symbols(k, nt);
        let (m, d, p) = mode_integrals(grid, coef, 0..b.node);
        a += mk * d + sk * p;
        n += mk * m;
        let kk = (k * k) as f64 * PI * PI;
        ac += 0.5 * d + 0.5 * kk * p;
        nc += 0.5 * m;
    }
    FormValues {
        b: b.value,
        b_node: b.node,
        q_b: sums.q,
        a_b_matrix: sums.a,
        a_b_modes: a,
        n_b_matrix: sums.mass,
        n_b_modes: n,
        a_b_continuum: ac,
        n_b_continuum: nc,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapCheck {
    /// `a_b(u, v) - q_b(u, v)`.
    pub lambda: f64,
    /// `delta(b) sqrt(q_b(u) q_b(v))`.
    pub bound: f64,
    pub delta: f64,
    /// `a_b(u, v) - E N_b(u, v) - lambda`, which vanishes for exact eigenpairs.
    pub quasi_defect: f64,
    /// Cauchy–Schwarz bound `|v| |K_q u - E M u|` on the defect.
    pub quasi_allowance: f64,
}

impl GapCheck {
    pub fn within_bound(&self) -> bool {
        self.lambda.abs() <= self.bound * (1.0 + 1e-12) + 1e-300
    }
    pub fn identity_holds(&self) -> bool {
        self.quasi_defect.abs() <= self.quasi_allowance * (1.0 + 1e-6) + 1e-13 * self.bound.max(self.lambda.abs())
    }
}

/// The functional `v -> a_b(u, v) - q_b(u, v)` for an interior test vector
/// supported in `s < b`.
pub fn gap_functional(forms: &AssembledForms, pair: &EigenPair, v: &[f64], b: Snapped) -> Result<GapCheck> {
    GapProbe::new(forms, pair, b)?.check(v)
}

/// Everything in [`gap_functional`] that depends on `u` only, so that many test
/// vectors cost one pass each.
pub struct GapProbe<'a> {
    forms: &'a AssembledForms,
    b: Snapped,
    energy: f64,
    ka_u: Vec<f64>,
    kq_u: Vec<f64>,
    m_u: Vec<f64>,
    q_u: f64,
    delta: f64,
    residual: f64,
}

impl<'a> GapProbe<'a> {
    pub fn new(forms: &'a AssembledForms, pair: &EigenPair, b: Snapped) -> Result<Self> {
        let grid = &forms.grid;
        let u = &pair.vector;
        let ka_u = forms.ka.apply(u);
        let kq_u = forms.kq.apply(u);
        let m_u = forms.mass.apply(u);
        let residual = kq_u.iter().zip(&m_u).map(|(k, m)| (k - pair.energy * m).powi(2)).sum::<f64>().sqrt();
        let q_u = grid.quadratic(&grid.expand(u), Region::Below(b.node)).q;
        let delta = grid.profile().delta_b(b.value)?;
        Ok(GapProbe { forms, b, energy: pair.energy, ka_u, kq_u, m_u, q_u, delta, residual })
    }

    pub fn check(&self, v: &[f64]) -> Result<GapCheck> {
        let grid = &self.forms.grid;
        if v.len() != self.ka_u.len() {
            return param(format!("test field has {} entries, expected {}", v.len(), self.ka_u.len()));
        }
        let nt = grid.nt();
        for i in self.b.node..grid.ns() {
            for j in 1..nt {
                if let Some(d) = grid.dof(i, j) {
                    if v[d] != 0.0 {
                        return param(format!(
                            "test field is nonzero at s = {} beyond b = {}",
                            grid.s_nodes()[i],
                            self.b.value
                        ));
                    }
                }
            }
        }
        let dot = |a: &[f64]| a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let a_uv = dot(&self.ka_u);
        let lambda = a_uv - dot(&self.kq_u);
        let n_uv = dot(&self.m_u);
        let q_v = grid.quadratic(&grid.expand(v), Region::Below(self.b.node)).q;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(GapCheck {
            lambda,
            bound: self.delta * (self.q_u * q_v).sqrt(),
            delta: self.delta,
            quasi_defect: a_uv - self.energy * n_uv - lambda,
            quasi_allowance: vn * self.residual,
        })
    }
}

/// Nodal `U_s`, `U_t` by centered differences (one-sided on the boundary).
pub fn nodal_derivatives(grid: &TensorGrid, full: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (ns, nt) = (grid.ns(), grid.nt());
    let s = grid.s_nodes();
    let ht = grid.ht();
    let mut us = vec![0.0; full.len()];
    let mut ut = vec![0.0; full.len()];
    for i in 0..=ns {
        let (il, ir) = (i.saturating_sub(1), (i + 1).min(ns));
        for j in 0..=nt {
            let (jl, jr) = (j.saturating_sub(1), (j + 1).min(nt));
            let n = grid.node(i, j);
            us[n] = (full[grid.node(ir, j)] - full[grid.node(il, j)]) / (s[ir] - s[il]);
            ut[n] = (full[grid.node(i, jr)] - full[grid.node(i, jl)]) / ((jr - jl) as f64 * ht);
        }
    }
    (us, ut)
}

/// Wing functionals sampled on the s-nodes of `[0, b]`.
#[derive(Clone, Debug, Serialize)]
pub struct FgData {
    pub b: f64,
    pub s: Vec<f64>,
    /// `f[k - 1][i] = F_k(s_i)`.
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    /// `∫∫_{W_b} |∂x u|²` and `∫∫_{W_b} |∂y u|²` with the nodal rule.
    pub dx_norm2: f64,
    pub dy_norm2: f64,
    /// `sum_k |F_k|² / |∂x u|²_{W_b}` and the `G` analogue.
    pub c_f: f64,
    pub c_g: f64,
    /// Same ratios with the `L/2` weight of the Plancherel identity.
    pub c_f_weighted: f64,
    pub c_g_weighted: f64,
    /// `sum_k ∫ G_k² L/2 / ∫∫ |y ∂y u|²`; equals 1 when all modes are kept.
    pub g_plancherel: f64,
}

impl FgData {
    pub fn f_norm(&self, k: usize) -> f64 {
        trapezoid(&self.s, &self.f[k - 1].iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
    }
    pub fn g_norm(&self, k: usize) -> f64 {
        trapezoid(&self.s, &self.g[k - 1].iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
    }

    /// Long-format table `s, k, F_k, G_k`.
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["s", "k", "F_k", "G_k"]);
        for k in 0..self.f.len() {
            for (i, s) in self.s.iter().enumerate() {
                t.push_row(&[fmt15(*s), (k + 1).to_string(), fmt15(self.f[k][i]), fmt15(self.g[k][i])]);
            }
        }
        t.render()
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// `F_k(s) = 2 L ∫ t (U_s - t (L'/L) U_t) cos(k pi t) dt` and
/// `G_k(s) = 2 ∫ t U_t sin(k pi t) dt` on `0 <= s <= b`, `k = 1..=kmax`.
pub fn compute_fg(grid: &TensorGrid, pair: &EigenPair, b: Snapped, kmax: usize) -> Result<FgData> {
    let (nt, j0) = (grid.nt(), grid.junction());
    if b.node <= j0 {
        return Err(Error::EmptyRegion(format!("wing (0, {}] has no cells", b.value)));
    }
    if kmax == 0 || kmax > nt - 1 {
        return param(format!("kmax must lie in 1..={}", nt - 1));
    }
    let full = grid.expand(&pair.vector);
    let (us, ut) = nodal_derivatives(grid, &full);
    let ht = grid.ht();
    let tw: Vec<f64> = (0..=nt).map(|j| if j == 0 || j == nt { 0.5 * ht } else { ht }).collect();
    let t: Vec<f64> = grid.t_nodes().to_vec();
    // t_j = j / nt, so cos(k pi t_j) only depends on k j mod 2 nt
    let period = 2 * nt;
    let cos: Vec<f64> = (0..period).map(|m| (PI * m as f64 / nt as f64).cos()).collect();
    let sin: Vec<f64> = (0..period).map(|m| (PI * m as f64 / nt as f64).sin()).collect();

    let nodes: Vec<usize> = (j0..=b.node).collect();
    let s: Vec<f64> = nodes.iter().map(|&i| grid.s_nodes()[i]).collect();
    let mut f = vec![vec![0.0; nodes.len()]; kmax];
    let mut g = vec![vec![0.0; nodes.len()]; kmax];
    let (mut dx_line, mut dy_line, mut yg_line) =
        (vec![0.0; nodes.len()], vec![0.0; nodes.len()], vec![0.0; nodes.len()]);
    let (mut fsum_w, mut gsum_w) = (vec![0.0; nodes.len()], vec![0.0; nodes.len()]);
    let (mut fsum, mut gsum) = (vec![0.0; nodes.len()], vec![0.0; nodes.len()]);
    for (c, &i) in nodes.iter().enumerate() {
        let x = grid.s_nodes()[i];
        let (l, lp) = (grid.profile().width(x), grid.profile().width_slope(x));
        let dxu: Vec<f64> = (0..=nt).map(|j| us[grid.node(i, j)] - t[j] * lp / l * ut[grid.node(i, j)]).collect();
        let tut: Vec<f64> = (0..=nt).map(|j| t[j] * ut[grid.node(i, j)]).collect();
        let fw: Vec<f64> = (0..=nt).map(|j| tw[j] * t[j] * dxu[j]).collect();
        let gw: Vec<f64> = (0..=nt).map(|j| tw[j] * tut[j]).collect();
        for k in 1..nt {
            let (mut fk, mut gk, mut m) = (0.0, 0.0, 0);
            for j in 0..=nt {
                fk += fw[j] * cos[m];
                gk += gw[j] * sin[m];
                m += k;
                if m >= period {
                    m -= period;
                }
            }
            let (fk, gk) = (2.0 * l * fk, 2.0 * gk);
            fsum[c] += fk * fk;
            gsum[c] += gk * gk;
            if k <= kmax {
                f[k - 1][c] = fk;
                g[k - 1][c] = gk;
            }
        }
        // ∫ |∂x u|² dy = L ∫ dxu² dt, ∫ |∂y u|² dy = ∫ U_t² dt / L
        dx_line[c] = l * (0..=nt).map(|j| tw[j] * dxu[j] * dxu[j]).sum::<f64>();
        dy_line[c] = (0..=nt).map(|j| tw[j] * ut[grid.node(i, j)].powi(2)).sum::<f64>() / l;
        // discrete sine inner product (endpoints carry no weight), so Parseval is exact
        yg_line[c] = l * ht * (1..nt).map(|j| tut[j] * tut[j]).sum::<f64>();
        fsum_w[c] = 0.5 * l * fsum[c];
        gsum_w[c] = 0.5 * l * gsum[c];
    }
    let dx2 = trapezoid(&s, &dx_line);
    let dy2 = trapezoid(&s, &dy_line);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let fk_all = trapezoid(&s, &fsum);
    let gk_all = trapezoid(&s, &gsum);
    let out = FgData {
        b: b.value,
        c_f: ratio(fk_all, dx2),
        c_g: ratio(gk_all, dy2),
        c_f_weighted: ratio(trapezoid(&s, &fsum_w), dx2),
        c_g_weighted: ratio(trapezoid(&s, &gsum_w), dy2),
        g_plancherel: ratio(trapezoid(&s, &gsum_w), trapezoid(&s, &yg_line)),
        dx_norm2: dx2,
        dy_norm2: dy2,
        s,
        f,
        g,
    };
    Ok(out)
}

/// Small and large mode parts as nodal fields.
#[derive(Clone, Debug)]
pub struct SplitModes {
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
}

/// `u_-` collects `k < k*`, `u_+` collects `k* <= k <= kmax`.
pub fn split_modes(grid: &TensorGrid, decomp: &ModeDecomposition) -> SplitModes {
    let (ns, nt) = (grid.ns(), grid.nt());
    let table = sine_table(decomp.kmax, nt);
    let mut minus = vec![0.0; grid.nodes()];
    let mut plus = vec![0.0; grid.nodes()];
    for (k0, coef) in decomp.modes.iter().enumerate() {
        let target = if decomp.is_large(k0 + 1) { &mut plus } else { &mut minus };
        for i in 0..=ns {
            if coef[i] == 0.0 {
                continue;
            }
            for j in 1..nt {
                target[grid.node(i, j)] += coef[i] * table[k0][j];
            }
        }
    }
    SplitModes { minus, plus }
}

/// Mass of each kept mode over `region`, `m_k ∫ L u_k² ds`. By discrete
/// orthogonality these add up to the mass of the truncated field.
pub fn mode_masses(grid: &TensorGrid, decomp: &ModeDecomposition, region: Region) -> Vec<f64> {
    decomp
        .modes
        .iter()
        .enumerate()
        .map(|(k0, coef)| discrete_symbols(k0 + 1, grid.nt()).0 * mode_integrals(grid, coef, grid.cells(region)).0)
        .collect()
}

/// `sum_k ∫ |u_k|² ds / ||u||²` over `s <= b`; lies in `[2/L0, 2/L(b)]` up to
/// discretization of the transverse mass.
pub fn plancherel_ratio(grid: &TensorGrid, pair: &EigenPair, decomp: &ModeDecomposition, b: Snapped) -> f64 {
    let full = grid.expand(&pair.vector);
    let norm = grid.quadratic(&full, Region::Below(b.node)).mass;
    let s = &grid.s_nodes()[..=b.node];
    let sum: f64 =
        decomp.modes.iter().map(|m| trapezoid(s, &m[..=b.node].iter().map(|v| v * v).collect::<Vec<_>>())).sum();
    sum / norm
}

/// `a_{b,k}(u) = ∫ (u'² + k² pi² / L² u²) L/2 dx` for samples on a uniform mesh of `[-B0, b]`.
pub fn a_bk(profile: &crate::geometry::BilliardProfile, k: usize, b: f64, u: &[f64]) -> f64 {
    let n = u.len() - 1;
    let h = (profile.b0 + b) / n as f64;
    let kk = (k * k) as f64 * PI * PI;
    let mut acc = 0.0;
    for i in 0..n {
        let d = (u[i + 1] - u[i]) / h;
        for (g, w) in GAUSS.iter().zip(GAUSS_W) {
            let x = -profile.b0 + (i as f64 + g) * h;
            let l = profile.width(x);
            let v = u[i] * (1.0 - g) + u[i + 1] * g;
            acc += w * h * (d * d + kk / (l * l) * v * v) * l / 2.0;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_forms, solve_eigenpairs, SolverOptions, Window};
    use crate::geometry::BilliardProfile;

    fn synthetic(grid: &TensorGrid, f: impl Fn(f64, f64) -> f64) -> EigenPair {
        let mut full = vec![0.0; grid.nodes()];
        for i in 0..=grid.ns() {
            for j in 0..=grid.nt() {
                full[grid.node(i, j)] = f(grid.s_nodes()[i], grid.t_nodes()[j]);
            }
        }
        EigenPair { index: 0, energy: 10.0, vector: grid.restrict(&full), residual: 0.0 }
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(k_star(100.0, PI), 15);
        // exact tie: k² pi² / L0² = 2E with k = 4
        assert_eq!(k_star(8.0 * PI * PI, 1.0), 4);
        assert_eq!(k_star(8.0 * PI * PI * (1.0 + 1e-12), 1.0), 5);
    }

    #[test]
    fn single_modes_are_isolated() {
        let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
        let g = TensorGrid::new(p, 16, 32).unwrap();
        let pair = synthetic(&g, |s, t| (1.0 + s * s) * (PI * t).sin() * ((s + 1.0) * PI / 2.0).sin());
        let d = decompose(&g, &pair, Some(10)).unwrap();
        for (i, s) in g.s_nodes().iter().enumerate() {
            let f = (1.0 + s * s) * ((s + 1.0) * PI / 2.0).sin();
            assert!((d.mode(1)[i] - f).abs() < 1e-10);
            for k in 2..=10 {
                assert!(d.mode(k)[i].abs() < 1e-10);
            }
        }
        let pair = synthetic(&g, |s, t| if s.abs() < 1.0 { (2.0 * PI * t).sin() } else { 0.0 });
        let d = decompose(&g, &pair, Some(10)).unwrap();
        assert!((d.mode(2)[5] - 1.0).abs() < 1e-10);
        assert!(d.mode(3)[5].abs() < 1e-10);
    }

    #[test]
    fn kmax_too_small_is_rejected() {
        let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
        let g = TensorGrid::new(p, 16, 32).unwrap();
        let mut pair = synthetic(&g, |_, t| (PI * t).sin());
        pair.energy = 200.0;
        let err = decompose(&g, &pair, Some(8)).unwrap_err().to_string();
        assert!(err.contains("k* + 5 = 12"), "{err}");
    }

    #[test]
    fn mode_sums_match_matrix_forms() {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 1.0, 0.9).unwrap();
        let g = TensorGrid::new(p, 60, 24).unwrap();
        let forms = assemble_forms(&g).unwrap();
        let spec = solve_eigenpairs(&forms, Window::Lowest(4), &SolverOptions::default()).unwrap();
        for pair in &spec.pairs {
            let d = decompose(&g, pair, Some(g.nt() - 1)).unwrap();
            assert!(d.tail_mass == 0.0);
            assert!((d.total_mass - 1.0).abs() < 1e-10);
            let b = g.snap(0.9).unwrap();
            let fv = form_values(&g, pair, &d, b);
            assert!(fv.a_gap() < 1e-10, "{fv:?}");
            assert!(fv.n_gap() < 1e-10);
            assert!((fv.n_b_matrix - 1.0).abs() < 1e-10);
            let b = g.snap(0.3).unwrap();
            let fv = form_values(&g, pair, &d, b);
            assert!(fv.a_gap() < 1e-10);
            let ratio = plancherel_ratio(&g, pair, &d, b);
            assert!(ratio >= 2.0 - 1e-9 && ratio <= 2.0 / g.profile().width(b.value) * 1.01, "{ratio}");
        }
    }

    #[test]
    fn gap_functional_vanishes_on_rectangle_and_obeys_bound() {
        let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
        let g = TensorGrid::new(p, 24, 12).unwrap();
        let forms = assemble_forms(&g).unwrap();
        let pair = &solve_eigenpairs(&forms, Window::Lowest(1), &SolverOptions::default()).unwrap().pairs[0];
        let b = g.snap(0.5).unwrap();
        let v: Vec<f64> = (0..g.interior_dofs())
            .map(|d| if d / (g.nt() - 1) + 1 < b.node { (d as f64).sin() } else { 0.0 })
            .collect();
        let c = gap_functional(&forms, pair, &v, b).unwrap();
        assert_eq!(c.lambda, 0.0);
        assert!(c.identity_holds());

        let p = BilliardProfile::truncated_quarter_stadium(1.0, 1.0, 0.9).unwrap();
        let g = TensorGrid::new(p, 38, 20).unwrap();
        let forms = assemble_forms(&g).unwrap();
        let pair = &solve_eigenpairs(&forms, Window::Lowest(3), &SolverOptions::default()).unwrap().pairs[2];
        let b = g.snap(0.6).unwrap();
        let v: Vec<f64> = (0..g.interior_dofs())
            .map(|d| if d / (g.nt() - 1) + 1 < b.node { ((d * 31 % 17) as f64 - 8.0) / 8.0 } else { 0.0 })
            .collect();
        let c = gap_functional(&forms, pair, &v, b).unwrap();
        assert!(c.lambda != 0.0);
        assert!(c.within_bound(), "{c:?}");
        assert!(c.identity_holds(), "{c:?}");
        // Λ(u restricted) against form values
        let full = g.expand(&pair.vector);
        let mut cut = full.clone();
        for i in b.node..=g.ns() {
            for j in 0..=g.nt() {
                cut[g.node(i, j)] = 0.0;
            }
        }
        let vr = g.restrict(&cut);
        let c = gap_functional(&forms, pair, &vr, b).unwrap();
        let sums = g.bilinear(&full, &cut, Region::All);
        assert!((c.lambda - (sums.a - sums.q)).abs() < 1e-12 * sums.q.abs());
        let mut bad = vr.clone();
        *bad.last_mut().unwrap() = 1.0;
        assert!(gap_functional(&forms, pair, &bad, b).is_err());
    }

    #[test]
    fn fg_oracles() {
        let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
        let g = TensorGrid::new(p.clone(), 8, 4096).unwrap();
        let pair = synthetic(&g, |_, t| (PI * t).sin());
        let fg = compute_fg(&g, &pair, g.snap(0.5).unwrap(), 4).unwrap();
        assert!(fg.f.iter().flatten().all(|v| v.abs() < 1e-12));
        // G_1 = pi ∫ t sin(2 pi t) dt = -1/2
        let oracle = {
            let n = 200_000;
            let h = 1.0 / n as f64;
            (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) * h;
                    PI * t * (2.0 * PI * t).sin() * h
                })
                .sum::<f64>()
        };
        assert!((oracle + 0.5).abs() < 1e-8);
        // centered differences and trapezoid are both O(ht^2)
        for v in &fg.g[0] {
            assert!((v - oracle).abs() < 1e-6, "{v}");
        }

        let g = TensorGrid::new(p, 40, 64).unwrap();
        let pair = synthetic(&g, |s, t| ((s + 1.0) * PI / 2.0).sin() * ((PI * t).sin() + 0.3 * (3.0 * PI * t).sin()));
        let fg = compute_fg(&g, &pair, g.snap(0.5).unwrap(), 10).unwrap();
        assert!(fg.c_g_weighted <= 1.0 + 1e-6, "{}", fg.c_g_weighted);
        assert!((fg.g_plancherel - 1.0).abs() < 1e-6, "{}", fg.g_plancherel);
        assert!(fg.c_f_weighted <= 1.0 + 1e-6);
    }

    #[test]
    fn split_follows_the_transverse_index() {
        let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
        let g = TensorGrid::new(p, 32, 48).unwrap();
        let field = |l: f64| move |s: f64, t: f64| ((s + 1.0) * PI).sin() * (l * PI * t).sin();
        // E = 60: k* = ceil(sqrt(120)/pi) = 4
        for (l, large) in [(2.0, false), (5.0, true)] {
            let mut pair = synthetic(&g, field(l));
            pair.energy = 60.0;
            let d = decompose(&g, &pair, None).unwrap();
            assert_eq!(d.k_star, 4);
            let sm = split_modes(&g, &d);
            let (empty, full) = if large { (&sm.minus, &sm.plus) } else { (&sm.plus, &sm.minus) };
            assert!(empty.iter().all(|v| v.abs() < 1e-12));
            let whole = g.expand(&pair.vector);
            assert!(full.iter().zip(&whole).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn equivalence_with_h1() {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 1.0, 0.9).unwrap();
        let b = 0.5;
        let n = 600;
        let h = (p.b0 + b) / n as f64;
        for seed in 0..50u64 {
            let u: Vec<f64> = (0..=n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    (PI * x).sin().powi(2) * (1.0 + 0.5 * ((seed as f64 + 1.0) * 3.0 * x).cos())
                })
                .collect();
            let l2: f64 = u.windows(2).map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0).sum();
            let d2: f64 = u.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum();
            let h1 = l2 + d2;
            for k in 1..=20 {
                let a = a_bk(&p, k, b, &u);
                let kk = (k * k) as f64 * PI * PI;
                let lo = p.width(b).min(kk / p.l0) * h1;
                let hi = p.l0.max(kk / p.width(b)) * h1;
                assert!(lo <= 2.0 * a * (1.0 + 1e-12) && 2.0 * a <= hi * (1.0 + 1e-12));
            }
        }
    }
}
