use std::ops::Range;

use crate::error::{param, Error, Result};
use crate::geometry::BilliardProfile;

/// Two-point Gauss abscissae on `[0, 1]`.
pub const GAUSS: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];
/// Matching weights on `[0, 1]`.
pub const GAUSS_W: [f64; 2] = [0.5, 0.5];

/// Tensor grid on the reference rectangle `(s, t) in [-B0, B1] x [0, 1]`,
/// mapped to the billiard by `(x, y) = (s, t L(s))`.
///
/// The s-direction is uniform on each side of the junction `s = 0`, which is
/// always a grid line; when `B0 / B1` matches the cell split the two spacings
/// coincide.
#[derive(Clone, Debug)]
pub struct TensorGrid {
    profile: BilliardProfile,
    s_nodes: Vec<f64>,
    t_nodes: Vec<f64>,
    junction: usize,
}

/// Result of snapping a requested wing depth to the nearest s-node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapped {
    pub requested: f64,
    pub value: f64,
    /// Index of the s-node at `value`.
    pub node: usize,
}

impl Snapped {
    pub fn distance(&self) -> f64 {
        (self.value - self.requested).abs()
    }
}

/// Union of whole s-cell columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    All,
    /// `s <= 0`.
    Rectangle,
    /// `s >= 0`.
    Wing,
    /// `s <= s_node[node]`.
    Below(usize),
    /// `0 <= s <= s_node[node]`.
    WingBelow(usize),
}

impl TensorGrid {
    pub fn new(profile: BilliardProfile, ns: usize, nt: usize) -> Result<Self> {
        if ns < 8 || nt < 8 {
            return param(format!("grid needs ns >= 8 and nt >= 8 (got {ns} x {nt})"));
        }
        let total = profile.b0 + profile.b1;
        let n_rect = ((ns as f64) * profile.b0 / total).round() as usize;
        let n_rect = n_rect.clamp(1, ns - 1);
        let n_wing = ns - n_rect;
        let mut s_nodes = Vec::with_capacity(ns + 1);
        for i in 0..n_rect {
            s_nodes.push(-profile.b0 * (n_rect - i) as f64 / n_rect as f64);
        }
        for i in 0..=n_wing {
            s_nodes.push(profile.b1 * i as f64 / n_wing as f64);
        }
        let t_nodes = (0..=nt).map(|j| j as f64 / nt as f64).collect();
        Ok(Self { profile, s_nodes, t_nodes, junction: n_rect })
    }

    /// Grid with (close to) uniform spacing `h` in both directions.
    pub fn with_spacing(profile: BilliardProfile, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return param("spacing must be positive");
        }
        let ns = ((profile.b0 + profile.b1) / h).round() as usize;
        let nt = (1.0 / h).round() as usize;
        Self::new(profile, ns, nt)
    }

    pub fn profile(&self) -> &BilliardProfile {
        &self.profile
    }
    pub fn ns(&self) -> usize {
        self.s_nodes.len() - 1
    }
    pub fn nt(&self) -> usize {
        self.t_nodes.len() - 1
    }
    pub fn s_nodes(&self) -> &[f64] {
        &self.s_nodes
    }
    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }
    /// Index of the s-node at the junction `s = 0`.
    pub fn junction(&self) -> usize {
        self.junction
    }
    pub fn hs(&self, cell: usize) -> f64 {
        self.s_nodes[cell + 1] - self.s_nodes[cell]
    }
    pub fn ht(&self) -> f64 {
        1.0 / self.nt() as f64
    }

    /// Interior unknowns: `(ns - 1) * (nt - 1)`.
    pub fn interior_dofs(&self) -> usize {
        (self.ns() - 1) * (self.nt() - 1)
    }
    /// Number of all nodes.
    pub fn nodes(&self) -> usize {
        (self.ns() + 1) * (self.nt() + 1)
    }
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * (self.nt() + 1) + j
    }
    /// Interior dof index of node `(i, j)`, if it is not on the boundary.
    pub fn dof(&self, i: usize, j: usize) -> Option<usize> {
        let (ns, nt) = (self.ns(), self.nt());
        (i > 0 && i < ns && j > 0 && j < nt).then(|| (i - 1) * (nt - 1) + (j - 1))
    }

    /// Expands an interior vector to all nodes (zero on the boundary).
    pub fn expand(&self, interior: &[f64]) -> Vec<f64> {
        assert_eq!(interior.len(), self.interior_dofs());
        let (ns, nt) = (self.ns(), self.nt());
        let mut full = vec![0.0; self.nodes()];
        for i in 1..ns {
            let src = &interior[(i - 1) * (nt - 1)..i * (nt - 1)];
            let row = self.node(i, 1);
            full[row..row + nt - 1].copy_from_slice(src);
        }
        full
    }

    /// Restricts a nodal field to the interior unknowns.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.nodes());
        let (ns, nt) = (self.ns(), self.nt());
        let mut out = Vec::with_capacity(self.interior_dofs());
        for i in 1..ns {
            let row = self.node(i, 1);
            out.extend_from_slice(&full[row..row + nt - 1]);
        }
        out
    }

    /// Snaps a wing depth `b` to the nearest s-node strictly inside the wing.
    pub fn snap(&self, b: f64) -> Result<Snapped> {
        let wing = &self.s_nodes[self.junction..];
        let (k, &value) =
            wing.iter().enumerate().min_by(|a, c| (a.1 - b).abs().total_cmp(&(c.1 - b).abs())).expect("wing has nodes");
        if k == 0 {
            return Err(Error::Resolution(format!(
                "b = {b:.3e} snaps to the junction (wing spacing {:.3e})",
                self.hs(self.junction)
            )));
        }
        Ok(Snapped { requested: b, value, node: self.junction + k })
    }

    /// s-cell indices making up `region`.
    pub fn cells(&self, region: Region) -> Range<usize> {
        match region {
            Region::All => 0..self.ns(),
            Region::Rectangle => 0..self.junction,
            Region::Wing => self.junction..self.ns(),
            Region::Below(node) => 0..node.min(self.ns()),
            Region::WingBelow(node) => self.junction..node.clamp(self.junction, self.ns()),
        }
    }

    /// Physical coordinates of node `(i, j)`.
    pub fn physical(&self, i: usize, j: usize) -> (f64, f64) {
        let s = self.s_nodes[i];
        (s, self.t_nodes[j] * self.profile.width(s))
    }
}

/// Integrals of the quadratic forms over a set of cells, as computed by the
/// assembly quadrature (exactly consistent with the matrices).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FormSums {
    /// `q(u, v) = ∫ ∂x u ∂x v + ∂y u ∂y v`.
    pub q: f64,
    /// `a(u, v) = ∫ Du Dv + ∂y u ∂y v`.
    pub a: f64,
    /// `∫ u v`.
    pub mass: f64,
    /// `∫ ∂x u ∂x v`.
    pub dx: f64,
    /// `∫ ∂y u ∂y v`.
    pub dy: f64,
}

/// Gauss-point values of a bilinear field inside one cell.
struct CellEval {
    val: f64,
    us: f64,
    ut: f64,
}

#[inline]
fn eval_cell(c: [f64; 4], xi: f64, eta: f64, hs: f64, ht: f64) -> CellEval {
    // c = [u(i,j), u(i+1,j), u(i,j+1), u(i+1,j+1)]
    let val = c[0] * (1.0 - xi) * (1.0 - eta) + c[1] * xi * (1.0 - eta) + c[2] * (1.0 - xi) * eta + c[3] * xi * eta;
    let us = ((c[1] - c[0]) * (1.0 - eta) + (c[3] - c[2]) * eta) / hs;
    let ut = ((c[2] - c[0]) * (1.0 - xi) + (c[3] - c[1]) * xi) / ht;
    CellEval { val, us, ut }
}

impl TensorGrid {
    fn corners(&self, f: &[f64], i: usize, j: usize) -> [f64; 4] {
        [f[self.node(i, j)], f[self.node(i + 1, j)], f[self.node(i, j + 1)], f[self.node(i + 1, j + 1)]]
    }

    /// Bilinear form values `(u, v)` over the cells of `region` (nodal fields).
    pub fn bilinear(&self, u: &[f64], v: &[f64], region: Region) -> FormSums {
        assert_eq!(u.len(), self.nodes());
        assert_eq!(v.len(), self.nodes());
        let ht = self.ht();
        let mut acc = FormSums::default();
        for i in self.cells(region) {
            let hs = self.hs(i);
            for (gs, ws) in GAUSS.iter().zip(GAUSS_W) {
                let s = self.s_nodes[i] + gs * hs;
                let l = self.profile.width(s);
                let ratio = self.profile.width_slope(s) / l;
                for j in 0..self.nt() {
                    let cu = self.corners(u, i, j);
                    let cv = self.corners(v, i, j);
                    for (gt, wt) in GAUSS.iter().zip(GAUSS_W) {
                        let t = self.t_nodes[j] + gt * ht;
                        let w = ws * wt * hs * ht * l;
                        let eu = eval_cell(cu, *gs, *gt, hs, ht);
                        let ev = eval_cell(cv, *gs, *gt, hs, ht);
                        let dxu = eu.us - t * ratio * eu.ut;
                        let dxv = ev.us - t * ratio * ev.ut;
                        let dy = eu.ut * ev.ut / (l * l);
                        acc.dx += w * dxu * dxv;
                        acc.dy += w * dy;
                        acc.q += w * (dxu * dxv + dy);
                        acc.a += w * (eu.us * ev.us + dy);
                        acc.mass += w * eu.val * ev.val;
                    }
                }
            }
        }
        acc
    }

    /// Quadratic form values over `region`.
    pub fn quadratic(&self, u: &[f64], region: Region) -> FormSums {
        self.bilinear(u, u, region)
    }

    /// `∫∫ L ds dt` by the assembly quadrature.
    pub fn quadrature_area(&self) -> f64 {
        let mut area = 0.0;
        for i in 0..self.ns() {
            let hs = self.hs(i);
            for (g, w) in GAUSS.iter().zip(GAUSS_W) {
                area += w * hs * self.profile.width(self.s_nodes[i] + g * hs);
            }
        }
        area
    }
}
