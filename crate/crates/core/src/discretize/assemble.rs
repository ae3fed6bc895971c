use super::banded::SymBand;
use super::grid::{TensorGrid, GAUSS, GAUSS_W};
use crate::error::{Error, Result};

/// Which nodes carry unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofMap {
    /// Dirichlet nodes eliminated (the eigenproblem).
    Interior,
    /// Every node kept (mass bookkeeping, tests).
    All,
}

/// The three forms on the transformed grid.
///
/// Under `(s, t) = (x, y / L(x))`:
/// `∂y u = U_t / L`, `Du = U_s`, `∂x u = U_s - t (L'/L) U_t` and `dx dy = L ds dt`.
#[derive(Clone, Debug)]
pub struct AssembledForms {
    pub grid: TensorGrid,
    pub dofs: DofMap,
    /// Dirichlet energy `q`.
    pub kq: SymBand,
    /// Adiabatic energy `a`.
    pub ka: SymBand,
    /// `L^2` mass.
    pub mass: SymBand,
}

impl AssembledForms {
    pub fn n(&self) -> usize {
        self.mass.n()
    }

    /// `1^T M 1` (only meaningful with [`DofMap::All`]).
    pub fn total_mass(&self) -> f64 {
        let ones = vec![1.0; self.n()];
        self.mass.form(&ones, &ones)
    }
}

/// Assembles `K_q`, `K_a`, `M` with bilinear elements and 2x2 Gauss quadrature.
pub fn assemble_forms(grid: &TensorGrid) -> Result<AssembledForms> {
    assemble_with(grid, DofMap::Interior)
}

pub fn assemble_with(grid: &TensorGrid, dofs: DofMap) -> Result<AssembledForms> {
    let profile = grid.profile();
    let report = profile.validate();
    if !report.structurally_sound() {
        let names: Vec<String> = report.failures().filter(|c| c.structural).map(|c| c.name.clone()).collect();
        return Err(Error::InvalidProfile(names.join("; ")));
    }
    let (ns, nt) = (grid.ns(), grid.nt());
    let (n, bw) = match dofs {
        DofMap::Interior => (grid.interior_dofs(), nt),
        DofMap::All => (grid.nodes(), nt + 2),
    };
    let index = |i: usize, j: usize| -> Option<usize> {
        match dofs {
            DofMap::Interior => grid.dof(i, j),
            DofMap::All => Some(grid.node(i, j)),
        }
    };
    let mut kq = SymBand::zeros(n, bw);
    let mut ka = SymBand::zeros(n, bw);
    let mut mass = SymBand::zeros(n, bw);
    let ht = grid.ht();
    let floor = 1e-6 * profile.l0;

    for i in 0..ns {
        let hs = grid.hs(i);
        // Per Gauss column in s: L and L'/L.
        let mut coef = [(0.0, 0.0); 2];
        for (g, c) in GAUSS.iter().zip(coef.iter_mut()) {
            let s = grid.s_nodes()[i] + g * hs;
            let l = profile.width(s);
            if !(l >= floor) {
                return Err(Error::Degenerate(format!("L({s:.6}) = {l:.3e} below 1e-6 L0")));
            }
            *c = (l, profile.width_slope(s) / l);
        }
        for j in 0..nt {
            let ids = [index(i, j), index(i + 1, j), index(i, j + 1), index(i + 1, j + 1)];
            if ids.iter().all(Option::is_none) {
                continue;
            }
            let mut eq = [[0.0; 4]; 4];
            let mut ea = [[0.0; 4]; 4];
            let mut em = [[0.0; 4]; 4];
            for (gs, ws) in GAUSS.iter().zip(GAUSS_W) {
                let (l, ratio) = coef[if *gs < 0.5 { 0 } else { 1 }];
                for (gt, wt) in GAUSS.iter().zip(GAUSS_W) {
                    let t = grid.t_nodes()[j] + gt * ht;
                    let (xi, eta) = (*gs, *gt);
                    let n_ = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), (1.0 - xi) * eta, xi * eta];
                    let ds = [-(1.0 - eta) / hs, (1.0 - eta) / hs, -eta / hs, eta / hs];
                    let dt = [-(1.0 - xi) / ht, -xi / ht, (1.0 - xi) / ht, xi / ht];
                    let w = ws * wt * hs * ht * l;
                    let dx: [f64; 4] = std::array::from_fn(|a| ds[a] - t * ratio * dt[a]);
                    for a in 0..4 {
                        for b in 0..4 {
                            let dy = dt[a] * dt[b] / (l * l);
                            eq[a][b] += w * (dx[a] * dx[b] + dy);
                            ea[a][b] += w * (ds[a] * ds[b] + dy);
                            em[a][b] += w * n_[a] * n_[b];
                        }
                    }
                }
            }
            for a in 0..4 {
                let Some(ia) = ids[a] else { continue };
                for b in 0..4 {
                    let Some(ib) = ids[b] else { continue };
                    if ib > ia {
                        continue;
                    }
                    kq.add(ia, ib, eq[a][b]);
                    ka.add(ia, ib, ea[a][b]);
                    mass.add(ia, ib, em[a][b]);
                }
            }
        }
    }
    Ok(AssembledForms { grid: grid.clone(), dofs, kq, ka, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::grid::Region;
    use crate::geometry::BilliardProfile;

    #[test]
    fn rectangle_forms_coincide() {
        let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
        let g = TensorGrid::new(p, 16, 8).unwrap();
        let f = assemble_forms(&g).unwrap();
        assert_eq!(f.kq, f.ka);
    }

    #[test]
    fn total_mass_is_area() {
        let p = BilliardProfile::power(1.0, 1.0, 0.5, 2.0, 0.5).unwrap();
        let g = TensorGrid::new(p, 24, 8).unwrap();
        let f = assemble_with(&g, DofMap::All).unwrap();
        // exact area 1 + (0.5 - 0.5 * 0.5^3 / 3); quadratic L is integrated exactly
        let exact = 1.0 + 0.5 - 0.5 * 0.125 / 3.0;
        assert!((f.total_mass() - exact).abs() < 1e-13, "{}", f.total_mass());
        assert!((g.quadrature_area() - f.total_mass()).abs() < 1e-13);
    }

    #[test]
    fn matrices_agree_with_cell_forms() {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, 1.0, 0.9).unwrap();
        let g = TensorGrid::new(p, 19, 10).unwrap();
        let f = assemble_forms(&g).unwrap();
        let u: Vec<f64> = (0..g.interior_dofs()).map(|k| ((k * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let full = g.expand(&u);
        let sums = g.quadratic(&full, Region::All);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(f.kq.form(&u, &u), sums.q) < 1e-12);
        assert!(rel(f.ka.form(&u, &u), sums.a) < 1e-12);
        assert!(rel(f.mass.form(&u, &u), sums.mass) < 1e-12);
    }

    #[test]
    fn degenerate_profile_rejected() {
        let p = BilliardProfile::custom(1.0, 1.0, 1.0, 2.0, 1.0, |x| 1.0 - x * x, |x| -2.0 * x);
        let g = TensorGrid::new(p, 16, 8).unwrap();
        assert!(assemble_forms(&g).is_err());
    }
}
