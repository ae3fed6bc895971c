//! Browser demo: coarse eigenmodes, the Green function, exponents and `nu(E)`.
//!
//! Everything the page draws is computed by the plain functions in this
//! module; the `#[wasm_bindgen]` wrappers in [`bindings`] only convert types.

use std::f64::consts::PI;

use billiard_core::bounds::{alpha_large, alpha_small, exponent_from_f64, rho, to_f64};
use billiard_core::discretize::{assemble_forms, solve_eigenpairs, SolverOptions, TensorGrid, Window};
use billiard_core::onedim::green_g;
use billiard_core::resonance;
use billiard_core::{BilliardProfile, Result};

pub mod bindings;

/// Lowest Dirichlet modes of a quarter stadium on a coarse grid.
pub struct ModeSet {
    grid: TensorGrid,
    energies: Vec<f64>,
    /// Nodal values on the full grid, boundary included.
    fields: Vec<Vec<f64>>,
}

impl ModeSet {
    pub fn stadium(l0: f64, b0: f64, fraction: f64, count: usize, ns: usize, nt: usize) -> Result<Self> {
        let profile = BilliardProfile::truncated_quarter_stadium(l0, b0, fraction)?;
        Self::solve(profile, count, ns, nt)
    }

    pub fn solve(profile: BilliardProfile, count: usize, ns: usize, nt: usize) -> Result<Self> {
        let grid = TensorGrid::new(profile, ns, nt)?;
        let forms = assemble_forms(&grid)?;
        let spectrum = solve_eigenpairs(&forms, Window::Lowest(count), &SolverOptions::default())?;
        let energies = spectrum.pairs.iter().map(|p| p.energy).collect();
        let fields = spectrum.pairs.iter().map(|p| grid.expand(&p.vector)).collect();
        Ok(ModeSet { grid, energies, fields })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Pixel height that keeps the aspect ratio of the bounding box for a given width.
    pub fn height_for(&self, width: usize) -> usize {
        let p = self.grid.profile();
        ((width as f64) * p.l0 / (p.b0 + p.b1)).round().max(1.0) as usize
    }

    /// Mode value at a physical point, `None` outside the billiard.
    pub fn value(&self, mode: usize, x: f64, y: f64) -> Option<f64> {
        let p = self.grid.profile();
        if !(x >= -p.b0 && x <= p.b1 && y >= 0.0) {
            return None;
        }
        let w = p.width(x);
        if w <= 0.0 || w.is_nan() || y > w {
            return None;
        }
        let s = self.grid.s_nodes();
        let nt = self.grid.nt();
        let i = s.partition_point(|&v| v <= x).clamp(1, s.len() - 1) - 1;
        let fs = ((x - s[i]) / (s[i + 1] - s[i])).clamp(0.0, 1.0);
        let tt = (y / w) * nt as f64;
        let j = (tt.floor() as usize).min(nt - 1);
        let ft = tt - j as f64;
        let u = &self.fields[mode];
        let at = |a: usize, b: usize| u[self.grid.node(a, b)];
        Some(
            (1.0 - fs) * (1.0 - ft) * at(i, j)
                + fs * (1.0 - ft) * at(i + 1, j)
                + (1.0 - fs) * ft * at(i, j + 1)
                + fs * ft * at(i + 1, j + 1),
        )
    }

    /// RGBA raster of one mode, row 0 at the top; outside the billiard is transparent.
    pub fn image(&self, mode: usize, width: usize) -> Vec<u8> {
        let height = self.height_for(width);
        let p = self.grid.profile();
        let scale = self.fields[mode].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut rgba = vec![0u8; 4 * width * height];
        for row in 0..height {
            let y = p.l0 * (1.0 - (row as f64 + 0.5) / height as f64);
            for col in 0..width {
                let x = -p.b0 + (p.b0 + p.b1) * (col as f64 + 0.5) / width as f64;
                if let Some(v) = self.value(mode, x, y) {
                    let px = &mut rgba[4 * (row * width + col)..][..4];
                    px.copy_from_slice(&diverging(v / scale));
                }
            }
        }
        rgba
    }
}

/// Blue for negative, white at zero, red for positive; `v` in `[-1, 1]`.
pub fn diverging(v: f64) -> [u8; 4] {
    let v = v.clamp(-1.0, 1.0);
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if v >= 0.0 {
        [255, fade(v), fade(v), 255]
    } else {
        [fade(-v), fade(-v), 255, 255]
    }
}

/// `(x, G(x))` at `n` points spanning `[-B0, b]`, plus the derivative jump at `0`.
pub fn green_curve(z: f64, b0: f64, b: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let g = green_g(z, b0, b)?;
    let n = n.max(2);
    let xs: Vec<f64> = (0..n).map(|i| -b0 + (b0 + b) * i as f64 / (n - 1) as f64).collect();
    let ys = xs.iter().map(|&x| g.eval(x)).collect();
    Ok((xs, ys, g.jump()))
}

pub struct Exponents {
    pub alpha_large: String,
    pub alpha_small: String,
    pub rho: String,
    pub rho_value: f64,
}

/// Exact exponents for `gamma` and `eps` given as decimals with a small denominator.
pub fn exponents(gamma: f64, eps: f64) -> Result<Exponents> {
    let (g, e) = (exponent_from_f64(gamma)?, exponent_from_f64(eps)?);
    let r = rho(g, e)?;
    Ok(Exponents {
        alpha_large: alpha_large(g)?.to_string(),
        alpha_small: alpha_small(g, e)?.to_string(),
        rho: r.to_string(),
        rho_value: to_f64(r),
    })
}

pub struct NuCurve {
    pub energies: Vec<f64>,
    pub nu: Vec<f64>,
    /// `c0 E^{-eps}`; points on or above it are in `Z_eps`.
    pub threshold: Vec<f64>,
    pub c0: f64,
}

/// `nu(E)` on `n` evenly spaced energies, with `c0` chosen so that `fraction` of the samples lie in `Z_0`.
pub fn nu_curve(l0: f64, b0: f64, lo: f64, hi: f64, n: usize, eps: f64, fraction: f64) -> Result<NuCurve> {
    if !(lo > 0.0 && lo < hi) || n < 2 {
        return Err(billiard_core::Error::Parameter(format!("need 0 < lo < hi and n >= 2, got [{lo}, {hi}], n = {n}")));
    }
    let energies: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let nu = energies.iter().map(|&e| Ok(resonance::nu(e, l0, b0)?.value)).collect::<Result<Vec<_>>>()?;
    let c0 = resonance::choose_c0(&nu, fraction).unwrap_or(0.0);
    let threshold = energies.iter().map(|e| c0 * e.powf(-eps)).collect();
    Ok(NuCurve { energies, nu, threshold, c0 })
}

/// Default transverse threshold used by the page's Green-function panel.
pub fn default_beta(b0: f64) -> f64 {
    PI / (2.0 * b0)
}
