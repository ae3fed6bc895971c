//! Dirichlet spectrum of the rectangle `[-B0, 0] x [0, L0]`, the distance
//! `nu(E)` to it, the non-resonance sets `Z_eps` and the arithmetic lemmas
//! feeding the small-mode estimates.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::export::{fmt15, CsvTable};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub value: f64,
    pub k: u64,
    pub l: u64,
}

#[inline]
fn level(k: u64, l: u64, l0: f64, b0: f64) -> f64 {
    (k * k) as f64 * PI * PI / (l0 * l0) + (l * l) as f64 * PI * PI / (b0 * b0)
}

#[derive(Clone, Debug, Serialize)]
pub struct RectSpectrum {
    pub levels: Vec<Level>,
    pub warning: Option<String>,
}

/// All `k² pi² / L0² + l² pi² / B0² <= cap` with `k, l >= 1`, ascending, with multiplicity.
pub fn rect_spectrum(l0: f64, b0: f64, cap: f64) -> RectSpectrum {
    let ground = level(1, 1, l0, b0);
    if cap < ground {
        return RectSpectrum {
            levels: Vec::new(),
            warning: Some(format!("cap {cap} is below the ground level {ground}")),
        };
    }
    let mut levels = Vec::new();
    let mut k = 1;
    while level(k, 1, l0, b0) <= cap {
        let mut l = 1;
        while level(k, l, l0, b0) <= cap {
            levels.push(Level { value: level(k, l, l0, b0), k, l });
            l += 1;
        }
        k += 1;
    }
    levels.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.k.cmp(&b.k)));
    RectSpectrum { levels, warning: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Nu {
    pub value: f64,
    pub k: u64,
    pub l: u64,
}

/// Index box outside of which every level exceeds `2E`, hence lies farther
/// from `E` than the `(1, 1)` level does.
pub fn lattice_box(energy: f64, l0: f64, b0: f64) -> (u64, u64) {
    let r = (2.0 * energy.max(0.0)).sqrt() / PI;
    ((l0 * r).ceil() as u64 + 1, (b0 * r).ceil() as u64 + 1)
}

fn nu_in_box(energy: f64, l0: f64, b0: f64, kmax: u64, lmax: u64) -> Nu {
    let mut best = Nu { value: f64::INFINITY, k: 0, l: 0 };
    for k in 1..=kmax {
        for l in 1..=lmax {
            let d = (energy - level(k, l, l0, b0)).abs();
            if d < best.value {
                best = Nu { value: d, k, l };
            }
        }
    }
    best
}

/// `nu(E) = min |E - k² pi² / L0² - l² pi² / B0²|` over `k, l >= 1`.
pub fn nu(energy: f64, l0: f64, b0: f64) -> Result<Nu> {
    if !(energy > 0.0) {
        return param(format!("E must be positive, got {energy}"));
    }
    let (kmax, lmax) = lattice_box(energy, l0, b0);
    Ok(nu_in_box(energy, l0, b0, kmax, lmax))
}

/// Brute force over a box `factor` times larger than [`lattice_box`] (oracle).
pub fn nu_brute_force(energy: f64, l0: f64, b0: f64, factor: u64) -> Nu {
    let (kmax, lmax) = lattice_box(energy, l0, b0);
    nu_in_box(energy, l0, b0, factor * kmax, factor * lmax)
}

/// Membership in `Z_eps = {nu(E) >= c0 E^{-eps}}`; equality is inside.
pub fn in_z_eps(energy: f64, eps: f64, c0: f64, l0: f64, b0: f64) -> Result<bool> {
    if !(eps >= 0.0) || !(c0 > 0.0) {
        return param(format!("need eps >= 0 and c0 > 0 (got eps={eps}, c0={c0})"));
    }
    Ok(nu(energy, l0, b0)?.value >= c0 * energy.powf(-eps))
}

/// Largest `c0` such that at least `fraction` of the `nu` values satisfy `nu >= c0`.
pub fn choose_c0(nus: &[f64], fraction: f64) -> Option<f64> {
    if nus.is_empty() || !(fraction > 0.0 && fraction <= 1.0) {
        return None;
    }
    let mut sorted = nus.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let need = ((fraction * nus.len() as f64).ceil() as usize).max(1);
    let c0 = sorted[need - 1];
    (c0 > 0.0).then_some(c0)
}

/// Single-row bound behind `nu(E) < c sqrt(E)`:
/// `min_k |E - k² pi² / L0² - pi² / B0²| / sqrt(E)`.
pub fn nu_row_constant(energy: f64, l0: f64, b0: f64) -> f64 {
    let (kmax, _) = lattice_box(energy, l0, b0);
    (1..=kmax + 1).map(|k| (energy - level(k, 1, l0, b0)).abs()).fold(f64::INFINITY, f64::min) / energy.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SinBound {
    /// `|sin(B0 sqrt(z_k))| sqrt(z_k) / nu(E)`.
    Constant(f64),
    /// `nu(E) = 0` with a vanishing sine: the energy lies on the rectangle spectrum.
    Resonant,
}

/// Measured constant of `|sin(B0 sqrt z_k)| >= c nu(E) / sqrt z_k` for `z_k = E - k² pi² / L0² >= beta²`.
pub fn sin_lower_bound(energy: f64, k: u64, beta: f64, b0: f64, l0: f64) -> Result<SinBound> {
    let z = energy - (k * k) as f64 * PI * PI / (l0 * l0);
    if z < beta * beta {
        return Err(Error::Regime(format!("z_k = {z} is below beta² = {}; use the large-mode path", beta * beta)));
    }
    let sz = z.sqrt();
    let sine = (b0 * sz).sin().abs();
    let nu = nu(energy, l0, b0)?.value;
    if nu == 0.0 || sine < 1e-12 && nu < 1e-12 * energy {
        return Ok(SinBound::Resonant);
    }
    Ok(SinBound::Constant(sine * sz / nu))
}

/// Index of the multiple of `alpha` nearest to `lambda`, half ties downward.
pub fn nearest_multiple(lambda: f64, alpha: f64) -> u64 {
    (lambda / alpha - 0.5).ceil().max(0.0) as u64
}

/// `f(lambda) = (lambda + l(lambda) alpha) / lambda`.
pub fn step_ratio(lambda: f64, alpha: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(alpha > 0.0) {
        return param(format!("need lambda > 0 and alpha > 0 (got {lambda}, {alpha})"));
    }
    Ok((lambda + nearest_multiple(lambda, alpha) as f64 * alpha) / lambda)
}

/// Piecewise envelope `1 + (2M + 1)/alpha` on `(0, M]`, `3` beyond.
pub fn step_ratio_envelope(lambda: f64, alpha: f64, m: f64) -> f64 {
    if lambda <= m {
        1.0 + (2.0 * m + 1.0) / alpha
    } else {
        3.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceReport {
    pub energy: f64,
    pub nu: Nu,
    /// `(eps, c0, in Z_eps)` per requested exponent.
    pub z_flags: Vec<(f64, f64, bool)>,
    /// `(k, bound)` for every `k` with `z_k >= beta²`.
    pub sin_constants: Vec<(u64, SinBound)>,
}

pub fn resonance_report(energy: f64, l0: f64, b0: f64, eps: &[f64], c0: f64, beta: f64) -> Result<ResonanceReport> {
    let nu = nu(energy, l0, b0)?;
    let z_flags = eps.iter().map(|&e| Ok((e, c0, in_z_eps(energy, e, c0, l0, b0)?))).collect::<Result<Vec<_>>>()?;
    let mut sin_constants = Vec::new();
    let mut k = 1;
    while energy - (k * k) as f64 * PI * PI / (l0 * l0) >= beta * beta {
        sin_constants.push((k, sin_lower_bound(energy, k, beta, b0, l0)?));
        k += 1;
    }
    Ok(ResonanceReport { energy, nu, z_flags, sin_constants })
}

/// `E, nu, argmin_k, argmin_l, z0_flag, zeps_<eps>...` rows.
pub fn reports_csv(reports: &[ResonanceReport]) -> String {
    let mut header = vec!["E".to_string(), "nu".into(), "argmin_k".into(), "argmin_l".into()];
    if let Some(r) = reports.first() {
        for (e, _, _) in &r.z_flags {
            header.push(if *e == 0.0 { "z0_flag".into() } else { format!("zeps_{}", fmt15(*e)) });
        }
    }
    let mut t = CsvTable::new(&header);
    for r in reports {
        let mut row = vec![fmt15(r.energy), fmt15(r.nu.value), r.nu.k.to_string(), r.nu.l.to_string()];
        row.extend(r.z_flags.iter().map(|(_, _, f)| (*f as u8).to_string()));
        t.push_row(&row);
    }
    t.render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_examples() {
        let s = rect_spectrum(PI, PI, 11.0);
        let v: Vec<f64> = s.levels.iter().map(|l| l.value).collect();
        let expect = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0];
        assert_eq!(v.len(), expect.len());
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!((s.levels[1].k, s.levels[1].l), (1, 2));
        let s = rect_spectrum(1.0, 1.0, 25.0);
        assert_eq!(s.levels.len(), 1);
        assert!((s.levels[0].value - 2.0 * PI * PI).abs() < 1e-12);
        let s = rect_spectrum(PI, PI, 1.0);
        assert!(s.levels.is_empty() && s.warning.is_some());
    }

    #[test]
    fn nu_examples() {
        let n = nu(3.7, PI, PI).unwrap();
        assert!((n.value - 1.3).abs() < 1e-12);
        assert_eq!(n.k * n.k + n.l * n.l, 5);
        assert_eq!(nu(5.0, PI, PI).unwrap().value, 0.0);
        let n = nu(1000.0, PI, PI).unwrap();
        assert_eq!(n, nu_in_box(1000.0, PI, PI, 40, 40));
    }

    #[test]
    fn z_eps_membership() {
        assert!(in_z_eps(3.7, 0.0, 1.0, PI, PI).unwrap());
        assert!(!in_z_eps(2.1, 0.0, 1.0, PI, PI).unwrap());
        let n = nu(100.0, PI, PI).unwrap().value;
        assert_eq!(in_z_eps(100.0, 0.5, 1.0, PI, PI).unwrap(), n >= 0.1);
        // tie is inside
        assert!(in_z_eps(3.7, 0.0, nu(3.7, PI, PI).unwrap().value, PI, PI).unwrap());
    }

    #[test]
    fn step_ratio_examples() {
        assert_eq!(step_ratio(0.3, 1.0).unwrap(), 1.0);
        assert_eq!(step_ratio(0.5, 1.0).unwrap(), 1.0);
        assert!((step_ratio(0.75 * PI, PI).unwrap() - 7.0 / 3.0).abs() < 1e-14);
        assert!((step_ratio(1e4 * PI + 0.3, PI).unwrap() - 2.0).abs() < 0.02);
        assert!(step_ratio(0.0, 1.0).is_err());
    }

    #[test]
    fn sin_bound_cases() {
        // B0 = pi, z_k = 2.25: |sin(1.5 pi)| = 1
        let (l0, b0) = (1.0, PI);
        let e = 2.25 + PI * PI;
        let SinBound::Constant(c) = sin_lower_bound(e, 1, 1.0, b0, l0).unwrap() else { panic!() };
        let n = nu(e, l0, b0).unwrap().value;
        assert!((c - 1.5 / n).abs() < 1e-12 * c);
        // on the spectrum: (k, l) = (1, 2) -> E = pi² + 4
        assert_eq!(sin_lower_bound(PI * PI + 4.0, 1, 1.0, b0, l0).unwrap(), SinBound::Resonant);
        assert!(matches!(sin_lower_bound(PI * PI + 0.5, 1, 1.0, b0, l0), Err(Error::Regime(_))));
    }

    #[test]
    fn c0_choice() {
        let nus = [0.1, 0.5, 0.2, 0.9, 0.05, 0.3, 0.7, 0.4, 0.6, 0.8];
        let c0 = choose_c0(&nus, 0.3).unwrap();
        assert_eq!(c0, 0.7);
        assert_eq!(nus.iter().filter(|&&v| v >= c0).count(), 3);
    }
}
