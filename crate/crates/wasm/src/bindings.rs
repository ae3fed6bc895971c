//! `wasm-bindgen` surface used by `www/index.html`.

use wasm_bindgen::prelude::*;

fn js(e: billiard_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Modes(super::ModeSet);

#[wasm_bindgen]
impl Modes {
    #[wasm_bindgen(constructor)]
    pub fn new(l0: f64, b0: f64, fraction: f64, count: usize, ns: usize, nt: usize) -> Result<Modes, JsError> {
        super::ModeSet::stadium(l0, b0, fraction, count, ns, nt).map(Modes).map_err(js)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.0.energies().to_vec()
    }

    pub fn height_for(&self, width: usize) -> usize {
        self.0.height_for(width)
    }

    pub fn image(&self, mode: usize, width: usize) -> Result<Vec<u8>, JsError> {
        if mode >= self.0.len() {
            return Err(JsError::new(&format!("mode {mode} not computed ({} available)", self.0.len())));
        }
        Ok(self.0.image(mode, width))
    }
}

/// `[x0, .., x_{n-1}, G(x0), .., G(x_{n-1}), jump]`.
#[wasm_bindgen]
pub fn green_curve(z: f64, b0: f64, b: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let (mut xs, ys, jump) = super::green_curve(z, b0, b, n).map_err(js)?;
    xs.extend(ys);
    xs.push(jump);
    Ok(xs)
}

#[wasm_bindgen]
pub fn default_beta(b0: f64) -> f64 {
    super::default_beta(b0)
}

/// `[alpha_large, alpha_small, rho]` as exact fractions.
#[wasm_bindgen]
pub fn exponents(gamma: f64, eps: f64) -> Result<Vec<String>, JsError> {
    let e = super::exponents(gamma, eps).map_err(js)?;
    Ok(vec![e.alpha_large, e.alpha_small, e.rho])
}

/// `[E.., nu.., threshold.., c0]`, each block of length `n`.
#[wasm_bindgen]
pub fn nu_curve(l0: f64, b0: f64, lo: f64, hi: f64, n: usize, eps: f64, fraction: f64) -> Result<Vec<f64>, JsError> {
    let c = super::nu_curve(l0, b0, lo, hi, n, eps, fraction).map_err(js)?;
    let mut out = c.energies;
    out.extend(c.nu);
    out.extend(c.threshold);
    out.push(c.c0);
    Ok(out)
}
