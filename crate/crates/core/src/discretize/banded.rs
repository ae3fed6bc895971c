//! Symmetric band matrices and an unpivoted `L D L^T` factorization with
//! inertia counting.

use crate::error::{Error, Result};

/// Symmetric matrix stored by its lower band, row-major.
///
/// Row `i` holds columns `i - bw ..= i`; entry `(i, c)` lives at
/// `data[i * (bw + 1) + c + bw - i]`. Slots with negative column index are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, c: usize) -> usize {
        debug_assert!(c <= i && i - c <= self.bw);
        i * (self.bw + 1) + c + self.bw - i
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    /// Adds `v` to entry `(i, j)` (and its mirror).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(r - c <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let k = self.slot(r, c);
        self.data[k] += v;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * w + lo + self.bw - i..i * w + w];
            let xi = x[i];
            let off = &row[..row.len() - 1];
            y[i] += row[row.len() - 1] * xi + dot(off, &x[lo..i]);
            axpy_in_place(&mut y[lo..i], xi, off);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// `A + alpha B` (same shape required).
    pub fn axpy(&self, alpha: f64, other: &SymBand) -> SymBand {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        SymBand {
            n: self.n,
            bw: self.bw,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect(),
        }
    }

    /// Largest relative asymmetry is zero by construction; this reports the
    /// largest absolute entry instead, used for scaling pivots.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense copy (tests and small fallbacks only).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Factorizes `A = L D L^T` without pivoting.
    ///
    /// Fails if a pivot is tiny relative to the matrix scale; callers shift
    /// and retry in that case.
    pub fn ldlt(&self) -> Result<Ldlt> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut l = self.data.clone();
        let mut d = vec![0.0; n];
        let mut t = vec![0.0; w];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let base = i * w + bw - i;
            // t[k - lo] = L[i][k] * d[k] for already computed k < c
            // every c in lo..i has c - bw <= lo, so row c covers lo..c
            for c in lo..i {
                let cbase = c * w + bw - c;
                let acc = l[base + c] - dot(&t[..c - lo], &l[cbase + lo..cbase + c]);
                let lic = acc / d[c];
                l[base + c] = lic;
                t[c - lo] = lic * d[c];
            }
            let di = l[base + i] - dot(&t[..i - lo], &l[base + lo..base + i]);
            if !(di.abs() > 1e-14 * scale) {
                return Err(Error::Consistency(format!("near-zero pivot {di:.3e} at row {i} (scale {scale:.3e})")));
            }
            d[i] = di;
            l[base + i] = 1.0;
        }
        Ok(Ldlt { n, bw, l, d })
    }
}

/// Band `L D L^T` factors.
#[derive(Clone, Debug)]
pub struct Ldlt {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldlt {
    /// Number of negative pivots, i.e. negative eigenvalues of the factored
    /// matrix (Sylvester's law of inertia).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|d| **d < 0.0).count()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let base = i * w + bw - i;
            x[i] -= dot(&self.l[base + lo..base + i], &x[lo..i]);
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(bw);
            let base = i * w + bw - i;
            let xi = x[i];
            let row = &self.l[base + lo..base + i];
            for (a, xv) in row.iter().zip(&mut x[lo..i]) {
                *xv -= a * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy_in_place(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
