//! Generalized symmetric eigensolver for `K_q U = E M U`.
//!
//! The requested window is cut into slices using inertia counts of
//! `K_q - sigma M`. Each slice is solved by shift-invert Lanczos (full
//! reorthogonalization in the `M` inner product) around the slice midpoint;
//! converged vectors are locked and the run restarted until the slice count
//! from the inertia is reached, which also recovers repeated eigenvalues.
//! A final Rayleigh–Ritz pass over each slice block polishes residuals.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::assemble::AssembledForms;
use super::banded::{axpy_in_place, dot, norm, Ldlt, SymBand};
use crate::error::{Error, Result};

/// `(shift, eigenvalues below it)` at both ends of a slice.
type Slice = ((f64, usize), (f64, usize));

#[derive(Clone, Debug, Serialize)]
pub struct SolverOptions {
    /// Contract on `||K U - E M U|| / (E ||M U||)`.
    pub residual_tol: f64,
    /// Lanczos convergence threshold on the transformed operator, relative to the Ritz value.
    pub ritz_tol: f64,
    /// Target number of eigenvalues per slice.
    pub max_per_slice: usize,
    /// Problems with at most this many unknowns are solved densely.
    pub dense_threshold: usize,
    /// Hard cap on Lanczos steps per run.
    pub max_lanczos_steps: usize,
    /// Relative gap under which neighbouring eigenvalues are flagged as a cluster.
    pub cluster_gap: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            ritz_tol: 1e-12,
            max_per_slice: 40,
            dense_threshold: 600,
            max_lanczos_steps: 600,
            cluster_gap: 1e-6,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    /// All eigenvalues in `[lo, hi]`.
    Range { lo: f64, hi: f64 },
    /// The `m` lowest eigenvalues.
    Lowest(usize),
}

/// One Dirichlet eigenpair on the interior unknowns of a grid.
#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Position in the full ascending spectrum (0-based).
    pub index: usize,
    pub energy: f64,
    /// `M`-normalized interior vector, largest-magnitude entry positive.
    pub vector: Vec<f64>,
    /// `||K U - E M U|| / (E ||M U||)`.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    /// Number of eigenvalues below the window.
    pub below: usize,
    pub window: (f64, f64),
    /// Index pairs of neighbours closer than the cluster gap ("possibly unresolved").
    pub clusters: Vec<(usize, usize)>,
    pub factorizations: usize,
}

pub fn relative_residual(k: &SymBand, m: &SymBand, x: &[f64], e: f64) -> f64 {
    let kx = k.apply(x);
    let mx = m.apply(x);
    let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
    r / (e.abs() * norm(&mx))
}

struct Shifted {
    sigma: f64,
    factor: Ldlt,
}

struct Solver<'a> {
    k: &'a SymBand,
    m: &'a SymBand,
    opts: &'a SolverOptions,
    factorizations: usize,
}

impl<'a> Solver<'a> {
    /// Factorizes `K - sigma M`, nudging sigma off (near) eigenvalues.
    fn shifted(&mut self, sigma: f64) -> Result<Shifted> {
        let mut s = sigma;
        for attempt in 0..8 {
            self.factorizations += 1;
            match self.k.axpy(-s, self.m).ldlt() {
                Ok(factor) => return Ok(Shifted { sigma: s, factor }),
                Err(_) => s = sigma + (1.0 + sigma.abs()) * 1e-9 * (attempt as f64 + 1.0),
            }
        }
        Err(Error::Consistency(format!("could not factor K - sigma M near sigma = {sigma}")))
    }

    fn count_below(&mut self, sigma: f64) -> Result<(f64, usize)> {
        if sigma <= 0.0 {
            return Ok((sigma, 0));
        }
        let s = self.shifted(sigma)?;
        Ok((s.sigma, s.factor.negative_pivots()))
    }

    /// Cuts `[lo, hi]` into slices of at most `max_per_slice` eigenvalues.
    fn slices(&mut self, lo: (f64, usize), hi: (f64, usize), out: &mut Vec<Slice>) -> Result<()> {
        let count = hi.1 - lo.1;
        if count == 0 {
            return Ok(());
        }
        if count <= self.opts.max_per_slice || hi.0 - lo.0 < 1e-9 * hi.0 {
            out.push((lo, hi));
            return Ok(());
        }
        let mid = self.count_below(0.5 * (lo.0 + hi.0))?;
        self.slices(lo, mid, out)?;
        self.slices(mid, hi, out)
    }

    fn m_orthonormalize(&self, x: &mut [f64], basis: &[Vec<f64>], basis_m: &[Vec<f64>]) -> Option<Vec<f64>> {
        for _ in 0..2 {
            for (b, bm) in basis.iter().zip(basis_m) {
                let c = dot(x, bm);
                axpy_in_place(x, -c, b);
            }
        }
        let mx = self.m.apply(x);
        let nrm = dot(x, &mx).sqrt();
        if !(nrm > 1e-10) {
            return None;
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        Some(mx.into_iter().map(|v| v / nrm).collect())
    }

    /// One Lanczos run on `(K - sigma M)^{-1} M`, orthogonal to `locked`.
    /// Returns converged Ritz pairs with eigenvalue in `[a, b]`.
    #[allow(clippy::too_many_arguments)]
    fn lanczos_run(
        &self,
        shift: &Shifted,
        (a, b): (f64, f64),
        need: usize,
        locked: &[Vec<f64>],
        locked_m: &[Vec<f64>],
        rng: &mut ChaCha8Rng,
        max_steps: usize,
    ) -> Vec<(f64, Vec<f64>)> {
        let n = self.k.n();
        let max_steps = max_steps.min(n - locked.len());
        let mut v: Vec<Vec<f64>> = Vec::new();
        let mut p: Vec<Vec<f64>> = Vec::new();
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();

        let mut x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Some(p0) = self.m_orthonormalize(&mut x0, locked, locked_m) else {
            return Vec::new();
        };
        v.push(x0);
        p.push(p0);

        let check_every = 8;
        let mut result = Vec::new();
        loop {
            let j = v.len() - 1;
            let mut w = shift.factor.solve(&p[j]);
            let aj = dot(&w, &p[j]);
            axpy_in_place(&mut w, -aj, &v[j]);
            if j > 0 {
                axpy_in_place(&mut w, -beta[j - 1], &v[j - 1]);
            }
            for _ in 0..2 {
                for (vi, pi) in v.iter().zip(&p).chain(locked.iter().zip(locked_m)) {
                    let c = dot(&w, pi);
                    axpy_in_place(&mut w, -c, vi);
                }
            }
            alpha.push(aj);
            let pw = self.m.apply(&w);
            let bj = dot(&w, &pw).max(0.0).sqrt();
            let steps = v.len();
            let exhausted = bj <= 1e-13 * aj.abs().max(1e-300) || steps >= max_steps;

            if exhausted || (steps >= need && steps.is_multiple_of(check_every)) {
                let t = DMatrix::from_fn(steps, steps, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r == c + 1 {
                        beta[c]
                    } else if c == r + 1 {
                        beta[r]
                    } else {
                        0.0
                    }
                });
                let eig = SymmetricEigen::new(t);
                let theta_max = eig.eigenvalues.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
                let mut conv = Vec::new();
                for (idx, &theta) in eig.eigenvalues.iter().enumerate() {
                    if theta == 0.0 {
                        continue;
                    }
                    let lambda = shift.sigma + 1.0 / theta;
                    if lambda < a || lambda > b {
                        continue;
                    }
                    let est = (bj * eig.eigenvectors[(steps - 1, idx)]).abs();
                    let tol = self.opts.ritz_tol * theta.abs().max(1e-3 * theta_max);
                    if est <= tol || (exhausted && bj <= 1e-13 * aj.abs().max(1e-300)) {
                        conv.push(idx);
                    }
                }
                if conv.len() >= need || exhausted {
                    for idx in conv {
                        let mut x = vec![0.0; n];
                        for (r, vr) in v.iter().enumerate() {
                            axpy_in_place(&mut x, eig.eigenvectors[(r, idx)], vr);
                        }
                        result.push((shift.sigma + 1.0 / eig.eigenvalues[idx], x));
                    }
                    return result;
                }
            }
            beta.push(bj);
            v.push(w.iter().map(|x| x / bj).collect());
            p.push(pw.iter().map(|x| x / bj).collect());
        }
    }

    /// All eigenpairs in one slice, using the inertia count `need`.
    fn solve_slice(&mut self, a: f64, b: f64, need: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, Vec<f64>)>> {
        let shift = self.shifted(0.5 * (a + b))?;
        let mut locked: Vec<Vec<f64>> = Vec::new();
        let mut locked_m: Vec<Vec<f64>> = Vec::new();
        let mut stalls = 0;
        let mut steps = (3 * need + 40).min(self.opts.max_lanczos_steps);
        let mut total_steps = 0;
        while locked.len() < need {
            let missing = need - locked.len();
            let found = self.lanczos_run(&shift, (a, b), missing, &locked, &locked_m, rng, steps);
            total_steps += steps;
            let before = locked.len();
            for (_, mut x) in found {
                if locked.len() == need {
                    break;
                }
                if let Some(mx) = self.m_orthonormalize(&mut x, &locked, &locked_m) {
                    locked.push(x);
                    locked_m.push(mx);
                }
            }
            if locked.len() == before {
                stalls += 1;
                steps = (2 * steps).min(self.opts.max_lanczos_steps);
                if stalls > 4 {
                    return Err(Error::Convergence { iterations: total_steps, best_residual: f64::NAN });
                }
            }
        }
        self.rayleigh_ritz(&shift, &mut locked, &mut locked_m)
    }

    /// Rayleigh–Ritz on span(Op X); repeated until residuals meet the tolerance.
    fn rayleigh_ritz(
        &self,
        shift: &Shifted,
        x: &mut Vec<Vec<f64>>,
        xm: &mut Vec<Vec<f64>>,
    ) -> Result<Vec<(f64, Vec<f64>)>> {
        let mut best = f64::INFINITY;
        for sweep in 0..6 {
            let (vals, vecs) = self.project(x, xm);
            let pairs: Vec<(f64, Vec<f64>)> = vals.into_iter().zip(vecs).collect();
            let worst = pairs.iter().map(|(e, v)| relative_residual(self.k, self.m, v, *e)).fold(0.0_f64, f64::max);
            best = best.min(worst);
            if worst <= 0.5 * self.opts.residual_tol {
                return Ok(pairs);
            }
            // one block inverse-iteration step, then re-orthonormalize
            let mut y: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
            let mut ym: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
            for (_, v) in &pairs {
                let mut w = shift.factor.solve(&self.m.apply(v));
                if let Some(wm) = self.m_orthonormalize(&mut w, &y, &ym) {
                    y.push(w);
                    ym.push(wm);
                }
            }
            if y.len() != pairs.len() {
                return Err(Error::Convergence { iterations: sweep, best_residual: best });
            }
            *x = y;
            *xm = ym;
        }
        let (vals, vecs) = self.project(x, xm);
        let pairs: Vec<(f64, Vec<f64>)> = vals.into_iter().zip(vecs).collect();
        let worst = pairs.iter().map(|(e, v)| relative_residual(self.k, self.m, v, *e)).fold(0.0_f64, f64::max);
        if worst <= self.opts.residual_tol {
            Ok(pairs)
        } else {
            Err(Error::Convergence { iterations: 6, best_residual: best.min(worst) })
        }
    }

    /// Projects `K` onto an `M`-orthonormal block and rotates to Ritz vectors.
    fn project(&self, x: &[Vec<f64>], _xm: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let p = x.len();
        let kx: Vec<Vec<f64>> = x.iter().map(|v| self.k.apply(v)).collect();
        let mx: Vec<Vec<f64>> = x.iter().map(|v| self.m.apply(v)).collect();
        let kp = DMatrix::from_fn(p, p, |r, c| 0.5 * (dot(&x[r], &kx[c]) + dot(&x[c], &kx[r])));
        let mp = DMatrix::from_fn(p, p, |r, c| 0.5 * (dot(&x[r], &mx[c]) + dot(&x[c], &mx[r])));
        let (vals, coeffs) = generalized_dense(&kp, &mp);
        let n = self.k.n();
        let vecs = (0..p)
            .map(|col| {
                let mut v = vec![0.0; n];
                for (r, xr) in x.iter().enumerate() {
                    axpy_in_place(&mut v, coeffs[(r, col)], xr);
                }
                v
            })
            .collect();
        (vals, vecs)
    }
}

/// Dense `K c = lambda M c` via Cholesky of `M`; eigenvalues ascending,
/// eigenvectors `M`-orthonormal.
pub fn generalized_dense(k: &DMatrix<f64>, m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let chol = m.clone().cholesky().expect("mass matrix must be positive definite");
    let l = chol.l();
    let linv = l.clone().try_inverse().expect("triangular factor invertible");
    let c = &linv * k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(k.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let coeffs = linv.transpose() * y;
    (vals, coeffs)
}

fn finalize(k: &SymBand, m: &SymBand, mut x: Vec<f64>) -> (f64, Vec<f64>, f64) {
    let mx = m.apply(&x);
    let nrm = dot(&x, &mx).sqrt();
    let (imax, _) =
        x.iter().enumerate().fold((0, 0.0_f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let sign = if x[imax] < 0.0 { -1.0 } else { 1.0 };
    x.iter_mut().for_each(|v| *v *= sign / nrm);
    let e = k.form(&x, &x) / m.form(&x, &x);
    let res = relative_residual(k, m, &x, e);
    (e, x, res)
}

/// Computes the eigenpairs of `K_q U = E M U` in `window`.
pub fn solve_eigenpairs(forms: &AssembledForms, window: Window, opts: &SolverOptions) -> Result<Spectrum> {
    let (k, m) = (&forms.kq, &forms.mass);
    let n = k.n();
    let mut solver = Solver { k, m, opts, factorizations: 0 };

    let (lo, hi, keep) = match window {
        Window::Range { lo, hi } => {
            if !(lo >= 0.0) || !(hi >= lo) {
                return Err(Error::Parameter(format!("window [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
            }
            (lo, hi, None)
        }
        Window::Lowest(count) => {
            if count == 0 || count > n {
                return Err(Error::Parameter(format!("requested {count} eigenpairs of {n}")));
            }
            let area = forms.grid.quadrature_area();
            let mut hi = 4.0 * std::f64::consts::PI * (count as f64 + 10.0) / area;
            while solver.count_below(hi)?.1 < count {
                hi *= 1.5;
            }
            (0.0, hi, Some(count))
        }
    };

    let mut raw: Vec<(f64, Vec<f64>)> = Vec::new();
    let (lo_s, below) = solver.count_below(lo)?;
    let (hi_s, upto) = solver.count_below(hi)?;

    if n <= opts.dense_threshold {
        let (vals, coeffs) = generalized_dense(&k.to_dense(), &m.to_dense());
        for (i, e) in vals.iter().enumerate().skip(below).take(upto - below) {
            raw.push((*e, coeffs.column(i).iter().copied().collect()));
        }
    } else {
        let mut slices = Vec::new();
        solver.slices((lo_s, below), (hi_s, upto), &mut slices)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for ((a, na), (b, nb)) in slices {
            raw.extend(solver.solve_slice(a, b, nb - na, &mut rng)?);
        }
    }

    let mut pairs: Vec<EigenPair> = raw
        .into_iter()
        .map(|(_, x)| {
            let (energy, vector, residual) = finalize(k, m, x);
            EigenPair { index: 0, energy, vector, residual }
        })
        .collect();
    pairs.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    if pairs.len() != upto - below {
        return Err(Error::Consistency(format!(
            "found {} eigenpairs but inertia counts {}",
            pairs.len(),
            upto - below
        )));
    }
    orthogonalize_clusters(k, m, &mut pairs, 1e-6);
    for (i, p) in pairs.iter_mut().enumerate() {
        p.index = below + i;
    }
    if let Some(worst) = pairs.iter().map(|p| p.residual).reduce(f64::max) {
        if worst > opts.residual_tol {
            return Err(Error::Convergence { iterations: 0, best_residual: worst });
        }
    }
    if let Some(count) = keep {
        pairs.truncate(count);
    }
    let clusters = pairs
        .windows(2)
        .filter(|w| w[1].energy - w[0].energy < opts.cluster_gap * w[1].energy)
        .map(|w| (w[0].index, w[1].index))
        .collect();
    Ok(Spectrum { pairs, below, window: (lo, hi), clusters, factorizations: solver.factorizations })
}

/// Re-orthonormalizes groups of nearly equal eigenvalues that may come from
/// different slices, then rediagonalizes `K` inside each group.
fn orthogonalize_clusters(k: &SymBand, m: &SymBand, pairs: &mut [EigenPair], gap: f64) {
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].energy - pairs[end - 1].energy < gap * pairs[end].energy {
            end += 1;
        }
        if end - start > 1 {
            let group = &mut pairs[start..end];
            let p = group.len();
            let x: Vec<Vec<f64>> = group.iter().map(|g| g.vector.clone()).collect();
            let kx: Vec<Vec<f64>> = x.iter().map(|v| k.apply(v)).collect();
            let mx: Vec<Vec<f64>> = x.iter().map(|v| m.apply(v)).collect();
            let kp = DMatrix::from_fn(p, p, |r, c| 0.5 * (dot(&x[r], &kx[c]) + dot(&x[c], &kx[r])));
            let mp = DMatrix::from_fn(p, p, |r, c| 0.5 * (dot(&x[r], &mx[c]) + dot(&x[c], &mx[r])));
            let (_, coeffs) = generalized_dense(&kp, &mp);
            for (col, g) in group.iter_mut().enumerate() {
                let mut v = vec![0.0; x[0].len()];
                for (r, xr) in x.iter().enumerate() {
                    axpy_in_place(&mut v, coeffs[(r, col)], xr);
                }
                let (e, v, res) = finalize(k, m, v);
                g.energy = e;
                g.vector = v;
                g.residual = res;
            }
        }
        start = end;
    }
}
