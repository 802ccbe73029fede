//! Certified solves of (P − z)u = b.
//!
//! Small systems use dense LU, mid-sized ones sparse LU (faer), and large
//! periodic lattices restarted GMRES preconditioned by the exact inverse of
//! the flat-torus operator, applied with FFTs. Every returned solution
//! carries its relative residual, and results above the tolerance are
//! rejected.

use super::sparse::{norm2, CsrMatrix};
use crate::error::{Error, Result};
use crate::special::C64;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Use dense LU up to this many unknowns.
    pub dense_limit: usize,
    /// Use sparse LU up to this many unknowns, GMRES beyond.
    pub direct_limit: usize,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, dense_limit: 120, direct_limit: 200_000, gmres_restart: 80, gmres_max_iter: 4000 }
    }
}

/// Solution together with its relative residual ‖(P−z)x − b‖/‖b‖.
#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<C64>,
    pub residual: f64,
}

/// Exact inverse of the flat periodic operator s(k) − z, where s is the
/// scalar Fourier symbol of the lattice operator, acting fibrewise.
pub struct FlatTorusPreconditioner {
    n: usize,
    m: usize,
    fiber: usize,
    symbol: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FlatTorusPreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlatTorusPreconditioner").field("n", &self.n).field("m", &self.m).field("fiber", &self.fiber).finish()
    }
}

impl FlatTorusPreconditioner {
    /// `symbol[k]` is the flat symbol at the Fourier multi-index k with the
    /// same node ordering as the lattice (axis 0 fastest).
    pub fn new(n: usize, m: usize, fiber: usize, symbol: Vec<f64>) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        FlatTorusPreconditioner { n, m, fiber, symbol, fwd, inv }
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        let total = self.symbol.len();
        let mut line = vec![C64::new(0.0, 0.0); m];
        for axis in 0..self.n {
            let stride = m.pow(axis as u32);
            for start in 0..total {
                if !(start / stride).is_multiple_of(m) {
                    continue;
                }
                for i in 0..m {
                    line[i] = data[start + i * stride];
                }
                plan.process(&mut line);
                for i in 0..m {
                    data[start + i * stride] = line[i];
                }
            }
        }
    }

    /// x = (P_flat − z)⁻¹ b.
    pub fn apply(&self, z: C64, b: &[C64]) -> Vec<C64> {
        let total = self.symbol.len();
        let scale = 1.0 / total as f64;
        let mut out = vec![C64::new(0.0, 0.0); b.len()];
        let mut comp = vec![C64::new(0.0, 0.0); total];
        for s in 0..self.fiber {
            for i in 0..total {
                comp[i] = b[i * self.fiber + s];
            }
            self.transform(&mut comp, &self.fwd);
            for i in 0..total {
                comp[i] /= C64::new(self.symbol[i], 0.0) - z;
            }
            self.transform(&mut comp, &self.inv);
            for i in 0..total {
                out[i * self.fiber + s] = comp[i] * scale;
            }
        }
        out
    }
}

enum Factor {
    Dense(nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>, std::sync::OnceLock<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>>),
    Sparse(faer::sparse::linalg::solvers::Lu<usize, C64>),
    Iterative,
}

/// A factorization (or iterative setup) of P − z, reusable for many
/// right-hand sides.
pub struct ShiftedSolver<'a> {
    shifted: CsrMatrix,
    z: C64,
    factor: Factor,
    precond: Option<&'a FlatTorusPreconditioner>,
    opts: SolverOptions,
    scale: f64,
}

impl<'a> ShiftedSolver<'a> {
    pub fn new(p: &CsrMatrix, z: C64, precond: Option<&'a FlatTorusPreconditioner>, opts: SolverOptions) -> Result<Self> {
        if p.nrows != p.ncols {
            return Err(Error::InvalidInput("resolvent of a non-square matrix".into()));
        }
        let shifted = p.shifted(z);
        let n = p.nrows;
        let scale = p.inf_norm() + z.norm();
        let factor = if n <= opts.dense_limit {
            let lu = shifted.to_dense().lu();
            let u = lu.u();
            let dmax = u.diagonal().iter().map(|v| v.norm()).fold(0.0, f64::max);
            let dmin = u.diagonal().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            if !(dmin > 1e-14 * dmax.max(scale)) {
                return Err(Error::NearSpectrum { z, estimate: dmin });
            }
            Factor::Dense(lu, std::sync::OnceLock::new())
        } else if n <= opts.direct_limit || precond.is_none() {
            let trip: Vec<Triplet<usize, usize, C64>> =
                (0..n).flat_map(|i| shifted.row(i).map(move |(j, v)| Triplet::new(i, j, v)).collect::<Vec<_>>()).collect();
            let mat = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &trip)
                .map_err(|e| Error::InvalidInput(format!("sparse matrix construction failed: {e:?}")))?;
            let lu = mat.sp_lu().map_err(|_| Error::NearSpectrum { z, estimate: 0.0 })?;
            Factor::Sparse(lu)
        } else {
            Factor::Iterative
        };
        Ok(ShiftedSolver { shifted, z, factor, precond, opts, scale })
    }

    pub fn shift(&self) -> C64 {
        self.z
    }

    pub fn dim(&self) -> usize {
        self.shifted.nrows
    }

    fn raw_solve(&self, b: &[C64], adjoint: bool) -> Result<Vec<C64>> {
        match &self.factor {
            Factor::Dense(lu, adj) => {
                let rhs = DVector::from_column_slice(b);
                let x = if adjoint { adj.get_or_init(|| self.shifted.transpose_conj().to_dense().lu()).solve(&rhs) } else { lu.solve(&rhs) };
                x.map(|v| v.as_slice().to_vec()).ok_or(Error::NearSpectrum { z: self.z, estimate: 0.0 })
            }
            Factor::Sparse(lu) => {
                let rhs = faer::Mat::<C64>::from_fn(b.len(), 1, |i, _| b[i]);
                let x = if adjoint { lu.solve_adjoint(&rhs) } else { lu.solve(&rhs) };
                Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
            }
            Factor::Iterative => self.gmres(b, adjoint),
        }
    }

    fn apply(&self, x: &[C64], adjoint: bool) -> Vec<C64> {
        if adjoint {
            self.shifted.matvec_adjoint(x)
        } else {
            self.shifted.matvec(x)
        }
    }

    fn residual(&self, x: &[C64], b: &[C64], adjoint: bool) -> (Vec<C64>, f64) {
        let ax = self.apply(x, adjoint);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let nb = norm2(b);
        let rel = if nb == 0.0 { norm2(&r) } else { norm2(&r) / nb };
        (r, rel)
    }

    fn certified(&self, b: &[C64], adjoint: bool) -> Result<Solution> {
        if b.len() != self.dim() {
            return Err(Error::InvalidInput(format!("right-hand side of length {} for a system of size {}", b.len(), self.dim())));
        }
        if b.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            return Ok(Solution { x: vec![C64::new(0.0, 0.0); b.len()], residual: 0.0 });
        }
        let mut x = self.raw_solve(b, adjoint)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NearSpectrum { z: self.z, estimate: 0.0 });
        }
        let (mut r, mut rel) = self.residual(&x, b, adjoint);
        for _ in 0..2 {
            if rel <= self.opts.tol {
                break;
            }
            let dx = self.raw_solve(&r, adjoint)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            (r, rel) = self.residual(&x, b, adjoint);
        }
        let estimate = norm2(b) / norm2(&x);
        if rel > self.opts.tol || !rel.is_finite() {
            return match self.factor {
                Factor::Iterative => Err(Error::NonConvergence { residual: rel, iterations: self.opts.gmres_max_iter }),
                _ => Err(Error::NearSpectrum { z: self.z, estimate }),
            };
        }
        if estimate < 1e-13 * self.scale {
            return Err(Error::NearSpectrum { z: self.z, estimate });
        }
        Ok(Solution { x, residual: rel })
    }

    /// Solve (P − z)x = b.
    pub fn solve(&self, b: &[C64]) -> Result<Solution> {
        self.certified(b, false)
    }

    /// Solve (P − z)ᴴx = b.
    pub fn solve_adjoint(&self, b: &[C64]) -> Result<Solution> {
        self.certified(b, true)
    }

    /// Right-preconditioned restarted GMRES.
    fn gmres(&self, b: &[C64], adjoint: bool) -> Result<Vec<C64>> {
        let pc = self.precond.ok_or_else(|| Error::InvalidInput("iterative solve needs a preconditioner".into()))?;
        let zc = if adjoint { self.z.conj() } else { self.z };
        let precondition = |v: &[C64]| pc.apply(zc, v);
        let n = b.len();
        let nb = norm2(b);
        let restart = self.opts.gmres_restart.max(2);
        let mut x = vec![C64::new(0.0, 0.0); n];
        let mut iters = 0;
        loop {
            let ax = self.apply(&x, adjoint);
            let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let beta = norm2(&r);
            if beta <= 0.1 * self.opts.tol * nb {
                return Ok(x);
            }
            if iters >= self.opts.gmres_max_iter {
                return Err(Error::NonConvergence { residual: beta / nb, iterations: iters });
            }
            let mut v: Vec<Vec<C64>> = vec![r.iter().map(|c| c / beta).collect()];
            let mut h = vec![vec![C64::new(0.0, 0.0); restart]; restart + 1];
            let mut cs = vec![C64::new(0.0, 0.0); restart];
            let mut sn = vec![C64::new(0.0, 0.0); restart];
            let mut g = vec![C64::new(0.0, 0.0); restart + 1];
            g[0] = C64::new(beta, 0.0);
            let mut k_used = 0;
            for k in 0..restart {
                iters += 1;
                let w0 = precondition(&v[k]);
                let mut w = self.apply(&w0, adjoint);
                for (j, vj) in v.iter().enumerate() {
                    let hj: C64 = vj.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    h[j][k] = hj;
                    for (wi, vi) in w.iter_mut().zip(vj) {
                        *wi -= hj * vi;
                    }
                }
                let hn = norm2(&w);
                h[k + 1][k] = C64::new(hn, 0.0);
                for j in 0..k {
                    let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                    h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                    h[j][k] = t;
                }
                let (a, bb) = (h[k][k], h[k + 1][k]);
                let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
                if den == 0.0 {
                    k_used = k;
                    break;
                }
                cs[k] = a / den;
                sn[k] = bb / den;
                h[k][k] = C64::new(den, 0.0);
                h[k + 1][k] = C64::new(0.0, 0.0);
                g[k + 1] = -sn[k] * g[k];
                g[k] = cs[k].conj() * g[k];
                k_used = k + 1;
                if g[k + 1].norm() <= 0.1 * self.opts.tol * nb || hn == 0.0 || iters >= self.opts.gmres_max_iter {
                    break;
                }
                v.push(w.iter().map(|c| c / hn).collect());
            }
            let mut y = vec![C64::new(0.0, 0.0); k_used];
            for i in (0..k_used).rev() {
                let mut s = g[i];
                for j in i + 1..k_used {
                    s -= h[i][j] * y[j];
                }
                y[i] = s / h[i][i];
            }
            let mut update = vec![C64::new(0.0, 0.0); n];
            for (j, yj) in y.iter().enumerate() {
                for (u, vi) in update.iter_mut().zip(&v[j]) {
                    *u += yj * vi;
                }
            }
            let corr = precondition(&update);
            for (xi, ci) in x.iter_mut().zip(&corr) {
                *xi += ci;
            }
        }
    }
}

/// Dense inverse of P − z with certified residual, for small matrices.
pub fn dense_resolvent(p: &DMatrix<C64>, z: C64, tol: f64) -> Result<DMatrix<C64>> {
    let n = p.nrows();
    let a = p - DMatrix::<C64>::identity(n, n) * z;
    let lu = a.clone().lu();
    let u = lu.u();
    let dmax = u.diagonal().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dmin = u.diagonal().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-14 * dmax) {
        return Err(Error::NearSpectrum { z, estimate: dmin });
    }
    let inv = lu.try_inverse().ok_or(Error::NearSpectrum { z, estimate: dmin })?;
    let r = (&a * &inv - DMatrix::<C64>::identity(n, n)).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if r > tol.max(1e-8) * (1.0 + inv.norm()) {
        return Err(Error::NearSpectrum { z, estimate: 1.0 / inv.norm() });
    }
    Ok(inv)
}
