//! Complex powers (P − iε)^{−α} as contour sums of resolvents.

use super::contour::{branch_power, Contour, ContourSpec};
use super::lattice::LatticeOperator;
use super::solver::{FlatTorusPreconditioner, ShiftedSolver, SolverOptions};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::special::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const CHUNK: usize = 16;

/// Kahan-compensated running sum of equally shaped arrays.
#[derive(Clone, Debug)]
struct Accumulator {
    sum: Vec<C64>,
    comp: Vec<C64>,
}

impl Accumulator {
    fn new(len: usize) -> Self {
        Accumulator { sum: vec![C64::new(0.0, 0.0); len], comp: vec![C64::new(0.0, 0.0); len] }
    }

    fn add_scaled(&mut self, coef: C64, values: &[C64]) {
        for ((s, c), v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(values) {
            let y = coef * v - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.add_scaled(C64::new(1.0, 0.0), &other.sum);
        let neg: Vec<C64> = other.comp.iter().map(|c| -c).collect();
        self.add_scaled(C64::new(1.0, 0.0), &neg);
    }
}

fn check_alphas(contour: &Contour, alphas: &[C64]) -> Result<()> {
    for &a in alphas {
        if !(a.re > 0.0) {
            return Err(Error::InvalidInput(format!("contour powers need Re α > 0 (got {a})")));
        }
    }
    if contour.is_empty() {
        return Err(Error::ContourFailure("contour has no nodes".into()));
    }
    Ok(())
}

/// Per-node coefficients w_j (z_j − iε)^{−α}/(2πi), indexed [node][α].
fn node_coefficients(contour: &Contour, alphas: &[C64]) -> Result<Vec<Vec<C64>>> {
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    contour
        .nodes
        .iter()
        .zip(&contour.weights)
        .map(|(&z, &w)| alphas.iter().map(|&a| Ok(w * branch_power(z, contour.epsilon, a)? / two_pi_i)).collect())
        .collect()
}

/// Run `work` on every node in fixed chunks (in parallel) and merge the
/// per-chunk sums in node order, so the result does not depend on the
/// number of worker threads.
fn accumulate<F>(contour: &Contour, alphas: &[C64], len: usize, work: F) -> Result<Vec<Vec<C64>>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    let coefs = node_coefficients(contour, alphas)?;
    let indices: Vec<usize> = (0..contour.len()).collect();
    let partial: Vec<Result<Vec<Accumulator>>> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Accumulator::new(len); alphas.len()];
            for &j in chunk {
                let r = work(contour.nodes[j])?;
                for (k, a) in acc.iter_mut().enumerate() {
                    a.add_scaled(coefs[j][k], &r);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Accumulator::new(len); alphas.len()];
    for chunk in partial {
        for (t, c) in total.iter_mut().zip(chunk?.iter()) {
            t.merge(c);
        }
    }
    Ok(total.into_iter().map(|a| a.sum).collect())
}

/// Dense (A − z)⁻¹, certified by the residual on two probe vectors.
pub fn certified_inverse(a: &DMatrix<C64>, z: C64, tol: f64) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let shifted = a - DMatrix::<C64>::identity(n, n) * z;
    let inv = shifted.clone().lu().try_inverse().ok_or(Error::NearSpectrum { z, estimate: 0.0 })?;
    let probes = DMatrix::from_fn(n, 2, |i, j| C64::new(((i * 7 + 3 * j) % 11) as f64 - 5.0, ((i * 5 + j) % 7) as f64 - 3.0));
    let res = (&shifted * (&inv * &probes) - &probes).norm() / probes.norm();
    if !(res <= tol) {
        return Err(Error::NearSpectrum { z, estimate: 1.0 / inv.norm() });
    }
    Ok(inv)
}

/// Inverse of the upper-triangular T − z, with T stored row-major.
fn triangular_resolvent(t: &[C64], n: usize, z: C64) -> Vec<C64> {
    let mut x = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        x[j * n + j] = 1.0 / (t[j * n + j] - z);
        for i in (0..j).rev() {
            let mut s = C64::new(0.0, 0.0);
            for k in i + 1..=j {
                s += t[i * n + k] * x[k * n + j];
            }
            x[i * n + j] = -s / (t[i * n + i] - z);
        }
    }
    x
}

/// (A − iε)^{−α} for every α in `alphas`, with one resolvent per node shared
/// across exponents. The resolvents are taken in a Schur basis A = QTQᴴ,
/// where each one is a triangular inverse, and the sum is rotated back once.
pub fn complex_power_dense(a: &DMatrix<C64>, contour: &Contour, alphas: &[C64]) -> Result<Vec<DMatrix<C64>>> {
    check_alphas(contour, alphas)?;
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidInput("complex power of a non-square matrix".into()));
    }
    let scale = a.norm().max(1.0);
    let schur = nalgebra::Schur::try_new(a.clone(), 1e-15 * scale, 10_000).ok_or(Error::NonConvergence { residual: f64::NAN, iterations: 10_000 })?;
    let (q, t) = schur.unpack();
    let recon = (&q * &t * q.adjoint() - a).norm() / scale;
    if !(recon <= 1e-12) {
        return Err(Error::NonConvergence { residual: recon, iterations: 10_000 });
    }
    let t_rows: Vec<C64> = (0..n * n).map(|k| t[(k / n, k % n)]).collect();
    let diag: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let sums = accumulate(contour, alphas, n * n, |z| {
        let gap = diag.iter().map(|d| (d - z).norm()).fold(f64::INFINITY, f64::min);
        if !(gap > 1e-12 * scale) {
            return Err(Error::NearSpectrum { z, estimate: gap });
        }
        Ok(triangular_resolvent(&t_rows, n, z))
    })?;
    let qh = q.adjoint();
    Ok(sums.into_iter().map(|s| &q * DMatrix::from_row_slice(n, n, &s) * &qh).collect())
}

/// (P − iε)^{−α} applied to each right-hand side; the result is indexed
/// [α][rhs].
pub fn apply_power(
    p: &CsrMatrix,
    precond: Option<&FlatTorusPreconditioner>,
    contour: &Contour,
    alphas: &[C64],
    rhs: &[Vec<C64>],
    opts: SolverOptions,
) -> Result<Vec<Vec<Vec<C64>>>> {
    check_alphas(contour, alphas)?;
    let dim = p.nrows;
    if rhs.iter().any(|b| b.len() != dim) {
        return Err(Error::InvalidInput("right-hand side length does not match the operator".into()));
    }
    let sums = accumulate(contour, alphas, dim * rhs.len(), |z| {
        let solver = ShiftedSolver::new(p, z, precond, opts)?;
        let mut out = Vec::with_capacity(dim * rhs.len());
        for b in rhs {
            out.extend(solver.solve(b)?.x);
        }
        Ok(out)
    })?;
    Ok(sums.into_iter().map(|s| s.chunks(dim).map(|c| c.to_vec()).collect()).collect())
}

/// Smallest integer k ≥ 0 with Re(α + k) ≥ re_min.
pub fn exponent_shift(alpha: C64, re_min: f64) -> usize {
    if alpha.re >= re_min {
        0
    } else {
        (re_min - alpha.re).ceil() as usize
    }
}

/// How a [`ZetaSample`] value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Contour,
    FlatClosedForm,
    Eigendecomposition,
}

/// One on-diagonal value (fibre trace) of a density of (P ∓ iε)^{−α}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaSample {
    pub alpha: C64,
    pub epsilon: f64,
    /// Base point; empty for translation-invariant densities.
    pub x: Vec<f64>,
    pub value: C64,
    pub provenance: Provenance,
}

/// Diagnostics of a zeta-diagonal computation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZetaReport {
    pub samples: Vec<ZetaSample>,
    pub contour_nodes: usize,
    /// Distance from the nodes to the certified spectral rectangle.
    pub certified_distance: f64,
}

/// Fibre trace of the (x, x) block of (P − iε)^{−α} divided by the volume
/// element at x, for all α and x. Exponents with Re α < 0.2 are reached
/// through (P − iε)^k (P − iε)^{−α−k}; α = 0 gives the identity.
pub fn zeta_diagonal(
    op: &LatticeOperator,
    spec: &ContourSpec,
    alphas: &[C64],
    points: &[Vec<f64>],
    im_bound: f64,
    opts: SolverOptions,
) -> Result<ZetaReport> {
    const RE_MIN: f64 = 0.2;
    let eps = spec.epsilon;
    let nodes: Vec<usize> = points.iter().map(|x| op.nearest_node(x)).collect::<Result<_>>()?;
    let shifts: Vec<usize> = alphas.iter().map(|&a| if a == C64::new(0.0, 0.0) { 0 } else { exponent_shift(a, RE_MIN) }).collect();
    let shifted: Vec<C64> = alphas.iter().zip(&shifts).filter(|(a, _)| **a != C64::new(0.0, 0.0)).map(|(a, &k)| a + k as f64).collect();
    let scale = op.matrix.inf_norm();
    let mut rhs = Vec::new();
    for &node in &nodes {
        for c in 0..op.fiber {
            let mut e = vec![C64::new(0.0, 0.0); op.dim()];
            e[node * op.fiber + c] = C64::new(1.0, 0.0);
            rhs.push(e);
        }
    }
    let (columns, contour_nodes, certified_distance) = if shifted.is_empty() {
        (Vec::new(), 0, f64::INFINITY)
    } else {
        let re_min = shifted.iter().map(|a| a.re).fold(f64::INFINITY, f64::min);
        let abs_max = shifted.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let contour = Contour::build(spec, scale, (re_min, abs_max))?;
        let dist = contour.distance_to_strip(scale, im_bound);
        if !(dist > 0.0) {
            return Err(Error::ContourFailure(format!("contour meets the spectral strip |Im λ| ≤ {im_bound:.3e}")));
        }
        let pc = op.preconditioner();
        let cols = apply_power(&op.matrix, Some(&pc), &contour, &shifted, &rhs, opts)?;
        (cols, contour.len(), dist)
    };
    let shifted_op = op.matrix.shifted(C64::new(0.0, eps));
    let mut samples = Vec::new();
    let mut col_index = 0;
    for (ai, &alpha) in alphas.iter().enumerate() {
        let is_zero = alpha == C64::new(0.0, 0.0);
        for (xi, &node) in nodes.iter().enumerate() {
            let w = op.weights[node];
            let mut trace = C64::new(0.0, 0.0);
            for c in 0..op.fiber {
                let row = node * op.fiber + c;
                if is_zero {
                    trace += 1.0;
                    continue;
                }
                let mut y = columns[col_index][xi * op.fiber + c].clone();
                for _ in 0..shifts[ai] {
                    y = shifted_op.matvec(&y);
                }
                trace += y[row];
            }
            samples.push(ZetaSample { alpha, epsilon: eps, x: op.coords(node), value: trace / w, provenance: Provenance::Contour });
        }
        if !is_zero {
            col_index += 1;
        }
    }
    Ok(ZetaReport { samples, contour_nodes, certified_distance })
}

/// N·Σ_k (s(k) − iε)^{−α}/(2L)ⁿ, the exact diagonal of the flat lattice
/// operator through its Fourier symbol.
pub fn flat_zeta_density(op: &LatticeOperator, epsilon: f64, alpha: C64) -> Result<C64> {
    let mut acc = crate::special::CompensatedSum::new();
    for &s in &op.flat_symbol {
        acc.add(branch_power(C64::new(s, 0.0), epsilon, alpha)?);
    }
    Ok(acc.value() * op.fiber as f64 / (2.0 * op.half_width).powi(op.n as i32))
}

/// Difference of two contour realizations of (A − iε)^{−α} and its rank.
#[derive(Clone, Debug)]
pub struct AmbiguityReport {
    pub difference: DMatrix<C64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub norm: f64,
    /// Reference magnitude, the largest singular value of the first power.
    pub reference: f64,
}

/// Rank counts singular values above 1e-8·max(σ_max(diff), ‖power‖₂).
pub fn contour_ambiguity(a: &DMatrix<C64>, contour_a: &Contour, contour_b: &Contour, alpha: C64) -> Result<AmbiguityReport> {
    if contour_a.epsilon != contour_b.epsilon {
        return Err(Error::InvalidInput("contours with different shifts".into()));
    }
    let pa = complex_power_dense(a, contour_a, &[alpha])?.remove(0);
    let pb = complex_power_dense(a, contour_b, &[alpha])?.remove(0);
    let difference = pb - &pa;
    let reference = pa.clone().singular_values().max();
    let mut singular_values: Vec<f64> = difference.clone().singular_values().iter().copied().collect();
    singular_values.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    let norm = singular_values.first().copied().unwrap_or(0.0);
    let threshold = 1e-8 * norm.max(reference);
    let rank = singular_values.iter().filter(|&&s| s > threshold).count();
    Ok(AmbiguityReport { difference, singular_values, rank, norm, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::testmat::{strip_spectrum, PlantedMatrix};

    fn spec() -> ContourSpec {
        ContourSpec { epsilon: 1.0, theta: 0.75 * PI, rtrunc: None, nodes_per_unit: 16.0 }
    }

    fn rel(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn scalar_power() {
        let a = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let c = Contour::build(&spec(), 1.0, (1.0, 1.0)).unwrap();
        let v = complex_power_dense(&a, &c, &[C64::new(1.0, 0.0)]).unwrap();
        assert!((v[0][(0, 0)] - C64::new(0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn planted_normal_and_semigroup() {
        let ev = strip_spectrum(30, 4.0, 0.5, 7);
        let p = PlantedMatrix::normal(&ev, 8);
        let alphas = [C64::new(0.5, 0.0), C64::new(1.0, 0.0), C64::new(1.5, 0.3)];
        let mut c = Contour::build(&spec(), 6.0, (0.5, 2.0)).unwrap();
        c.avoid(&ev, 1e-2).unwrap();
        let pw = complex_power_dense(&p.matrix, &c, &alphas).unwrap();
        for (k, &a) in alphas.iter().enumerate() {
            let oracle = p.power(1.0, a).unwrap();
            assert!(rel(&pw[k], &oracle) < 1e-10, "{a}: {}", rel(&pw[k], &oracle));
        }
        let prod = &pw[0] * &pw[1];
        let direct = p.power(1.0, C64::new(1.5, 0.0)).unwrap();
        assert!(rel(&prod, &direct) < 1e-9);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let ev = strip_spectrum(10, 3.0, 0.4, 1);
        let p = PlantedMatrix::non_normal(&ev, 0.5, 2).unwrap();
        let c = Contour::build(&spec(), 4.0, (1.0, 1.0)).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| complex_power_dense(&p.matrix, &c, &[C64::new(1.0, 0.0)]).unwrap());
        let b = three.install(|| complex_power_dense(&p.matrix, &c, &[C64::new(1.0, 0.0)]).unwrap());
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn ambiguity_rank_of_a_jordan_block() {
        let lam = C64::new(1.0, 4.0);
        let mut blocks: Vec<(C64, usize)> = strip_spectrum(8, 3.0, 0.5, 4).into_iter().map(|l| (l, 1)).collect();
        blocks.push((lam, 2));
        let p = PlantedMatrix::with_blocks(blocks, 0.3, 5).unwrap();
        let a = Contour::build(&spec(), 5.0, (0.5, 0.5)).unwrap();
        let mut b = a.clone();
        b.enclose(lam, 0.3).unwrap();
        let alpha = C64::new(0.5, 0.0);
        let rep = contour_ambiguity(&p.matrix, &a, &b, alpha).unwrap();
        assert_eq!(rep.rank, 2);
        let oracle = p.power_component(lam, 1.0, alpha);
        assert!(rel(&rep.difference, &oracle) < 1e-9);
        let same = contour_ambiguity(&p.matrix, &a, &a, alpha).unwrap();
        assert_eq!(same.rank, 0);
    }
}
