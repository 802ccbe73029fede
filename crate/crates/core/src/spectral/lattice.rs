//! Periodic lattice discretizations of P = −Ð² and of the scalar wave
//! operator.

use super::solver::FlatTorusPreconditioner;
use super::sparse::{norm2, CsrMatrix};
use crate::clifford::{dirac_coefficients, Boundary, CliffordRep, SectionGrid, Twist};
use crate::error::{Error, Result};
use crate::geometry::{euclid_sq, MetricFamily};
use crate::special::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    /// −Ð² with Ð the central-difference Dirac operator, squared as a matrix.
    DiracSquared,
    /// |g|^{−1/2}∂_μ(|g|^{1/2}g^{μν}∂_ν), scalar fibre.
    WaveScalar,
}

/// Box [−L, L)ⁿ with m nodes per side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub m: usize,
}

#[derive(Clone, Debug)]
pub struct LatticeOperator {
    pub n: usize,
    pub m: usize,
    pub half_width: f64,
    pub hx: f64,
    pub fiber: usize,
    pub assembly: Assembly,
    pub family: MetricFamily,
    pub matrix: CsrMatrix,
    /// Discrete volume element |g|^{1/2}hxⁿ per node.
    pub weights: Vec<f64>,
    /// Fourier symbol of the flat operator, indexed like the nodes.
    pub flat_symbol: Vec<f64>,
    /// Radius outside of which the coefficients are treated as flat.
    pub support_radius: f64,
}

fn stencil_reach(assembly: Assembly) -> f64 {
    match assembly {
        Assembly::DiracSquared => 2.0,
        Assembly::WaveScalar => 1.0,
    }
}

impl LatticeOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    fn shape(&self) -> SectionGrid {
        SectionGrid {
            n: self.n,
            m: self.m,
            half_width: self.half_width,
            hx: self.hx,
            fiber: self.fiber,
            boundary: Boundary::Periodic,
            values: Vec::new(),
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.shape().coords(node)
    }

    /// Node nearest to x (coordinates wrapped into the box).
    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::InvalidInput(format!("point {x:?} has the wrong dimension")));
        }
        let mut idx = 0;
        let mut stride = 1;
        for &c in x {
            let i = ((c + self.half_width) / self.hx).round() as isize;
            idx += i.rem_euclid(self.m as isize) as usize * stride;
            stride *= self.m;
        }
        Ok(idx)
    }

    /// True when the node's rows only involve flat coefficients.
    pub fn outside_support(&self, node: usize) -> bool {
        let reach = (stencil_reach(self.assembly) + 1.0) * self.hx * (self.n as f64).sqrt();
        euclid_sq(&self.coords(node)).sqrt() > self.support_radius + reach
    }

    /// Q = W^{1/2}PW^{−1/2}, the operator in coordinates where the weighted
    /// inner product is Euclidean.
    pub fn weighted(&self) -> CsrMatrix {
        let mut q = self.matrix.clone();
        let f = self.fiber;
        for i in 0..q.nrows {
            let wi = self.weights[i / f].sqrt();
            for k in q.indptr[i]..q.indptr[i + 1] {
                let wj = self.weights[q.indices[k] / f].sqrt();
                q.values[k] *= wi / wj;
            }
        }
        q
    }

    pub fn preconditioner(&self) -> FlatTorusPreconditioner {
        FlatTorusPreconditioner::new(self.n, self.m, self.fiber, self.flat_symbol.clone())
    }

    /// Weighted norm (Σ W|u|²)^{1/2}.
    pub fn weighted_norm(&self, u: &[C64]) -> f64 {
        u.iter().enumerate().map(|(i, v)| self.weights[i / self.fiber] * v.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn check_support(family: &MetricFamily, grid: &GridSpec, assembly: Assembly) -> Result<f64> {
    let n = family.dim();
    if grid.m < 8 || !(grid.half_width > 0.0 && grid.half_width.is_finite()) {
        return Err(Error::Config(format!("grid needs m >= 8 and L > 0 (got m = {}, L = {})", grid.m, grid.half_width)));
    }
    let hx = 2.0 * grid.half_width / grid.m as f64;
    let radius = match family {
        MetricFamily::Warped { .. } => {
            return Err(Error::Config("warped families are not compactly supported in space and cannot be placed on a periodic box".into()))
        }
        _ => family.perturbation_radius().unwrap_or_else(|| family.effective_radius(1e-12)),
    };
    let margin = (stencil_reach(assembly) + 1.0) * hx;
    if radius + margin >= grid.half_width {
        return Err(Error::Config(format!(
            "perturbation of radius {radius:.4} does not fit inside the box [-{L}, {L})^{n} with stencil margin {margin:.4}",
            L = grid.half_width
        )));
    }
    Ok(radius)
}

fn flat_symbol(n: usize, m: usize, hx: f64, assembly: Assembly) -> Vec<f64> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|idx| {
            let mut r = idx;
            let mut s = 0.0;
            for axis in 0..n {
                let j = r % m;
                r /= m;
                let k = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                let v = match assembly {
                    Assembly::DiracSquared => k.sin().powi(2) / (hx * hx),
                    Assembly::WaveScalar => 4.0 * (0.5 * k).sin().powi(2) / (hx * hx),
                };
                s += if axis == 0 { -v } else { v };
            }
            s
        })
        .collect()
}

/// Assemble the lattice operator on a periodic grid.
pub fn assemble(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, grid: GridSpec, assembly: Assembly) -> Result<LatticeOperator> {
    let n = family.dim();
    let radius = check_support(family, &grid, assembly)?;
    twist.validate(n)?;
    if let Twist::U1 { b, .. } = twist {
        if b.iter().flatten().any(|v| *v != 0.0) {
            return Err(Error::Config("a potential linear in x is not periodic; only constant twists fit on the torus".into()));
        }
    }
    let fiber = match assembly {
        Assembly::DiracSquared => {
            if rep.n != n {
                return Err(Error::Config(format!("representation for n = {} used with an n = {n} metric", rep.n)));
            }
            rep.rank
        }
        Assembly::WaveScalar => 1,
    };
    let shape = SectionGrid::zeros(n, grid.m, grid.half_width, fiber, Boundary::Periodic)?;
    let hx = shape.hx;
    let nodes = shape.nodes();
    let weights: Vec<f64> = (0..nodes)
        .into_par_iter()
        .map(|i| family.metric_at(&shape.coords(i)).map(|g| g.determinant().abs().sqrt() * hx.powi(n as i32)))
        .collect::<Result<_>>()?;
    let matrix = match assembly {
        Assembly::DiracSquared => dirac_squared(family, rep, twist, &shape)?,
        Assembly::WaveScalar => wave_scalar(family, &shape)?,
    };
    Ok(LatticeOperator {
        n,
        m: grid.m,
        half_width: grid.half_width,
        hx,
        fiber,
        assembly,
        family: family.clone(),
        matrix,
        weights,
        flat_symbol: flat_symbol(n, grid.m, hx, assembly),
        support_radius: radius,
    })
}

fn dirac_squared(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, shape: &SectionGrid) -> Result<CsrMatrix> {
    let n = shape.n;
    let f = shape.fiber;
    let nn = f * f;
    let coef = dirac_coefficients(family, rep, twist, shape)?;
    let inv2h = 0.5 / shape.hx;
    let mut trip = Vec::with_capacity(shape.nodes() * (2 * n + 1) * nn);
    for i in 0..shape.nodes() {
        let z = &coef.zeroth[i * nn..(i + 1) * nn];
        for a in 0..f {
            for b in 0..f {
                trip.push((i * f + a, i * f + b, z[a * f + b]));
            }
        }
        for mu in 0..n {
            let g = &coef.gamma_upper[(i * n + mu) * nn..(i * n + mu + 1) * nn];
            for (shift, sign) in [(1isize, 1.0), (-1, -1.0)] {
                let j = shape.neighbor(i, mu, shift).expect("periodic grid");
                for a in 0..f {
                    for b in 0..f {
                        trip.push((i * f + a, j * f + b, g[a * f + b] * (sign * inv2h)));
                    }
                }
            }
        }
    }
    let d = CsrMatrix::from_triplets(shape.nodes() * f, shape.nodes() * f, &trip)?;
    let mut p = d.mul(&d)?.scale(C64::new(-1.0, 0.0));
    p.drop_zeros();
    Ok(p)
}

fn wave_scalar(family: &MetricFamily, shape: &SectionGrid) -> Result<CsrMatrix> {
    let n = shape.n;
    let h = shape.hx;
    // a^{μν} = |g|^{1/2} g^{μν}
    let densitized = |x: &[f64]| -> Result<nalgebra::DMatrix<f64>> {
        let g = family.metric_at(x)?;
        let sd = g.determinant().abs().sqrt();
        let gi = g.try_inverse().ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
        Ok(gi * sd)
    };
    let rows: Vec<Vec<(usize, usize, C64)>> = (0..shape.nodes())
        .into_par_iter()
        .map(|i| {
            let x = shape.coords(i);
            let sd = family.metric_at(&x)?.determinant().abs().sqrt();
            let mut row = Vec::new();
            let mut push = |j: usize, v: f64| row.push((i, j, C64::new(v / sd, 0.0)));
            for mu in 0..n {
                for (shift, half) in [(1isize, 0.5), (-1, -0.5)] {
                    let mut xm = x.clone();
                    xm[mu] += half * h;
                    let a = densitized(&xm)?[(mu, mu)] / (h * h);
                    let j = shape.neighbor(i, mu, shift).expect("periodic grid");
                    push(j, a);
                    push(i, -a);
                }
                for nu in 0..n {
                    if nu == mu {
                        continue;
                    }
                    for (s_mu, sign) in [(1isize, 1.0), (-1, -1.0)] {
                        let mut xm = x.clone();
                        xm[mu] += s_mu as f64 * h;
                        let a = densitized(&xm)?[(mu, nu)] * sign / (4.0 * h * h);
                        let j = shape.neighbor(i, mu, s_mu).expect("periodic grid");
                        push(shape.neighbor(j, nu, 1).expect("periodic grid"), a);
                        push(shape.neighbor(j, nu, -1).expect("periodic grid"), -a);
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let trip: Vec<_> = rows.into_iter().flatten().collect();
    let mut p = CsrMatrix::from_triplets(shape.nodes(), shape.nodes(), &trip)?;
    p.drop_zeros();
    Ok(p)
}

/// Size of the non-self-adjoint part of P in the weighted inner product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefectReport {
    /// Power-iteration estimate of ‖Q − Qᴴ‖₂, Q = W^{1/2}PW^{−1/2}.
    pub norm: f64,
    /// Largest |(Q − Qᴴ)_ij| over rows whose node lies outside the support.
    pub outside_support_max: f64,
    /// Largest |(Q − Qᴴ)_ij| over all rows.
    pub entry_max: f64,
    pub iterations: usize,
}

/// ‖P − P*‖ with respect to the weighted L² product Σ W⟨u, v⟩.
pub fn adjoint_defect(op: &LatticeOperator, max_iter: usize, seed: u64) -> DefectReport {
    let q = op.weighted();
    let qh = q.transpose_conj();
    let mut trip = Vec::with_capacity(2 * q.nnz());
    for i in 0..q.nrows {
        for (j, v) in q.row(i) {
            trip.push((i, j, v));
        }
        for (j, v) in qh.row(i) {
            trip.push((i, j, -v));
        }
    }
    let mut k = CsrMatrix::from_triplets(q.nrows, q.ncols, &trip).expect("indices in range");
    k.drop_zeros();
    let mut outside: f64 = 0.0;
    let mut entry: f64 = 0.0;
    for i in 0..k.nrows {
        let row_max = k.row(i).map(|(_, v)| v.norm()).fold(0.0, f64::max);
        entry = entry.max(row_max);
        if op.outside_support(i / op.fiber) {
            outside = outside.max(row_max);
        }
    }
    if k.nnz() == 0 {
        return DefectReport { norm: 0.0, outside_support_max: 0.0, entry_max: 0.0, iterations: 0 };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..k.nrows).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = 0.0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let w = k.matvec(&k.matvec(&v));
        let nw = norm2(&w);
        if nw == 0.0 {
            break;
        }
        let new = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
        if (new - est).abs() <= 1e-10 * new {
            est = new;
            break;
        }
        est = new;
    }
    DefectReport { norm: est, outside_support_max: outside, entry_max: entry, iterations: it }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma;
    use crate::geometry::BumpProfile;

    fn plane_wave(op: &LatticeOperator, k: &[usize], comp: usize) -> Vec<C64> {
        let mut u = vec![C64::new(0.0, 0.0); op.dim()];
        for node in 0..op.nodes() {
            let mut r = node;
            let mut phase = 0.0;
            for &kk in k {
                phase += 2.0 * std::f64::consts::PI * (kk * (r % op.m)) as f64 / op.m as f64;
                r /= op.m;
            }
            u[node * op.fiber + comp] = C64::from_polar(1.0, phase);
        }
        u
    }

    #[test]
    fn flat_plane_waves_are_eigenvectors() {
        let fam = MetricFamily::minkowski(2).unwrap();
        let rep = build_gamma(2, 1).unwrap();
        for assembly in [Assembly::DiracSquared, Assembly::WaveScalar] {
            let op = assemble(&fam, &rep, &Twist::None, GridSpec { half_width: 1.0, m: 16 }, assembly).unwrap();
            let k = [3usize, 2];
            let u = plane_wave(&op, &k, 0);
            let pu = op.matrix.matvec(&u);
            let idx = k[0] + op.m * k[1];
            let lam = op.flat_symbol[idx];
            let err = pu.iter().zip(&u).map(|(a, b)| (a - b * lam).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10 * lam.abs().max(1.0), "{assembly:?}: {err}");
            let hx: f64 = op.hx;
            let expected = match assembly {
                Assembly::DiracSquared => {
                    ((2.0 * std::f64::consts::PI * 2.0 / 16.0).sin().powi(2) - (2.0 * std::f64::consts::PI * 3.0 / 16.0).sin().powi(2)) / (hx * hx)
                }
                Assembly::WaveScalar => {
                    4.0 * ((std::f64::consts::PI * 2.0 / 16.0).sin().powi(2) - (std::f64::consts::PI * 3.0 / 16.0).sin().powi(2)) / (hx * hx)
                }
            };
            assert!((lam - expected).abs() < 1e-10 * expected.abs(), "{assembly:?} {lam} {expected}");
            assert_eq!(op.matrix.hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn bump_defect_is_local_and_tail_rows_are_flat() {
        let fam = MetricFamily::conformal_bump(2, 0.1, 0.6, BumpProfile::Compact).unwrap();
        let flat = MetricFamily::minkowski(2).unwrap();
        let rep = build_gamma(2, 1).unwrap();
        let grid = GridSpec { half_width: 1.5, m: 24 };
        let op = assemble(&fam, &rep, &Twist::None, grid, Assembly::DiracSquared).unwrap();
        let op0 = assemble(&flat, &rep, &Twist::None, grid, Assembly::DiracSquared).unwrap();
        assert!(op.matrix.max_row_nnz() <= (4 * 2 + 1) * 4);
        for node in 0..op.nodes() {
            if op.outside_support(node) {
                for s in 0..op.fiber {
                    let r = node * op.fiber + s;
                    let a: Vec<_> = op.matrix.row(r).collect();
                    let b: Vec<_> = op0.matrix.row(r).collect();
                    assert_eq!(a, b);
                }
            }
        }
        let d = adjoint_defect(&op, 200, 7);
        assert!(d.norm > 0.0);
        assert_eq!(d.outside_support_max, 0.0);
    }

    #[test]
    fn scalar_operator_is_weighted_symmetric() {
        let fam = MetricFamily::conformal_bump(2, 0.2, 0.6, BumpProfile::Compact).unwrap();
        let rep = build_gamma(2, 1).unwrap();
        let op = assemble(&fam, &rep, &Twist::None, GridSpec { half_width: 1.5, m: 20 }, Assembly::WaveScalar).unwrap();
        assert!(adjoint_defect(&op, 100, 1).norm < 1e-10);
    }

    #[test]
    fn support_violations_are_config_errors() {
        let rep = build_gamma(2, 1).unwrap();
        let fam = MetricFamily::conformal_bump(2, 0.1, 1.4, BumpProfile::Compact).unwrap();
        let e = assemble(&fam, &rep, &Twist::None, GridSpec { half_width: 1.5, m: 16 }, Assembly::DiracSquared).unwrap_err();
        assert!(e.is_config());
        let w = MetricFamily::warped(2, crate::geometry::WarpProfile::Cosh { rate: 0.5 }).unwrap();
        assert!(assemble(&w, &rep, &Twist::None, GridSpec { half_width: 1.5, m: 16 }, Assembly::DiracSquared).unwrap_err().is_config());
    }
}
