use super::connection::{spin_connection, twisting_curvature, Twist};
use super::{c, CMat, CliffordRep};
use crate::error::{Error, Result};
use crate::geometry::{christoffel_at, curvature_at, MetricFamily};
use crate::special::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How stencils treat neighbours beyond the edge of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    ZeroPadded,
}

/// Fibre-valued samples on the uniform grid {−L + i·hx : 0 ≤ i < m}ⁿ,
/// hx = 2L/m. Node index is Σ_k i_k m^k; values are stored node-major.
#[derive(Clone, Debug)]
pub struct SectionGrid {
    pub n: usize,
    pub m: usize,
    pub half_width: f64,
    pub hx: f64,
    pub fiber: usize,
    pub boundary: Boundary,
    pub values: Vec<C64>,
}

impl SectionGrid {
    pub fn zeros(n: usize, m: usize, half_width: f64, fiber: usize, boundary: Boundary) -> Result<SectionGrid> {
        if m < 4 || !(half_width > 0.0) || fiber == 0 {
            return Err(Error::InvalidInput(format!("grid needs m >= 4, L > 0 and a fibre (got m = {m}, L = {half_width})")));
        }
        let nodes = m.checked_pow(n as u32).ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
        Ok(SectionGrid { n, m, half_width, hx: 2.0 * half_width / m as f64, fiber, boundary, values: vec![C64::new(0.0, 0.0); nodes * fiber] })
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.fiber
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut r = idx;
        (0..self.n)
            .map(|_| {
                let i = r % self.m;
                r /= self.m;
                i
            })
            .collect()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().map(|&i| -self.half_width + i as f64 * self.hx).collect()
    }

    /// Index of the node shifted by `shift` steps along axis `dir`.
    pub fn neighbor(&self, idx: usize, dir: usize, shift: isize) -> Option<usize> {
        let stride = self.m.pow(dir as u32);
        let i = (idx / stride % self.m) as isize;
        let j = i + shift;
        let m = self.m as isize;
        let j = if (0..m).contains(&j) {
            j
        } else if self.boundary == Boundary::Periodic {
            j.rem_euclid(m)
        } else {
            return None;
        };
        Some((idx as isize + (j - i) * stride as isize) as usize)
    }

    /// Number of steps from the node to the nearest face of the box.
    pub fn depth(&self, idx: usize) -> usize {
        self.multi_index(idx).iter().map(|&i| i.min(self.m - 1 - i)).min().unwrap_or(0)
    }

    pub fn at(&self, idx: usize) -> &[C64] {
        &self.values[idx * self.fiber..(idx + 1) * self.fiber]
    }

    /// Fill from a function of position.
    pub fn fill<F: Fn(&[f64]) -> Vec<C64> + Sync>(&mut self, f: F) {
        let fiber = self.fiber;
        let me = self.clone_shape();
        self.values.par_chunks_mut(fiber).enumerate().for_each(|(i, out)| {
            let v = f(&me.coords(i));
            out.copy_from_slice(&v[..fiber]);
        });
    }

    fn clone_shape(&self) -> SectionGrid {
        SectionGrid { values: Vec::new(), ..*self }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Smooth analytic test sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSection {
    Zero,
    /// exp(−|x−c|²/w²)·(v₀ + Σ_k x_k v_{k+1} + x₀x₁ v_{n+1}) with fixed
    /// complex vectors v_j.
    GaussianPolynomial {
        center: Vec<f64>,
        width: f64,
    },
    /// e^{ik·x} v with v = (1, 0, …, 0).
    PlaneWave {
        k: Vec<f64>,
    },
}

fn fixed_vector(j: usize, fiber: usize) -> Vec<C64> {
    (0..fiber).map(|s| C64::new((1.3 * j as f64 + 0.7 * s as f64 + 0.2).cos(), (0.9 * j as f64 - 0.4 * s as f64 + 0.5).sin())).collect()
}

impl TestSection {
    pub fn eval(&self, x: &[f64], fiber: usize) -> Vec<C64> {
        let n = x.len();
        match self {
            TestSection::Zero => vec![C64::new(0.0, 0.0); fiber],
            TestSection::GaussianPolynomial { center, width } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let env = (-d2 / (width * width)).exp();
                let mut poly = fixed_vector(0, fiber);
                for k in 0..n {
                    for (p, v) in poly.iter_mut().zip(fixed_vector(k + 1, fiber)) {
                        *p += v * x[k];
                    }
                }
                for (p, v) in poly.iter_mut().zip(fixed_vector(n + 1, fiber)) {
                    *p += v * (x[0] * x[1]);
                }
                poly.into_iter().map(|p| p * env).collect()
            }
            TestSection::PlaneWave { k } => {
                let ph: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
                let mut v = vec![C64::new(0.0, 0.0); fiber];
                v[0] = C64::new(ph.cos(), ph.sin());
                v
            }
        }
    }

    pub fn sample(&self, grid: &mut SectionGrid) {
        let fiber = grid.fiber;
        grid.fill(|x| self.eval(x, fiber));
    }
}

/// Per-node coefficients of the discrete Dirac operator
/// (Ðu)(x) = Σ_μ γ^μ(x)·(u(x+hx e_μ) − u(x−hx e_μ))/(2hx) + Σ_μ γ^μ(x)Ω_μ(x) u(x).
#[derive(Clone, Debug)]
pub struct DiracCoefficients {
    pub n: usize,
    pub fiber: usize,
    /// γ^μ at each node, row-major N×N blocks ordered (node, μ).
    pub gamma_upper: Vec<C64>,
    /// Σ_μ γ^μΩ_μ at each node, row-major N×N.
    pub zeroth: Vec<C64>,
}

fn push_mat(out: &mut Vec<C64>, m: &CMat) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
}

/// Evaluate the Dirac coefficients at every node of `grid`.
pub fn dirac_coefficients(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, grid: &SectionGrid) -> Result<DiracCoefficients> {
    let n = family.dim();
    if grid.n != n || grid.fiber != rep.rank {
        return Err(Error::InvalidInput(format!(
            "grid (n = {}, fibre {}) does not match the representation (n = {}, rank {})",
            grid.n, grid.fiber, n, rep.rank
        )));
    }
    let per_node: Vec<(Vec<C64>, Vec<C64>)> = (0..grid.nodes())
        .into_par_iter()
        .map(|i| {
            let x = grid.coords(i);
            let cd = spin_connection(family, rep, twist, &x)?;
            let mut g = Vec::with_capacity(n * rep.rank * rep.rank);
            let mut z = CMat::zeros(rep.rank, rep.rank);
            for m in 0..n {
                push_mat(&mut g, &cd.gamma_upper[m]);
                z += &cd.gamma_upper[m] * cd.connection(m);
            }
            let mut zv = Vec::with_capacity(rep.rank * rep.rank);
            push_mat(&mut zv, &z);
            Ok((g, zv))
        })
        .collect::<Result<_>>()?;
    let mut gamma_upper = Vec::with_capacity(grid.nodes() * n * rep.rank * rep.rank);
    let mut zeroth = Vec::with_capacity(grid.nodes() * rep.rank * rep.rank);
    for (g, z) in per_node {
        gamma_upper.extend(g);
        zeroth.extend(z);
    }
    Ok(DiracCoefficients { n, fiber: rep.rank, gamma_upper, zeroth })
}

fn matvec_acc(out: &mut [C64], m: &[C64], v: &[C64], scale: C64) {
    let k = v.len();
    for i in 0..k {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..k {
            acc += m[i * k + j] * v[j];
        }
        out[i] += acc * scale;
    }
}

impl DiracCoefficients {
    /// Apply the discrete Dirac operator to a grid section.
    pub fn apply(&self, u: &SectionGrid) -> Result<SectionGrid> {
        let nn = self.fiber * self.fiber;
        if u.fiber != self.fiber || u.nodes() * nn != self.zeroth.len() {
            return Err(Error::InvalidInput("section does not match the Dirac coefficients".into()));
        }
        let n = self.n;
        let fiber = self.fiber;
        let mut out = u.clone();
        let inv2h = C64::new(0.5 / u.hx, 0.0);
        out.values.par_chunks_mut(fiber).enumerate().for_each(|(i, o)| {
            o.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            matvec_acc(o, &self.zeroth[i * nn..(i + 1) * nn], u.at(i), c(1.0, 0.0));
            let mut diff = vec![C64::new(0.0, 0.0); fiber];
            for m in 0..n {
                for s in 0..fiber {
                    let p = u.neighbor(i, m, 1).map(|j| u.at(j)[s]).unwrap_or_default();
                    let q = u.neighbor(i, m, -1).map(|j| u.at(j)[s]).unwrap_or_default();
                    diff[s] = p - q;
                }
                let g = &self.gamma_upper[(i * n + m) * nn..(i * n + m + 1) * nn];
                matvec_acc(o, g, &diff, inv2h);
            }
        });
        Ok(out)
    }
}

/// Ðu with second-order central differences.
pub fn dirac_apply(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, u: &SectionGrid) -> Result<SectionGrid> {
    dirac_coefficients(family, rep, twist, u)?.apply(u)
}

/// Result of a Bochner–Lichnerowicz comparison on one grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlReport {
    pub hx: f64,
    /// sup |Ð²u − (−g^{ij}∇²_{ij}u + 𝐅u + R/4·u)| over the checked nodes.
    pub residual: f64,
    /// The same with −R/4 in place of R/4.
    pub residual_flipped_scalar: f64,
    /// The same with the lowered-gamma contraction of F.
    pub residual_lowered_twist: f64,
    pub checked_nodes: usize,
}

/// Spacing of the differences of the connection coefficients.
const CONNECTION_STEP: f64 = 1e-3;

struct NodeGeometry {
    ginv: Vec<f64>,
    christoffel: Vec<f64>,
    omega: Vec<CMat>,
    d_omega: Vec<CMat>,
    bold_f: CMat,
    bold_f_lowered: CMat,
    scalar: f64,
}

fn node_geometry(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, x: &[f64]) -> Result<NodeGeometry> {
    let n = family.dim();
    let cd = spin_connection(family, rep, twist, x)?;
    let omega: Vec<CMat> = (0..n).map(|m| cd.connection(m)).collect();
    let mut d_omega = Vec::with_capacity(n * n);
    for i in 0..n {
        let shifted = |s: f64| {
            let mut y = x.to_vec();
            y[i] += s * CONNECTION_STEP;
            spin_connection(family, rep, twist, &y)
        };
        let (p1, m1, p2, m2) = (shifted(1.0)?, shifted(-1.0)?, shifted(2.0)?, shifted(-2.0)?);
        for j in 0..n {
            let d = (p1.connection(j) - m1.connection(j)) * c(8.0, 0.0) - (p2.connection(j) - m2.connection(j));
            d_omega.push(d * c(1.0 / (12.0 * CONNECTION_STEP), 0.0));
        }
    }
    let curv = curvature_at(family, x, 1e-3)?;
    let tc = twisting_curvature(family, rep, twist, x)?;
    Ok(NodeGeometry {
        ginv: curv.inverse_metric.iter().cloned().collect(),
        christoffel: christoffel_at(family, x)?,
        omega,
        d_omega,
        bold_f: tc.clifford,
        bold_f_lowered: tc.clifford_lowered,
        scalar: curv.scalar,
    })
}

fn cvec(v: &[C64]) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(v)
}

/// Compare Ð²u (the discrete Dirac operator applied twice) with
/// −g^{ij}(∇_i∇_j − Γ^k_{ij}∇_k)u + 𝐅u + R/4·u assembled from compact
/// second differences and differentiated connection coefficients, on the
/// nodes at depth ≥ 3 from the boundary of a zero-padded grid.
pub fn bochner_lichnerowicz_residual(
    family: &MetricFamily,
    rep: &CliffordRep,
    twist: &Twist,
    section: &TestSection,
    m: usize,
    half_width: f64,
) -> Result<BlReport> {
    let n = family.dim();
    let mut u = SectionGrid::zeros(n, m, half_width, rep.rank, Boundary::ZeroPadded)?;
    section.sample(&mut u);
    let coeffs = dirac_coefficients(family, rep, twist, &u)?;
    let lhs = coeffs.apply(&coeffs.apply(&u)?)?;
    let h = u.hx;
    let fiber = rep.rank;
    let checked: Vec<usize> = (0..u.nodes()).filter(|&i| u.depth(i) >= 3).collect();
    let per: Vec<(f64, f64, f64)> = checked
        .par_iter()
        .map(|&i| {
            let x = u.coords(i);
            let ui = cvec(u.at(i));
            if ui.iter().all(|v| *v == C64::new(0.0, 0.0)) && section == &TestSection::Zero {
                return Ok((0.0, 0.0, 0.0));
            }
            let geo = node_geometry(family, rep, twist, &x)?;
            let val = |j: usize| cvec(u.at(j));
            let nb = |j: usize, d: usize, s: isize| u.neighbor(j, d, s).expect("interior node");
            let du: Vec<_> = (0..n).map(|k| (val(nb(i, k, 1)) - val(nb(i, k, -1))) * c(0.5 / h, 0.0)).collect();
            let nabla: Vec<_> = (0..n).map(|k| &du[k] + &geo.omega[k] * &ui).collect();
            let mut lap = nalgebra::DVector::<C64>::zeros(fiber);
            for a in 0..n {
                for b in 0..n {
                    let gab = geo.ginv[a + n * b];
                    if gab == 0.0 {
                        continue;
                    }
                    let ddu = if a == b {
                        (val(nb(i, a, 1)) - &ui * c(2.0, 0.0) + val(nb(i, a, -1))) * c(1.0 / (h * h), 0.0)
                    } else {
                        let pp = val(nb(nb(i, a, 1), b, 1));
                        let pm = val(nb(nb(i, a, 1), b, -1));
                        let mp = val(nb(nb(i, a, -1), b, 1));
                        let mm = val(nb(nb(i, a, -1), b, -1));
                        (pp - pm - mp + mm) * c(0.25 / (h * h), 0.0)
                    };
                    let mut hess = ddu + &geo.d_omega[a * n + b] * &ui + &geo.omega[b] * &du[a] + &geo.omega[a] * &nabla[b];
                    for k in 0..n {
                        hess -= &nabla[k] * c(geo.christoffel[(k * n + a) * n + b], 0.0);
                    }
                    lap += hess * c(gab, 0.0);
                }
            }
            let base = -lap;
            let fu = &geo.bold_f * &ui;
            let fl = &geo.bold_f_lowered * &ui;
            let ru = &ui * c(0.25 * geo.scalar, 0.0);
            let l = cvec(lhs.at(i));
            let r1 = (&l - (&base + &fu + &ru)).camax();
            let r2 = (&l - (&base + &fu - &ru)).camax();
            let r3 = (&l - (&base + &fl + &ru)).camax();
            Ok((r1, r2, r3))
        })
        .collect::<Result<_>>()?;
    let fold = |k: usize| {
        per.iter()
            .map(|t| match k {
                0 => t.0,
                1 => t.1,
                _ => t.2,
            })
            .fold(0.0, f64::max)
    };
    Ok(BlReport { hx: h, residual: fold(0), residual_flipped_scalar: fold(1), residual_lowered_twist: fold(2), checked_nodes: checked.len() })
}

/// Observed convergence orders log₂(r_i / r_{i+1}) for successive halvings.
pub fn order_estimate(residuals: &[f64]) -> Vec<f64> {
    residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma;
    use crate::geometry::BumpProfile;

    #[test]
    fn flat_dirac_on_plane_waves() {
        let f = MetricFamily::minkowski(2).unwrap();
        let r = build_gamma(2, 1).unwrap();
        let m = 64;
        let l = std::f64::consts::PI;
        let k = [2.0, -3.0];
        let mut u = SectionGrid::zeros(2, m, l, 2, Boundary::Periodic).unwrap();
        TestSection::PlaneWave { k: k.to_vec() }.sample(&mut u);
        let du = dirac_apply(&f, &r, &Twist::None, &u).unwrap();
        // discrete symbol: i·sin(k_μ h)/h in place of i k_μ
        let h = u.hx;
        let ks: Vec<f64> = k.iter().map(|v| (v * h).sin() / h).collect();
        let sym = (r.gamma_upper(0) * c(ks[0], 0.0) + r.gamma_upper(1) * c(ks[1], 0.0)) * c(0.0, 1.0);
        for i in (0..u.nodes()).step_by(97) {
            let want = &sym * cvec(u.at(i));
            assert!((want - cvec(du.at(i))).camax() < 1e-12);
        }
    }

    #[test]
    fn dirac_is_linear() {
        let f = MetricFamily::conformal_bump(2, 0.2, 1.0, BumpProfile::Gaussian).unwrap();
        let r = build_gamma(2, 1).unwrap();
        let mut a = SectionGrid::zeros(2, 16, 1.0, 2, Boundary::Periodic).unwrap();
        let mut b = a.clone();
        TestSection::GaussianPolynomial { center: vec![0.1, 0.0], width: 0.5 }.sample(&mut a);
        TestSection::PlaneWave { k: vec![std::f64::consts::PI, 0.0] }.sample(&mut b);
        let co = dirac_coefficients(&f, &r, &Twist::None, &a).unwrap();
        let (p, q) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
        let mut s = a.clone();
        for ((sv, av), bv) in s.values.iter_mut().zip(&a.values).zip(&b.values) {
            *sv = p * av + q * bv;
        }
        let ds = co.apply(&s).unwrap();
        let da = co.apply(&a).unwrap();
        let db = co.apply(&b).unwrap();
        for i in 0..ds.values.len() {
            assert!((ds.values[i] - (p * da.values[i] + q * db.values[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_section_has_zero_residual() {
        let f = MetricFamily::conformal_bump(2, 0.2, 1.0, BumpProfile::Gaussian).unwrap();
        let r = build_gamma(2, 1).unwrap();
        let rep = bochner_lichnerowicz_residual(&f, &r, &Twist::None, &TestSection::Zero, 16, 1.0).unwrap();
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn flat_residual_converges_at_second_order() {
        let f = MetricFamily::minkowski(2).unwrap();
        let r = build_gamma(2, 1).unwrap();
        let s = TestSection::GaussianPolynomial { center: vec![0.1, -0.05], width: 0.4 };
        let a = bochner_lichnerowicz_residual(&f, &r, &Twist::None, &s, 64, 1.0).unwrap();
        let b = bochner_lichnerowicz_residual(&f, &r, &Twist::None, &s, 128, 1.0).unwrap();
        let ratio = a.residual / b.residual;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }
}
