//! Hadamard coefficients u_k along radial geodesics from a base point.
//!
//! u₀ solves 2∇_V u₀ + h u₀ = 0 and is the scalar (|g_N(0)|/|g_N|)^{1/4}
//! times the spinor parallel transport S from x₀. Higher coefficients are
//! written as u_k = u₀ S w_k, which turns the transport equation
//! 2k u_k + h u_k + 2∇_V u_k + 2P u_{k−1} = 0 into (r^k w_k)' = −r^{k−1} g
//! with g = S⁻¹(P u_{k−1})/u₀, so that w_k(r) = −∫₀¹ t^{k−1} g(tr) dt.

use crate::clifford::{spin_connection, twisting_curvature, CMat, CliffordRep, Twist};
use crate::error::{Error, Result};
use crate::geometry::{christoffel_at, curvature_at, exp_with_jacobian, inverse_exp, radial_trivialization, MetricFamily};
use crate::ode::rk4_fixed;
use crate::special::{GaussLegendre, C64};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Fixed RK4 steps for geodesics and spinor transport.
pub const TRANSPORT_STEPS: usize = 32;

/// Samples of one transport coefficient along a ray.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportState {
    pub x0: Vec<f64>,
    pub direction: Vec<f64>,
    pub order: usize,
    pub r: Vec<f64>,
    /// h(r) = r ∂_r log|g_N|^{1/2}.
    pub h: Vec<f64>,
    /// u_k(r_i) in the radial trivialization (the fibre at x₀).
    pub values: Vec<CMat>,
    /// Closed-form u₀ = (|g_N(0)|/|g_N(r)|)^{1/4}; empty for k ≥ 1.
    pub closed_form: Vec<f64>,
    /// Largest |ODE − closed form| for u₀.
    pub deviation: f64,
}

/// u₀ along r ↦ exp(x₀, rω), by integrating d log u₀/dr = −h/(2r) over
/// the sampled radii and by the closed form.
pub fn transport_u0(family: &MetricFamily, rank: usize, x0: &[f64], direction: &[f64], r_max: f64, samples: usize) -> Result<TransportState> {
    if samples < 4 {
        return Err(Error::InvalidInput("transport_u0 needs at least 4 radial samples".into()));
    }
    let prof = radial_trivialization(family, x0, direction, r_max, samples)?;
    let dr = prof.r[1] - prof.r[0];
    let rate: Vec<f64> = prof.h.iter().zip(&prof.r).map(|(h, r)| if *r == 0.0 { 0.0 } else { -h / (2.0 * r) }).collect();
    let mut log_u = vec![0.0; samples];
    for i in 0..samples - 1 {
        // cubic interpolation through four neighbouring samples
        let inc = if i == 0 {
            (9.0 * rate[0] + 19.0 * rate[1] - 5.0 * rate[2] + rate[3]) / 24.0
        } else if i == samples - 2 {
            (rate[i - 2] - 5.0 * rate[i - 1] + 19.0 * rate[i] + 9.0 * rate[i + 1]) / 24.0
        } else {
            (-rate[i - 1] + 13.0 * rate[i] + 13.0 * rate[i + 1] - rate[i + 2]) / 24.0
        };
        log_u[i + 1] = log_u[i] + inc * dr;
    }
    let closed: Vec<f64> = prof.sqrt_det_normal.iter().map(|s| (prof.sqrt_det_normal[0] / s).sqrt()).collect();
    let values: Vec<CMat> = log_u.iter().map(|l| CMat::identity(rank, rank) * C64::new(l.exp(), 0.0)).collect();
    let deviation = log_u.iter().zip(&closed).map(|(l, c)| (l.exp() - c).abs()).fold(0.0, f64::max);
    Ok(TransportState { x0: x0.to_vec(), direction: direction.to_vec(), order: 0, r: prof.r, h: prof.h, values, closed_form: closed, deviation })
}

/// A section of End(E) near x₀, evaluated pointwise in the Gram–Schmidt
/// gauge used by the Dirac operator.
pub trait Field: Send + Sync {
    fn eval(&self, x: &[f64]) -> Result<CMat>;
}

/// Geometry shared by all transport fields at one base point.
#[derive(Clone, Debug)]
pub struct TransportContext {
    pub family: MetricFamily,
    pub rep: CliffordRep,
    pub twist: Twist,
    pub x0: Vec<f64>,
    pub steps: usize,
}

/// Radial data of a point x near x₀: normal coordinates y, the scalar u₀
/// and the spinor transport S from x₀ to x.
#[derive(Clone, Debug)]
pub struct RadialPoint {
    pub y: Vec<f64>,
    pub u0: f64,
    pub transport: CMat,
}

impl TransportContext {
    pub fn new(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, x0: &[f64]) -> Result<Self> {
        if rep.n != family.dim() || x0.len() != family.dim() {
            return Err(Error::InvalidInput("representation, metric and base point dimensions differ".into()));
        }
        twist.validate(family.dim())?;
        Ok(TransportContext { family: family.clone(), rep: rep.clone(), twist: twist.clone(), x0: x0.to_vec(), steps: TRANSPORT_STEPS })
    }

    /// S(1) for dS/dt = −Ω_μ(γ(t))γ̇^μ S along γ(t) = exp(x₀, t y).
    pub fn spinor_transport(&self, y: &[f64]) -> Result<CMat> {
        let n = self.family.dim();
        let nf = self.rep.rank;
        let flat = matches!(self.family, MetricFamily::Minkowski { .. });
        if flat && self.twist.is_trivial() {
            return Ok(CMat::identity(nf, nf));
        }
        let mut s0 = vec![0.0; 2 * n + 2 * nf * nf];
        s0[..n].copy_from_slice(&self.x0);
        s0[n..2 * n].copy_from_slice(y);
        for i in 0..nf {
            s0[2 * n + 2 * (i * nf + i)] = 1.0;
        }
        let mut fail: Option<Error> = None;
        let mut rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
            let x = &s[..n];
            let v = &s[n..2 * n];
            ds[..n].copy_from_slice(v);
            ds[n..].iter_mut().for_each(|d| *d = 0.0);
            if !flat && !self.family.is_flat_at(x) {
                match christoffel_at(&self.family, x) {
                    Ok(gam) => {
                        for l in 0..n {
                            let mut acc = 0.0;
                            for m in 0..n {
                                for k in 0..n {
                                    acc += gam[(l * n + m) * n + k] * v[m] * v[k];
                                }
                            }
                            ds[n + l] = -acc;
                        }
                    }
                    Err(e) => {
                        fail.get_or_insert(e);
                        return;
                    }
                }
            }
            let cd = match spin_connection(&self.family, &self.rep, &self.twist, x) {
                Ok(cd) => cd,
                Err(e) => {
                    fail.get_or_insert(e);
                    return;
                }
            };
            let mut omega = CMat::zeros(nf, nf);
            for m in 0..n {
                omega += cd.connection(m) * C64::new(v[m], 0.0);
            }
            let smat = CMat::from_fn(nf, nf, |i, j| C64::new(s[2 * n + 2 * (i * nf + j)], s[2 * n + 2 * (i * nf + j) + 1]));
            let d = -(omega * smat);
            for i in 0..nf {
                for j in 0..nf {
                    ds[2 * n + 2 * (i * nf + j)] = d[(i, j)].re;
                    ds[2 * n + 2 * (i * nf + j) + 1] = d[(i, j)].im;
                }
            }
        };
        let out = rk4_fixed(&mut rhs, 0.0, 1.0, &s0, self.steps);
        if let Some(e) = fail {
            return Err(Error::GeodesicFailure(e.to_string()));
        }
        Ok(CMat::from_fn(nf, nf, |i, j| C64::new(out[2 * n + 2 * (i * nf + j)], out[2 * n + 2 * (i * nf + j) + 1])))
    }

    pub fn radial_point(&self, x: &[f64]) -> Result<RadialPoint> {
        let y = inverse_exp(&self.family, &self.x0, x, self.steps)?;
        let (_, jac) = exp_with_jacobian(&self.family, &self.x0, &y, self.steps)?;
        let g0 = self.family.metric_at(&self.x0)?.determinant().abs();
        let g1 = self.family.metric_at(x)?.determinant().abs();
        let dj = jac.determinant();
        let u0 = (g0 / (g1 * dj * dj)).powf(0.25);
        let transport = self.spinor_transport(&y)?;
        Ok(RadialPoint { y, u0, transport })
    }

    /// exp(x₀, y).
    pub fn exp(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(exp_with_jacobian(&self.family, &self.x0, y, self.steps)?.0)
    }
}

/// U₀(x) = u₀(x)S(x).
pub struct U0Field {
    pub ctx: Arc<TransportContext>,
}

impl Field for U0Field {
    fn eval(&self, x: &[f64]) -> Result<CMat> {
        let rp = self.ctx.radial_point(x)?;
        Ok(rp.transport * C64::new(rp.u0, 0.0))
    }
}

/// U_k(x) = u₀(x)S(x)w_k(x) with w_k(x) = −Σ_q W_q t_q^{k−1} g(t_q y(x)).
pub struct UkField {
    pub ctx: Arc<TransportContext>,
    pub order: usize,
    pub prev: Arc<dyn Field>,
    pub stencil: StencilOptions,
    pub quadrature: usize,
}

impl UkField {
    /// w_k at the point with normal coordinates y.
    pub fn weight(&self, y: &[f64]) -> Result<CMat> {
        let k = self.order as i32;
        if y.iter().all(|c| *c == 0.0) {
            return Ok(-g_integrand(&self.ctx, self.prev.as_ref(), y, self.stencil)? / C64::new(self.order as f64, 0.0));
        }
        let gl = GaussLegendre::new(self.quadrature);
        let nf = self.ctx.rep.rank;
        let mut acc = CMat::zeros(nf, nf);
        for (t, w) in gl.nodes.iter().zip(&gl.weights) {
            let t = 0.5 * (t + 1.0);
            let yt: Vec<f64> = y.iter().map(|c| c * t).collect();
            acc += g_integrand(&self.ctx, self.prev.as_ref(), &yt, self.stencil)? * C64::new(0.5 * w * t.powi(k - 1), 0.0);
        }
        Ok(-acc)
    }
}

/// S⁻¹(P F)/u₀ at exp(x₀, y).
fn g_integrand(ctx: &TransportContext, field: &dyn Field, y: &[f64], stencil: StencilOptions) -> Result<CMat> {
    let x = ctx.exp(y)?;
    let rp = ctx.radial_point(&x)?;
    let pf = apply_p(ctx, field, &x, stencil)?;
    let sinv = rp.transport.clone().try_inverse().ok_or_else(|| Error::GeodesicFailure("singular spinor transport".into()))?;
    Ok(sinv * pf / C64::new(rp.u0, 0.0))
}

impl Field for UkField {
    fn eval(&self, x: &[f64]) -> Result<CMat> {
        let rp = self.ctx.radial_point(x)?;
        Ok(rp.transport * self.weight(&rp.y)? * C64::new(rp.u0, 0.0))
    }
}

/// Finite-difference scheme for Ð in the nested evaluation of P = −Ð².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilOptions {
    pub step: f64,
    /// 2 or 4.
    pub order: usize,
}

fn stencil(order: usize) -> Vec<(i32, f64)> {
    match order {
        2 => vec![(1, 0.5), (-1, -0.5)],
        _ => vec![(1, 8.0 / 12.0), (-1, -8.0 / 12.0), (2, -1.0 / 12.0), (-2, 1.0 / 12.0)],
    }
}

/// (P F)(x) = −Ð(ÐF)(x) with central differences of the given order.
pub fn apply_p(ctx: &TransportContext, field: &dyn Field, x: &[f64], opts: StencilOptions) -> Result<CMat> {
    if opts.order != 2 && opts.order != 4 {
        return Err(Error::InvalidInput(format!("stencil order {} (expected 2 or 4)", opts.order)));
    }
    if !(opts.step > 0.0) {
        return Err(Error::InvalidInput("stencil step must be positive".into()));
    }
    let n = ctx.family.dim();
    let h = opts.step;
    let sten = stencil(opts.order);
    let point = |off: &[i32]| -> Vec<f64> { x.iter().zip(off).map(|(a, o)| a + *o as f64 * h).collect() };
    let mut cache: HashMap<Vec<i32>, CMat> = HashMap::new();
    let mut value = |off: Vec<i32>| -> Result<CMat> {
        if let Some(v) = cache.get(&off) {
            return Ok(v.clone());
        }
        let v = field.eval(&point(&off))?;
        cache.insert(off, v.clone());
        Ok(v)
    };
    // ÐF at the offset `base`
    let mut dirac_at = |base: Vec<i32>| -> Result<CMat> {
        let xp = point(&base);
        let cd = spin_connection(&ctx.family, &ctx.rep, &ctx.twist, &xp)?;
        let center = value(base.clone())?;
        let mut out = CMat::zeros(center.nrows(), center.ncols());
        for m in 0..n {
            let mut d = CMat::zeros(center.nrows(), center.ncols());
            for &(s, w) in &sten {
                let mut o = base.clone();
                o[m] += s;
                d += value(o)? * C64::new(w / h, 0.0);
            }
            out += &cd.gamma_upper[m] * (d + cd.connection(m) * &center);
        }
        Ok(out)
    };
    let zero = vec![0i32; n];
    let cd = spin_connection(&ctx.family, &ctx.rep, &ctx.twist, x)?;
    let center = dirac_at(zero.clone())?;
    let mut out = CMat::zeros(center.nrows(), center.ncols());
    for m in 0..n {
        let mut d = CMat::zeros(center.nrows(), center.ncols());
        for &(s, w) in &sten {
            let mut o = zero.clone();
            o[m] += s;
            d += dirac_at(o)? * C64::new(w / h, 0.0);
        }
        out += &cd.gamma_upper[m] * (d + cd.connection(m) * &center);
    }
    Ok(-out)
}

/// u₁(0) computed as −P u₀ at x₀ and compared with R/12 + twist term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct U1Report {
    pub x0: Vec<f64>,
    pub scalar_curvature: f64,
    pub u1_numeric: CMat,
    /// R/12·𝟙 + Σ_{a<b} γ^aγ^b F_ab.
    pub u1_predicted: CMat,
    /// R/12·𝟙 + Σ_{a<b} γ_aγ_b F_ab.
    pub u1_predicted_lowered: CMat,
    pub rel_error: f64,
    pub rel_error_lowered: f64,
    /// |difference between the last two Richardson levels|, an error estimate.
    pub richardson_estimate: f64,
}

fn rel_err(a: &CMat, b: &CMat) -> f64 {
    let d = (a - b).norm();
    if b.norm() == 0.0 {
        d
    } else {
        d / b.norm()
    }
}

/// −(P U₀)(x₀) from second-order nested differences at steps h, h/2, h/4
/// combined by two Richardson extrapolations.
pub fn transport_u1_origin(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, x0: &[f64], step: f64) -> Result<U1Report> {
    let ctx = Arc::new(TransportContext::new(family, rep, twist, x0)?);
    let field = U0Field { ctx: ctx.clone() };
    let levels: Vec<CMat> =
        [1.0, 0.5, 0.25].iter().map(|f| apply_p(&ctx, &field, x0, StencilOptions { step: step * f, order: 2 }).map(|p| -p)).collect::<Result<_>>()?;
    let r1a = (&levels[1] * C64::new(4.0, 0.0) - &levels[0]) / C64::new(3.0, 0.0);
    let r1b = (&levels[2] * C64::new(4.0, 0.0) - &levels[1]) / C64::new(3.0, 0.0);
    let u1 = (&r1b * C64::new(16.0, 0.0) - &r1a) / C64::new(15.0, 0.0);
    let richardson_estimate = (&u1 - &r1b).norm();
    let curv = curvature_at(family, x0, 1e-3)?;
    let tc = twisting_curvature(family, rep, twist, x0)?;
    let id = CMat::identity(rep.rank, rep.rank) * C64::new(curv.scalar / 12.0, 0.0);
    let pred = &id + &tc.clifford;
    let pred_low = &id + &tc.clifford_lowered;
    Ok(U1Report {
        x0: x0.to_vec(),
        scalar_curvature: curv.scalar,
        rel_error: rel_err(&u1, &pred),
        rel_error_lowered: rel_err(&u1, &pred_low),
        u1_numeric: u1,
        u1_predicted: pred,
        u1_predicted_lowered: pred_low,
        richardson_estimate,
    })
}

/// Options for [`transport_uk`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub stencil: StencilOptions,
    /// Gauss–Legendre nodes for the radial integral.
    pub quadrature: usize,
    /// Fixed RK4 steps per geodesic and spinor transport.
    pub geodesic_steps: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { stencil: StencilOptions { step: 0.02, order: 4 }, quadrature: 6, geodesic_steps: TRANSPORT_STEPS }
    }
}

/// Build the field U_k for k ≥ 0.
pub fn transport_field(ctx: &Arc<TransportContext>, k: usize, opts: TransportOptions) -> Arc<dyn Field> {
    let mut field: Arc<dyn Field> = Arc::new(U0Field { ctx: ctx.clone() });
    for order in 1..=k {
        field = Arc::new(UkField { ctx: ctx.clone(), order, prev: field, stencil: opts.stencil, quadrature: opts.quadrature });
    }
    field
}

/// u_k along the ray of `prev` (which must hold u_{k−1} on the same radii),
/// in the radial trivialization.
pub fn transport_uk(
    family: &MetricFamily,
    rep: &CliffordRep,
    twist: &Twist,
    k: usize,
    prev: &TransportState,
    opts: TransportOptions,
) -> Result<TransportState> {
    if k == 0 || prev.order + 1 != k {
        return Err(Error::InvalidInput(format!("transport_uk(k = {k}) needs the state of order {}", k.saturating_sub(1))));
    }
    if prev.r.len() < 2 {
        return Err(Error::InvalidInput("previous state has too few radial samples".into()));
    }
    let mut ctx = TransportContext::new(family, rep, twist, &prev.x0)?;
    ctx.steps = opts.geodesic_steps.max(1);
    let ctx = Arc::new(ctx);
    let lower = transport_field(&ctx, k - 1, opts);
    let uk = UkField { ctx: ctx.clone(), order: k, prev: lower, stencil: opts.stencil, quadrature: opts.quadrature };
    let mut values = Vec::with_capacity(prev.r.len());
    for &r in &prev.r {
        let y: Vec<f64> = prev.direction.iter().map(|c| c * r).collect();
        let w = uk.weight(&y)?;
        let u0 = if r == 0.0 { 1.0 } else { ctx.radial_point(&ctx.exp(&y)?)?.u0 };
        values.push(w * C64::new(u0, 0.0));
    }
    Ok(TransportState {
        x0: prev.x0.clone(),
        direction: prev.direction.clone(),
        order: k,
        r: prev.r.clone(),
        h: prev.h.clone(),
        values,
        closed_form: Vec::new(),
        deviation: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma;
    use crate::geometry::{BumpProfile, WarpProfile};

    #[test]
    fn u0_is_one_in_flat_space_and_matches_closed_form() {
        let flat = MetricFamily::minkowski(2).unwrap();
        let st = transport_u0(&flat, 2, &[0.0, 0.0], &[1.0, 0.3], 0.5, 17).unwrap();
        assert!(st.values.iter().all(|v| (v - CMat::identity(2, 2)).norm() < 1e-13));
        let bump = MetricFamily::conformal_bump(2, 0.3, 1.0, BumpProfile::Gaussian).unwrap();
        let st = transport_u0(&bump, 2, &[0.1, 0.0], &[1.0, 0.4], 0.4, 41).unwrap();
        assert!(st.deviation < 1e-8, "{}", st.deviation);
        assert_eq!(st.values[0], CMat::identity(2, 2));
    }

    #[test]
    fn u0_field_agrees_with_ray_samples() {
        let bump = MetricFamily::conformal_bump(2, 0.3, 1.0, BumpProfile::Gaussian).unwrap();
        let rep = build_gamma(2, 1).unwrap();
        let x0 = [0.1, 0.0];
        let st = transport_u0(&bump, 2, &x0, &[1.0, 0.4], 0.4, 41).unwrap();
        let ctx = TransportContext::new(&bump, &rep, &Twist::None, &x0).unwrap();
        let y = [0.4, 0.16];
        let x = ctx.exp(&y).unwrap();
        let rp = ctx.radial_point(&x).unwrap();
        assert!((rp.u0 - st.closed_form[40]).abs() < 1e-9);
        assert!(rp.y.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn u1_in_flat_space_vanishes() {
        let flat = MetricFamily::minkowski(2).unwrap();
        let rep = build_gamma(2, 1).unwrap();
        let rep_ = transport_u1_origin(&flat, &rep, &Twist::None, &[0.0, 0.0], 0.1).unwrap();
        assert!(rep_.u1_numeric.norm() < 1e-10);
    }

    #[test]
    fn u1_origin_matches_curvature_and_twist() {
        let rep = build_gamma(2, 1).unwrap();
        let bump = MetricFamily::conformal_bump(2, 0.3, 1.0, BumpProfile::Gaussian).unwrap();
        let r = transport_u1_origin(&bump, &rep, &Twist::None, &[0.3, 0.2], 0.1).unwrap();
        assert!(r.scalar_curvature.abs() > 0.01);
        assert!(r.rel_error < 1e-5, "{}", r.rel_error);
        let warped = MetricFamily::warped(2, WarpProfile::Cosh { rate: 0.5 }).unwrap();
        let r = transport_u1_origin(&warped, &rep, &Twist::None, &[0.2, 0.0], 0.1).unwrap();
        assert!(r.rel_error < 1e-5, "{}", r.rel_error);
        let flat = MetricFamily::minkowski(2).unwrap();
        let r = transport_u1_origin(&flat, &rep, &Twist::constant_field(2, 0.4), &[0.0, 0.0], 0.1).unwrap();
        assert!(r.rel_error < 1e-10 && r.rel_error_lowered > 1.0);
    }

    #[test]
    fn transport_uk_agrees_with_direct_u1_and_vanishes_when_flat() {
        let rep = build_gamma(2, 1).unwrap();
        let bump = MetricFamily::conformal_bump(2, 0.3, 1.0, BumpProfile::Gaussian).unwrap();
        let x0 = [0.3, 0.2];
        let direct = transport_u1_origin(&bump, &rep, &Twist::None, &x0, 0.1).unwrap();
        let s0 = transport_u0(&bump, 2, &x0, &[1.0, 0.5], 0.2, 4).unwrap();
        let s1 = transport_uk(&bump, &rep, &Twist::None, 1, &s0, TransportOptions::default()).unwrap();
        assert!((&s1.values[0] - &direct.u1_numeric).norm() < 1e-5 * direct.u1_numeric.norm());
        assert!(transport_uk(&bump, &rep, &Twist::None, 2, &s0, TransportOptions::default()).is_err());

        let flat = MetricFamily::minkowski(2).unwrap();
        let f0 = transport_u0(&flat, 2, &[0.0, 0.0], &[1.0, 0.3], 0.2, 4).unwrap();
        let f1 = transport_uk(&flat, &rep, &Twist::None, 1, &f0, TransportOptions::default()).unwrap();
        let f2 = transport_uk(&flat, &rep, &Twist::None, 2, &f1, TransportOptions::default()).unwrap();
        assert!(f1.values.iter().chain(&f2.values).all(|v| v.norm() < 1e-8));
    }
}
