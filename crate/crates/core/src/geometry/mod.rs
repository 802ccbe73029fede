//! Scattering metrics on ℝⁿ that agree with Minkowski space outside a
//! bounded region (or decay rapidly), together with their curvature,
//! geodesics and parallel transport.
//!
//! Signature convention is (+,−,…,−); index 0 is time.

mod curvature;
mod geodesic;

pub use curvature::{christoffel_at, connection_jet, curvature_at, curvature_at_with, CurvatureData, DerivativeMode};
pub use geodesic::{exp_with_jacobian, exponential_map, inverse_exp, radial_trivialization, GeodesicState, RadialProfile};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Radial profile ψ(s) of a conformal bump, s = |x|² (Euclidean).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// ψ(s) = exp(−s/w²); decays rapidly but is never exactly zero.
    Gaussian,
    /// ψ(s) = exp(1 − 1/(1 − s/w²)) for s < w², zero otherwise.
    Compact,
}

/// Scale factor a(t) of a warped product dt² − a(t)² Σ dxᵢ².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpProfile {
    /// a(t) = cosh(rate·t)
    Cosh { rate: f64 },
    /// a(t) = exp(amplitude·ψ(t²)) with the compact profile of width `width`.
    Bump { amplitude: f64, width: f64 },
}

/// Built-in metric families.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricFamily {
    Minkowski {
        n: usize,
    },
    /// g = e^{2φ} η with φ(x) = amplitude · ψ(|x|²).
    ConformalBump {
        n: usize,
        amplitude: f64,
        width: f64,
        profile: BumpProfile,
    },
    Warped {
        n: usize,
        warp: WarpProfile,
    },
}

/// Metric and its first two derivatives at a point.
///
/// `dg[k]` holds ∂ₖ g and `ddg[k * n + l]` holds ∂ₖ∂ₗ g.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<DMatrix<f64>>,
}

/// η = diag(1, −1, …, −1).
pub fn minkowski(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            0.0
        } else if i == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

pub fn eta(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 2 || n == 4 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("dimension {n} (only 2 and 4 are supported)")))
    }
}

/// (ψ, ψ', ψ'') of the bump profile at s, derivatives with respect to s.
fn bump_profile(profile: BumpProfile, width: f64, s: f64) -> (f64, f64, f64) {
    let w2 = width * width;
    match profile {
        BumpProfile::Gaussian => {
            let p = (-s / w2).exp();
            (p, -p / w2, p / (w2 * w2))
        }
        BumpProfile::Compact => {
            if s >= w2 {
                return (0.0, 0.0, 0.0);
            }
            let q = 1.0 / (1.0 - s / w2);
            let p = (1.0 - q).exp();
            let d1 = -p * q * q / w2;
            let d2 = p * q * q * q * (q - 2.0) / (w2 * w2);
            (p, d1, d2)
        }
    }
}

impl MetricFamily {
    pub fn minkowski(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(MetricFamily::Minkowski { n })
    }

    pub fn conformal_bump(n: usize, amplitude: f64, width: f64, profile: BumpProfile) -> Result<Self> {
        check_dimension(n)?;
        if !(width > 0.0 && width.is_finite()) || !amplitude.is_finite() {
            return Err(Error::Config(format!("conformal bump needs finite amplitude and width > 0 (got {amplitude}, {width})")));
        }
        Ok(MetricFamily::ConformalBump { n, amplitude, width, profile })
    }

    pub fn warped(n: usize, warp: WarpProfile) -> Result<Self> {
        check_dimension(n)?;
        let ok = match warp {
            WarpProfile::Cosh { rate } => rate.is_finite(),
            WarpProfile::Bump { amplitude, width } => amplitude.is_finite() && width > 0.0 && width.is_finite(),
        };
        if !ok {
            return Err(Error::Config(format!("invalid warp profile {warp:?}")));
        }
        Ok(MetricFamily::Warped { n, warp })
    }

    pub fn dim(&self) -> usize {
        match *self {
            MetricFamily::Minkowski { n } | MetricFamily::ConformalBump { n, .. } | MetricFamily::Warped { n, .. } => n,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MetricFamily::Minkowski { .. } => "minkowski",
            MetricFamily::ConformalBump { .. } => "conformal_bump",
            MetricFamily::Warped { .. } => "warped",
        }
    }

    /// Radius outside of which the metric is exactly Minkowski, if any.
    pub fn perturbation_radius(&self) -> Option<f64> {
        match *self {
            MetricFamily::Minkowski { .. } => Some(0.0),
            MetricFamily::ConformalBump { amplitude, width, profile, .. } => {
                if amplitude == 0.0 {
                    Some(0.0)
                } else if profile == BumpProfile::Compact {
                    Some(width)
                } else {
                    None
                }
            }
            MetricFamily::Warped { .. } => None,
        }
    }

    /// Radius beyond which the metric differs from Minkowski by less than
    /// `tol` in every entry. Equals the perturbation radius for compact
    /// families.
    pub fn effective_radius(&self, tol: f64) -> f64 {
        match *self {
            MetricFamily::ConformalBump { amplitude, width, profile: BumpProfile::Gaussian, .. } => {
                if amplitude == 0.0 {
                    0.0
                } else {
                    width * ((amplitude.abs() * 3.0 / tol).ln().max(0.0)).sqrt()
                }
            }
            MetricFamily::Warped { .. } => f64::INFINITY,
            _ => self.perturbation_radius().unwrap_or(f64::INFINITY),
        }
    }

    /// Conservative radius of geodesic balls on which the exponential map is
    /// a diffeomorphism (no conjugate points), from a curvature scale bound.
    pub fn normal_radius(&self) -> f64 {
        match *self {
            MetricFamily::Minkowski { .. } => f64::INFINITY,
            MetricFamily::ConformalBump { amplitude, width, .. } => {
                if amplitude == 0.0 {
                    f64::INFINITY
                } else {
                    0.5 * std::f64::consts::PI * width / amplitude.abs().sqrt()
                }
            }
            MetricFamily::Warped { warp, .. } => match warp {
                WarpProfile::Cosh { rate } => {
                    if rate == 0.0 {
                        f64::INFINITY
                    } else {
                        0.5 * std::f64::consts::PI / rate.abs()
                    }
                }
                WarpProfile::Bump { amplitude, width } => {
                    if amplitude == 0.0 {
                        f64::INFINITY
                    } else {
                        0.5 * std::f64::consts::PI * width / amplitude.abs().sqrt()
                    }
                }
            },
        }
    }

    /// All built-in families carry closed-form first and second derivatives.
    pub fn has_analytic_derivatives(&self) -> bool {
        true
    }

    /// True when the metric and all its derivatives equal the flat ones at x.
    pub fn is_flat_at(&self, x: &[f64]) -> bool {
        match *self {
            MetricFamily::Minkowski { .. } => true,
            MetricFamily::ConformalBump { amplitude, width, profile, .. } => {
                amplitude == 0.0 || (profile == BumpProfile::Compact && euclid_sq(x) >= width * width)
            }
            MetricFamily::Warped { warp, .. } => match warp {
                WarpProfile::Cosh { rate } => rate == 0.0,
                WarpProfile::Bump { amplitude, width } => amplitude == 0.0 || x[0] * x[0] >= width * width,
            },
        }
    }

    /// Conformal exponent φ and its first/second derivatives, for the
    /// conformal family only.
    pub fn conformal_factor(&self, x: &[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)> {
        if let MetricFamily::ConformalBump { n, amplitude, width, profile } = *self {
            let s = euclid_sq(x);
            let (p, d1, d2) = bump_profile(profile, width, s);
            let phi = amplitude * p;
            let dphi: Vec<f64> = (0..n).map(|m| 2.0 * amplitude * d1 * x[m]).collect();
            let ddphi = DMatrix::from_fn(n, n, |m, v| amplitude * (4.0 * d2 * x[m] * x[v] + if m == v { 2.0 * d1 } else { 0.0 }));
            Some((phi, dphi, ddphi))
        } else {
            None
        }
    }

    /// Scale factor (a, ȧ, ä) of the warped family at time t.
    pub fn warp_factor(&self, t: f64) -> Option<(f64, f64, f64)> {
        if let MetricFamily::Warped { warp, .. } = *self {
            Some(match warp {
                WarpProfile::Cosh { rate } => {
                    let (c, s) = ((rate * t).cosh(), (rate * t).sinh());
                    (c, rate * s, rate * rate * c)
                }
                WarpProfile::Bump { amplitude, width } => {
                    let (p, d1, d2) = bump_profile(BumpProfile::Compact, width, t * t);
                    let e = (amplitude * p).exp();
                    // b(t) = amplitude ψ(t²): b' = 2 a ψ' t, b'' = a (4ψ'' t² + 2ψ')
                    let b1 = 2.0 * amplitude * d1 * t;
                    let b2 = amplitude * (4.0 * d2 * t * t + 2.0 * d1);
                    (e, e * b1, e * (b2 + b1 * b1))
                }
            })
        } else {
            None
        }
    }

    fn raw_metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        match self {
            MetricFamily::Minkowski { .. } => minkowski(n),
            MetricFamily::ConformalBump { .. } => {
                if self.is_flat_at(x) {
                    return minkowski(n);
                }
                let (phi, _, _) = self.conformal_factor(x).expect("conformal family");
                minkowski(n) * (2.0 * phi).exp()
            }
            MetricFamily::Warped { .. } => {
                let (a, _, _) = self.warp_factor(x[0]).expect("warped family");
                DMatrix::from_fn(n, n, |i, j| {
                    if i != j {
                        0.0
                    } else if i == 0 {
                        1.0
                    } else {
                        -a * a
                    }
                })
            }
        }
    }

    /// g_{μν}(x), with a signature check.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if x.len() != n || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("point {x:?} is not a finite {n}-vector")));
        }
        let g = self.raw_metric(x);
        check_signature(&g, x)?;
        Ok(g)
    }

    /// Metric with analytic first and second derivatives.
    pub fn jet(&self, x: &[f64]) -> MetricJet {
        let n = self.dim();
        let zero = DMatrix::<f64>::zeros(n, n);
        let flat = || MetricJet { g: minkowski(n), dg: vec![zero.clone(); n], ddg: vec![zero.clone(); n * n] };
        if self.is_flat_at(x) {
            return flat();
        }
        match self {
            MetricFamily::Minkowski { .. } => flat(),
            MetricFamily::ConformalBump { .. } => {
                let (phi, dphi, ddphi) = self.conformal_factor(x).expect("conformal family");
                let g = minkowski(n) * (2.0 * phi).exp();
                let dg = (0..n).map(|k| &g * (2.0 * dphi[k])).collect();
                let mut ddg = Vec::with_capacity(n * n);
                for k in 0..n {
                    for l in 0..n {
                        ddg.push(&g * (4.0 * dphi[k] * dphi[l] + 2.0 * ddphi[(k, l)]));
                    }
                }
                MetricJet { g, dg, ddg }
            }
            MetricFamily::Warped { .. } => {
                let (a, a1, a2) = self.warp_factor(x[0]).expect("warped family");
                let spatial = |v: f64| DMatrix::from_fn(n, n, |i, j| if i == j && i > 0 { v } else { 0.0 });
                let g = DMatrix::from_fn(n, n, |i, j| {
                    if i != j {
                        0.0
                    } else if i == 0 {
                        1.0
                    } else {
                        -a * a
                    }
                });
                let mut dg = vec![zero.clone(); n];
                dg[0] = spatial(-2.0 * a * a1);
                let mut ddg = vec![zero.clone(); n * n];
                ddg[0] = spatial(-2.0 * (a1 * a1 + a * a2));
                MetricJet { g, dg, ddg }
            }
        }
    }

    /// Metric jet by fourth-order central differences of g with spacing `h`.
    pub fn jet_fd(&self, x: &[f64], h: f64) -> MetricJet {
        let n = self.dim();
        let g0 = self.raw_metric(x);
        let shifted = |offs: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(k, d) in offs {
                y[k] += d;
            }
            self.raw_metric(&y)
        };
        let c1 = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let d1 = shifted(&[(k, h)]) - shifted(&[(k, -h)]);
                let d2 = shifted(&[(k, 2.0 * h)]) - shifted(&[(k, -2.0 * h)]);
                (d1 * 8.0 - d2) / (12.0 * h)
            })
            .collect();
        let mut ddg = vec![DMatrix::<f64>::zeros(n, n); n * n];
        for k in 0..n {
            for l in k..n {
                let mut acc = DMatrix::<f64>::zeros(n, n);
                if k == l {
                    let c2 = [(-2.0, -1.0 / 12.0), (-1.0, 16.0 / 12.0), (0.0, -30.0 / 12.0), (1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];
                    for &(s, w) in &c2 {
                        if s == 0.0 {
                            acc += &g0 * w;
                        } else {
                            acc += shifted(&[(k, s * h)]) * w;
                        }
                    }
                } else {
                    for &(s, w) in &c1 {
                        for &(t, v) in &c1 {
                            acc += shifted(&[(k, s * h), (l, t * h)]) * (w * v);
                        }
                    }
                }
                acc /= h * h;
                ddg[k * n + l] = acc.clone();
                ddg[l * n + k] = acc;
            }
        }
        MetricJet { g: g0, dg, ddg }
    }
}

/// Orthonormal frame for g by Gram–Schmidt on the coordinate basis,
/// starting from ∂₀. Column a of the result holds e_a^μ, so that
/// eᵀ g e = η. Fails when a basis vector becomes null.
pub fn gram_schmidt_frame(g: &DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let mut e = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let mut v = DVector::<f64>::zeros(n);
        v[a] = 1.0;
        for b in 0..a {
            let eb = e.column(b).into_owned();
            let proj = (v.transpose() * g * &eb)[(0, 0)] * eta(b);
            v -= eb * proj;
        }
        let norm2 = (v.transpose() * g * &v)[(0, 0)];
        let expected = eta(a);
        if !(norm2 * expected > 1e-14) {
            return Err(Error::SingularMetric { point: x.to_vec() });
        }
        v /= (norm2 * expected).sqrt();
        e.set_column(a, &v);
    }
    Ok(e)
}

pub(crate) fn euclid_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Count of (positive, negative) eigenvalues of a symmetric matrix.
pub fn inertia(g: &DMatrix<f64>) -> (usize, usize) {
    let eig = nalgebra::SymmetricEigen::new(g.clone());
    let pos = eig.eigenvalues.iter().filter(|&&v| v > 0.0).count();
    let neg = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
    (pos, neg)
}

fn check_signature(g: &DMatrix<f64>, x: &[f64]) -> Result<()> {
    let n = g.nrows();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("metric is not finite at x = {x:?}")));
    }
    let (pos, neg) = inertia(g);
    if pos != 1 || neg != n - 1 {
        return Err(Error::Config(format!("metric at x = {x:?} has signature ({pos}, {neg}), expected (1, {})", n - 1)));
    }
    Ok(())
}

/// g⁻¹ or `SingularMetric`.
pub(crate) fn invert_metric(g: &DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    let det = g.determinant();
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return Err(Error::SingularMetric { point: x.to_vec() });
    }
    g.clone().try_inverse().ok_or_else(|| Error::SingularMetric { point: x.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minkowski_metric_is_eta() {
        let f = MetricFamily::minkowski(2).unwrap();
        assert_eq!(f.metric_at(&[0.3, -2.0]).unwrap(), minkowski(2));
    }

    #[test]
    fn conformal_gaussian_at_origin() {
        let f = MetricFamily::conformal_bump(2, 0.1, 1.0, BumpProfile::Gaussian).unwrap();
        let g = f.metric_at(&[0.0, 0.0]).unwrap();
        let e = 0.2f64.exp();
        assert!((g[(0, 0)] - e).abs() < 1e-15 && (g[(1, 1)] + e).abs() < 1e-15);
    }

    #[test]
    fn zero_amplitude_is_flat() {
        let f = MetricFamily::conformal_bump(4, 0.0, 1.0, BumpProfile::Gaussian).unwrap();
        assert_eq!(f.metric_at(&[0.1, 0.2, 0.3, 0.4]).unwrap(), minkowski(4));
    }

    #[test]
    fn compact_bump_is_exactly_flat_outside_support() {
        let f = MetricFamily::conformal_bump(2, 0.3, 1.5, BumpProfile::Compact).unwrap();
        let jet = f.jet(&[1.2, 0.9]);
        assert_eq!(jet.g, minkowski(2));
        assert!(jet.dg.iter().chain(jet.ddg.iter()).all(|m| m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn analytic_jet_matches_finite_differences() {
        let fams = [
            MetricFamily::conformal_bump(2, 0.2, 1.0, BumpProfile::Compact).unwrap(),
            MetricFamily::conformal_bump(4, 0.1, 1.3, BumpProfile::Gaussian).unwrap(),
            MetricFamily::warped(2, WarpProfile::Cosh { rate: 0.7 }).unwrap(),
            MetricFamily::warped(4, WarpProfile::Bump { amplitude: 0.2, width: 1.0 }).unwrap(),
        ];
        for f in &fams {
            let n = f.dim();
            let x: Vec<f64> = (0..n).map(|i| 0.13 * (i as f64 + 1.0) - 0.2).collect();
            let a = f.jet(&x);
            let d = f.jet_fd(&x, 1e-3);
            for k in 0..n {
                assert!((&a.dg[k] - &d.dg[k]).amax() < 1e-9, "{f:?} dg");
            }
            for k in 0..n * n {
                assert!((&a.ddg[k] - &d.ddg[k]).amax() < 1e-6, "{f:?} ddg");
            }
        }
    }

    #[test]
    fn odd_dimension_is_unsupported() {
        assert!(matches!(MetricFamily::minkowski(3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn signature_is_lorentzian_on_samples() {
        let f = MetricFamily::conformal_bump(4, 0.5, 1.0, BumpProfile::Compact).unwrap();
        for i in 0..20 {
            let x: Vec<f64> = (0..4).map(|k| ((i * 7 + k * 3) % 11) as f64 * 0.1 - 0.5).collect();
            assert_eq!(inertia(&f.metric_at(&x).unwrap()), (1, 3));
        }
    }
}
