//! Rescaled Hamilton flow of the principal symbol p = g^{μν}ξ_μξ_ν on the
//! compactified scattering phase space.
//!
//! Two charts are used. The interior chart carries (x, ξ). The boundary
//! chart carries (ρ, y, τ, μ) with ρ = ⟨x⟩⁻¹, y = x/|x| ∈ S^{n−1} (stored as
//! a unit vector in ℝⁿ) and the covector written τ dρ/ρ² + μ·dy/ρ, where μ
//! is stored as an n-vector orthogonal to y. Fibre infinity is measured by
//! ρ_∞ = (1 + |ξ|²)^{−1/2}. The rescaled field is H̄ = ρ⁻¹ρ_∞H_p.

mod flow;
mod radial;

pub use flow::{flow_integrate, trajectory_csv, FlowOptions, Terminal, Trajectory, TrajectoryRow};
pub use radial::{
    nontrapping_check, radial_label, radial_set_classify, NontrappingReport, RadialLabel, RadialSetReport, SeedLog, SignConditions, Verdict,
};

use crate::error::{Error, Result};
use crate::geometry::{eta, MetricFamily};
use serde::{Deserialize, Serialize};

/// Default dynamics tolerance.
pub const TOL_DYN: f64 = 1e-6;

/// A point of the compactified phase space in one of the two charts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "snake_case")]
pub enum PhasePoint {
    Interior { x: Vec<f64>, xi: Vec<f64> },
    Boundary { rho: f64, y: Vec<f64>, tau: f64, mu: Vec<f64> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl PhasePoint {
    pub fn dim(&self) -> usize {
        match self {
            PhasePoint::Interior { x, .. } => x.len(),
            PhasePoint::Boundary { y, .. } => y.len(),
        }
    }

    pub fn is_boundary_chart(&self) -> bool {
        matches!(self, PhasePoint::Boundary { .. })
    }

    /// ρ = ⟨x⟩⁻¹.
    pub fn rho(&self) -> f64 {
        match self {
            PhasePoint::Interior { x, .. } => 1.0 / (1.0 + dot(x, x)).sqrt(),
            PhasePoint::Boundary { rho, .. } => *rho,
        }
    }

    /// The covector ξ in Cartesian components.
    pub fn covector(&self) -> Vec<f64> {
        match self {
            PhasePoint::Interior { xi, .. } => xi.clone(),
            PhasePoint::Boundary { rho, y, tau, mu } => {
                let s = (1.0 - rho * rho).sqrt();
                mu.iter().zip(y).map(|(m, yy)| m / s - tau * s * yy).collect()
            }
        }
    }

    /// ρ_∞ = (1 + |ξ|²)^{−1/2}.
    pub fn rho_inf(&self) -> f64 {
        let xi = self.covector();
        1.0 / (1.0 + dot(&xi, &xi)).sqrt()
    }

    /// Base point x, or None at base infinity.
    pub fn base_point(&self) -> Option<Vec<f64>> {
        match self {
            PhasePoint::Interior { x, .. } => Some(x.clone()),
            PhasePoint::Boundary { rho, y, .. } => {
                if *rho <= 0.0 {
                    None
                } else {
                    let r = (1.0 - rho * rho).sqrt() / rho;
                    Some(y.iter().map(|v| v * r).collect())
                }
            }
        }
    }

    pub fn to_interior(&self) -> Result<PhasePoint> {
        match self {
            PhasePoint::Interior { .. } => Ok(self.clone()),
            PhasePoint::Boundary { .. } => {
                let x = self.base_point().ok_or_else(|| Error::InvalidInput("point at base infinity has no interior coordinates".into()))?;
                Ok(PhasePoint::Interior { x, xi: self.covector() })
            }
        }
    }

    pub fn to_boundary(&self) -> Result<PhasePoint> {
        match self {
            PhasePoint::Boundary { .. } => Ok(self.clone()),
            PhasePoint::Interior { x, xi } => {
                let r = norm(x);
                if r < 1e-300 {
                    return Err(Error::InvalidInput("the boundary chart does not cover x = 0".into()));
                }
                let bracket = (1.0 + r * r).sqrt();
                let y: Vec<f64> = x.iter().map(|v| v / r).collect();
                let s = r / bracket;
                let q = dot(xi, &y);
                let mu = xi.iter().zip(&y).map(|(a, b)| s * (a - q * b)).collect();
                Ok(PhasePoint::Boundary { rho: 1.0 / bracket, y, tau: -q / s, mu })
            }
        }
    }

    /// Flattened chart coordinates: [x, ξ] or [ρ, y, τ, μ].
    pub fn coords(&self) -> Vec<f64> {
        match self {
            PhasePoint::Interior { x, xi } => x.iter().chain(xi).cloned().collect(),
            PhasePoint::Boundary { rho, y, tau, mu } => {
                let mut v = vec![*rho];
                v.extend_from_slice(y);
                v.push(*tau);
                v.extend_from_slice(mu);
                v
            }
        }
    }

    pub fn from_coords(boundary: bool, n: usize, c: &[f64]) -> PhasePoint {
        if boundary {
            PhasePoint::Boundary { rho: c[0], y: c[1..1 + n].to_vec(), tau: c[1 + n], mu: c[2 + n..2 + 2 * n].to_vec() }
        } else {
            PhasePoint::Interior { x: c[..n].to_vec(), xi: c[n..2 * n].to_vec() }
        }
    }

    /// Put y back on the unit sphere and μ back in its tangent space.
    pub(crate) fn normalize(&mut self) {
        if let PhasePoint::Boundary { y, mu, .. } = self {
            let ny = norm(y);
            if ny > 0.0 {
                y.iter_mut().for_each(|v| *v /= ny);
            }
            let q = dot(mu, y);
            for (m, yy) in mu.iter_mut().zip(y.iter()) {
                *m -= q * yy;
            }
        }
    }
}

/// Families whose metric is Minkowski (exactly or to all orders) outside a
/// bounded set; the others have no radial sets of the flat type.
pub fn check_flat_tail(family: &MetricFamily) -> Result<()> {
    if let MetricFamily::Warped { .. } = family {
        return Err(Error::Precondition("warped families do not approach Minkowski space at spatial infinity".into()));
    }
    Ok(())
}

/// p, ∂_x p and ∂_ξ p at (x, ξ); `x = None` means base infinity.
pub(crate) struct SymbolJet {
    pub p: f64,
    pub dx: Vec<f64>,
    pub dxi: Vec<f64>,
}

pub(crate) fn symbol_jet(family: &MetricFamily, x: Option<&[f64]>, xi: &[f64]) -> Result<SymbolJet> {
    let n = xi.len();
    let flat = |xi: &[f64]| {
        let e: Vec<f64> = (0..n).map(|a| eta(a) * xi[a]).collect();
        SymbolJet { p: dot(xi, &e), dx: vec![0.0; n], dxi: e.iter().map(|v| 2.0 * v).collect() }
    };
    let Some(x) = x else { return Ok(flat(xi)) };
    if family.is_flat_at(x) {
        return Ok(flat(xi));
    }
    let jet = family.jet(x);
    let ginv = jet.g.clone().try_inverse().ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
    let v = nalgebra::DVector::from_column_slice(xi);
    let gv = &ginv * &v;
    let p = v.dot(&gv);
    let dx = (0..n).map(|k| -gv.dot(&(&jet.dg[k] * &gv))).collect();
    Ok(SymbolJet { p, dx, dxi: gv.iter().map(|a| 2.0 * a).collect() })
}

/// p = g^{μν}(x)ξ_μξ_ν at the point (the flat form at base infinity).
pub fn principal_symbol(family: &MetricFamily, point: &PhasePoint) -> Result<f64> {
    let xi = point.covector();
    let x = point.base_point();
    Ok(symbol_jet(family, x.as_deref(), &xi)?.p)
}

/// H̄_p in the chart of `point`, flattened like [`PhasePoint::coords`].
pub fn rescaled_hamilton_field(family: &MetricFamily, point: &PhasePoint) -> Result<Vec<f64>> {
    let n = point.dim();
    let rho_inf = point.rho_inf();
    match point {
        PhasePoint::Interior { x, xi } => {
            let j = symbol_jet(family, Some(x), xi)?;
            let f = rho_inf / point.rho();
            Ok(j.dxi.iter().map(|v| f * v).chain(j.dx.iter().map(|v| -f * v)).collect())
        }
        PhasePoint::Boundary { rho, y, tau, mu } => {
            let rho = *rho;
            let s = (1.0 - rho * rho).sqrt();
            let xi = point.covector();
            let x = point.base_point();
            let j = symbol_jet(family, x.as_deref(), &xi)?;
            let xdot = &j.dxi;
            let a = dot(y, xdot);
            // ρ⁻¹·d/dt of ρ, y, ξ, s, q = ξ·y
            let r_c = -rho * s * a;
            let yv: Vec<f64> = xdot.iter().zip(y).map(|(v, yy)| (v - a * yy) / s).collect();
            let xv: Vec<f64> = if rho > 0.0 { j.dx.iter().map(|d| -d / rho).collect() } else { vec![0.0; n] };
            let s_c = a * rho * rho;
            let q = -tau * s;
            let q_c = dot(y, &xv) + dot(&xi, &yv);
            let t_c = -q_c / s + q * s_c / (s * s);
            let m_c: Vec<f64> = (0..n).map(|i| s_c * mu[i] / s + s * (xv[i] - q_c * y[i] - q * yv[i])).collect();
            let mut out = Vec::with_capacity(2 * n + 2);
            out.push(rho_inf * r_c);
            out.extend(yv.iter().map(|v| rho_inf * v));
            out.push(rho_inf * t_c);
            out.extend(m_c.iter().map(|v| rho_inf * v));
            Ok(out)
        }
    }
}

/// Standard Hamilton field (∂_ξ p, −∂_x p) at an interior point.
pub fn hamilton_field(family: &MetricFamily, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
    let j = symbol_jet(family, Some(x), xi)?;
    Ok(j.dxi.iter().cloned().chain(j.dx.iter().map(|v| -v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BumpProfile;

    #[test]
    fn symbol_examples() {
        let m = MetricFamily::minkowski(2).unwrap();
        let p0 = PhasePoint::Interior { x: vec![0.3, 0.1], xi: vec![1.0, 1.0] };
        assert_eq!(principal_symbol(&m, &p0).unwrap(), 0.0);
        let p1 = PhasePoint::Interior { x: vec![0.3, 0.1], xi: vec![2.0, 1.0] };
        assert_eq!(principal_symbol(&m, &p1).unwrap(), 3.0);
        let bump = MetricFamily::conformal_bump(2, 0.05, 1.0, BumpProfile::Compact).unwrap();
        let far = PhasePoint::Interior { x: vec![1.5, 0.2], xi: vec![2.0, 1.0] };
        assert_eq!(principal_symbol(&bump, &far).unwrap(), 3.0);
    }

    #[test]
    fn charts_round_trip() {
        let p = PhasePoint::Interior { x: vec![0.7, -1.2, 0.4, 2.0], xi: vec![0.3, 0.5, -0.8, 0.1] };
        let b = p.to_boundary().unwrap();
        let back = b.to_interior().unwrap();
        for (u, v) in p.coords().iter().zip(back.coords()) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!((p.rho_inf() - b.rho_inf()).abs() < 1e-14);
    }

    #[test]
    fn boundary_field_is_the_pushforward() {
        let bump = MetricFamily::conformal_bump(2, 0.2, 1.0, BumpProfile::Gaussian).unwrap();
        let p = PhasePoint::Interior { x: vec![0.6, -0.4], xi: vec![0.9, 0.5] };
        let hi = rescaled_hamilton_field(&bump, &p).unwrap();
        let hb = rescaled_hamilton_field(&bump, &p.to_boundary().unwrap()).unwrap();
        let c0 = p.coords();
        let h = 1e-6;
        let shifted = |t: f64| {
            let c: Vec<f64> = c0.iter().zip(&hi).map(|(a, v)| a + t * v).collect();
            PhasePoint::from_coords(false, 2, &c).to_boundary().unwrap().coords()
        };
        let (a, b) = (shifted(h), shifted(-h));
        for k in 0..hb.len() {
            let fd = (a[k] - b[k]) / (2.0 * h);
            assert!((fd - hb[k]).abs() < 1e-8, "component {k}: {fd} vs {}", hb[k]);
        }
        // interior field is the standard Hamilton field up to the positive factor ρ⁻¹ρ_∞
        let hs = hamilton_field(&bump, &[0.6, -0.4], &[0.9, 0.5]).unwrap();
        let f = p.rho_inf() / p.rho();
        assert!(hs.iter().zip(&hi).all(|(s, r)| (f * s - r).abs() < 1e-14));
    }
}
