//! Functions of (P + iε) through the Mellin–Barnes representation
//!
//! f(x) = ∫₀^∞ f̂(t) e^{ix/t} dt/t,
//! f(P + iε) = (1/2πi) ∫_{Re α = c} e^{iαπ/2} (P + iε)^{−α} Γ(α) ℳf̂(α) dα.

use super::flat::{continuum_zeta_density, Shift};
use crate::error::{Error, Result};
use crate::special::{composite_c, gamma, C64};
use crate::spectral::{Provenance, ZetaSample};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Built-in profiles f̂(t) = t^p e^{−t}, with ℳf̂(α) = Γ(α+p).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchwartzProfile {
    pub power: u32,
}

impl Default for SchwartzProfile {
    fn default() -> Self {
        SchwartzProfile { power: 1 }
    }
}

impl SchwartzProfile {
    pub fn hat(&self, t: f64) -> f64 {
        t.powi(self.power as i32) * (-t).exp()
    }

    pub fn mellin(&self, alpha: C64) -> C64 {
        gamma(alpha + self.power as f64)
    }

    /// c₀ = ∫₀^∞ f̂(t) t^{n/2−1} dt.
    pub fn leading_moment(&self, n: usize) -> f64 {
        gamma(C64::new(n as f64 / 2.0 + self.power as f64, 0.0)).re
    }

    /// f(x) for Im x ≥ 0 by quadrature in log t.
    pub fn evaluate(&self, x: C64) -> Result<C64> {
        if x.im < 0.0 {
            return Err(Error::InvalidInput(format!("f is evaluated on the closed upper half-plane (x = {x})")));
        }
        let lo = if x.im > 0.0 { (x.im / 800.0).min(1e-3).ln() } else { -30.0 };
        let hi = 60f64.ln();
        let p = self.power as i32;
        let val = composite_c(lo, hi, 600, 16, |s| {
            let t = s.exp();
            let phase = C64::new(0.0, 1.0) * x / t;
            phase.exp() * t.powi(p) * (-t).exp()
        });
        Ok(val)
    }
}

/// Samples of the Mellin–Barnes integrand on the line Re α = c.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MellinResult {
    pub value: C64,
    /// Largest integrand magnitude at the two ends of the line, relative
    /// to its maximum.
    pub truncation: f64,
    pub samples: usize,
}

/// Relative endpoint magnitude above which the line integral is rejected.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Trapezoid rule over equispaced samples α_j = c + i y_j of the
/// density of (P + iε)^{−α}, sorted by Im α.
pub fn schwartz_function_of_power(samples: &[ZetaSample], profile: &SchwartzProfile) -> Result<MellinResult> {
    if samples.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 samples on the vertical line".into()));
    }
    let c = samples[0].alpha.re;
    let dy = samples[1].alpha.im - samples[0].alpha.im;
    if !(dy > 0.0) {
        return Err(Error::InvalidInput("samples must increase in Im α".into()));
    }
    for (j, s) in samples.iter().enumerate() {
        let want = samples[0].alpha.im + j as f64 * dy;
        if (s.alpha.re - c).abs() > 1e-12 * (1.0 + c.abs()) || (s.alpha.im - want).abs() > 1e-9 * dy * (j as f64 + 1.0) {
            return Err(Error::InvalidInput(format!("sample {j} is not on the uniform line Re α = {c}")));
        }
        if !s.value.is_finite() {
            return Err(Error::InvalidInput(format!("sample {j} is not finite")));
        }
    }
    let integrand: Vec<C64> =
        samples.iter().map(|s| (C64::new(0.0, PI / 2.0) * s.alpha).exp() * s.value * gamma(s.alpha) * profile.mellin(s.alpha)).collect();
    let peak = integrand.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let ends = integrand[0].norm().max(integrand[integrand.len() - 1].norm());
    let truncation = if peak > 0.0 { ends / peak } else { 0.0 };
    if truncation > TRUNCATION_TOL {
        return Err(Error::TruncationError { bound: ends });
    }
    let mut sum: C64 = integrand.iter().sum();
    sum -= (integrand[0] + integrand[integrand.len() - 1]) * 0.5;
    Ok(MellinResult { value: sum * dy / (2.0 * PI), truncation, samples: samples.len() })
}

/// Equispaced points c + i y on [−y_max, y_max].
pub fn vertical_line(c: f64, y_max: f64, count: usize) -> Vec<C64> {
    let dy = 2.0 * y_max / (count - 1) as f64;
    (0..count).map(|j| C64::new(c, -y_max + j as f64 * dy)).collect()
}

/// Closed-form samples of the flat density of (s(P₀ + iε))^{−α}.
pub fn scaled_flat_samples(n: usize, epsilon: f64, scale: f64, line: &[C64]) -> Result<Vec<ZetaSample>> {
    line.iter()
        .map(|&alpha| {
            let d = continuum_zeta_density(n, alpha, epsilon, Shift::Plus)?;
            Ok(ZetaSample { alpha, epsilon, x: Vec::new(), value: d * C64::new(scale, 0.0).powc(-alpha), provenance: Provenance::FlatClosedForm })
        })
        .collect()
}

/// Result of the small-h fit of tr f(h²(P + iε)).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub h: Vec<f64>,
    pub values: Vec<C64>,
    /// Least-squares slope of log|value| against log h.
    pub slope: f64,
    /// Predicted leading coefficient −i e^{iπn/4} c₀ rk / (4π)^{n/2}.
    pub predicted_leading: C64,
    /// h^n · value at the smallest h.
    pub observed_leading: C64,
}

/// Fit the h-scaling of f(h²(P₀ + iε)) on the diagonal for the flat operator
/// of fibre rank `rank`.
pub fn h_scaling_fit(n: usize, rank: usize, epsilon: f64, profile: &SchwartzProfile, c: f64, hs: &[f64]) -> Result<ScalingFit> {
    if hs.len() < 2 {
        return Err(Error::InvalidInput("need at least two h values".into()));
    }
    if c <= n as f64 / 2.0 {
        return Err(Error::InvalidInput(format!("line Re α = {c} must lie right of the poles (> {})", n as f64 / 2.0)));
    }
    let line = vertical_line(c, 60.0, 2401);
    let mut values = Vec::new();
    for &h in hs {
        let samples = scaled_flat_samples(n, epsilon, h * h, &line)?;
        values.push(schwartz_function_of_power(&samples, profile)?.value * rank as f64);
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.norm().ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let hmin = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let imin = hs.iter().position(|&h| h == hmin).unwrap_or(0);
    let predicted_leading =
        C64::new(0.0, -1.0) * C64::from_polar(1.0, PI * n as f64 / 4.0) * profile.leading_moment(n) * rank as f64 / (4.0 * PI).powf(n as f64 / 2.0);
    Ok(ScalingFit { h: hs.to_vec(), observed_leading: values[imin] * hmin.powi(n as i32), values, slope: sxy / sxx, predicted_leading })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_power_reproduces_f() {
        let prof = SchwartzProfile::default();
        for x in [C64::new(0.8, 0.3), C64::new(-1.5, 0.5), C64::new(2.0, 1.0)] {
            let line = vertical_line(1.5, 60.0, 2401);
            let samples: Vec<ZetaSample> = line
                .iter()
                .map(|&a| ZetaSample { alpha: a, epsilon: x.im, x: vec![], value: x.powc(-a), provenance: Provenance::Eigendecomposition })
                .collect();
            let mb = schwartz_function_of_power(&samples, &prof).unwrap().value;
            let direct = prof.evaluate(x).unwrap();
            assert!((mb - direct).norm() < 1e-6, "{x}: {mb} vs {direct}");
        }
    }

    #[test]
    fn moment_and_truncation() {
        let prof = SchwartzProfile::default();
        assert!((prof.leading_moment(2) - 1.0).abs() < 1e-14);
        let line = vertical_line(1.5, 3.0, 61);
        let samples: Vec<ZetaSample> = line
            .iter()
            .map(|&a| ZetaSample {
                alpha: a,
                epsilon: 0.5,
                x: vec![],
                value: C64::new(1.0, 0.5).powc(-a),
                provenance: Provenance::Eigendecomposition,
            })
            .collect();
        assert!(matches!(schwartz_function_of_power(&samples, &prof), Err(Error::TruncationError { .. })));
    }

    #[test]
    fn h_scaling_slope_is_minus_n() {
        let fit = h_scaling_fit(2, 2, 0.1, &SchwartzProfile::default(), 1.5, &[0.5, 0.25, 0.125]).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.05, "{fit:?}");
    }
}
