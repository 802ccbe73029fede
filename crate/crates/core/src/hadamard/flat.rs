//! Flat-space diagonal distributions and residue constants.
//!
//! With |ξ|²_η = −ξ₀² + |ξ'|² and Im λ > 0,
//!
//! F_α(λ) = Γ(α+1)/(2π)ⁿ ∫ (|ξ|²_η − λ)^{−α−1} dⁿξ
//!        = i Γ(α+1−n/2) / (2ⁿ π^{n/2}) · (−λ)^{n/2−α−1},
//!
//! obtained by rotating ξ₀ → e^{iθ}ξ₀ (0 < θ ≤ π/2) so that the integrand
//! never meets the cut of the principal power. The density of
//! (P − iε)^{−α} on the diagonal is F_{α−1}(iε)/Γ(α).

use crate::clifford::CMat;
use crate::error::{Error, Result};
use crate::special::{composite_c, factorial, gamma, gamma_pole_distance, nonpositive_integer, rgamma, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Distance to a pole below which closed forms refuse to evaluate.
pub const POLE_TOLERANCE: f64 = 1e-6;

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("dimension {n} (need n >= 2)")));
    }
    Ok(())
}

/// F_α(λ) on the diagonal from the closed form.
pub fn flat_f_alpha_diag(n: usize, alpha: C64, lambda: C64) -> Result<C64> {
    check_dim(n)?;
    if !(lambda.im > 0.0) {
        return Err(Error::InvalidInput(format!("λ = {lambda} must lie in the upper half-plane")));
    }
    let g_arg = alpha + 1.0 - n as f64 / 2.0;
    let d = gamma_pole_distance(g_arg);
    if d < POLE_TOLERANCE {
        return Err(Error::PoleProximity { alpha, distance: d });
    }
    let pref = C64::new(0.0, 1.0) / (2f64.powi(n as i32) * PI.powf(n as f64 / 2.0));
    Ok(pref * gamma(g_arg) * (-lambda).powc(n as f64 / 2.0 - alpha - 1.0))
}

/// F_α(λ) by direct quadrature of the rotated integral ξ₀ = e^{iθ}η,
/// reduced to a two-dimensional (η, |ξ'|) integral. Converges for
/// Re α > n/2 − 1; accurate for Re α well above that.
pub fn flat_f_alpha_quadrature(n: usize, alpha: C64, lambda: C64, theta: f64, panels: usize) -> Result<C64> {
    check_dim(n)?;
    if !(lambda.im > 0.0) {
        return Err(Error::InvalidInput(format!("λ = {lambda} must lie in the upper half-plane")));
    }
    if !(theta > 0.0 && theta <= PI / 2.0) {
        return Err(Error::InvalidInput(format!("rotation angle {theta} outside (0, π/2]")));
    }
    if alpha.re <= n as f64 / 2.0 - 1.0 {
        return Err(Error::InvalidInput(format!("Re α = {} below the convergence bound {}", alpha.re, n as f64 / 2.0 - 1.0)));
    }
    let rot = C64::from_polar(1.0, theta);
    let rot2 = rot * rot;
    let m = n - 1;
    // area of the unit sphere S^{m-1} in ℝ^m (2 for m = 1)
    let sphere = 2.0 * PI.powf(m as f64 / 2.0) / gamma(C64::new(m as f64 / 2.0, 0.0)).re;
    let expo = -alpha - 1.0;
    // t ∈ [0,1) ↦ x = t/(1−t)
    let map = |t: f64| (t / (1.0 - t), 1.0 / ((1.0 - t) * (1.0 - t)));
    let inner = |eta: f64| {
        composite_c(0.0, 1.0, panels, 16, |u| {
            if u >= 1.0 {
                return C64::new(0.0, 0.0);
            }
            let (rho, jac) = map(u);
            let base = C64::new(rho * rho, 0.0) - rot2 * eta * eta - lambda;
            base.powc(expo) * rho.powi(m as i32 - 1) * jac
        })
    };
    let outer = composite_c(0.0, 1.0, panels, 16, |t| {
        if t >= 1.0 {
            return C64::new(0.0, 0.0);
        }
        let (eta, jac) = map(t);
        inner(eta) * jac
    });
    let integral = outer * 2.0 * rot * sphere;
    Ok(gamma(alpha + 1.0) * integral / (2.0 * PI).powi(n as i32))
}

/// Sign of the imaginary shift in (P ∓ iε)^{−α}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    /// (P − iε)^{−α}
    Minus,
    /// (P + iε)^{−α}
    Plus,
}

/// Diagonal density of (P₀ − C ∓ iε)^{−α} for the flat scalar wave
/// operator P₀ with symbol |ξ|²_η shifted by a real constant C.
pub fn constant_shift_density(n: usize, alpha: C64, epsilon: f64, constant: f64) -> Result<C64> {
    check_dim(n)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("ε must be positive".into()));
    }
    let lambda = C64::new(constant, epsilon);
    if nonpositive_integer(alpha).is_some() {
        // 1/Γ(α) vanishes; only α = 0 survives as the identity kernel, whose
        // diagonal is not a function
        return Ok(C64::new(0.0, 0.0));
    }
    let g_arg = alpha - n as f64 / 2.0;
    let d = gamma_pole_distance(g_arg);
    if d < POLE_TOLERANCE && gamma_pole_distance(alpha) >= POLE_TOLERANCE {
        return Err(Error::PoleProximity { alpha, distance: d });
    }
    let pref = C64::new(0.0, 1.0) / (4.0 * PI).powf(n as f64 / 2.0);
    Ok(pref * gamma(g_arg) * rgamma(alpha) * (-lambda).powc(n as f64 / 2.0 - alpha))
}

/// Diagonal density of (P₀ ∓ iε)^{−α} per unit fibre rank.
pub fn continuum_zeta_density(n: usize, alpha: C64, epsilon: f64, shift: Shift) -> Result<C64> {
    match shift {
        Shift::Minus => constant_shift_density(n, alpha, epsilon, 0.0),
        Shift::Plus => Ok(constant_shift_density(n, alpha.conj(), epsilon, 0.0)?.conj()),
    }
}

/// Residue of α ↦ density at `pole`, by the limit (α − pole)·density(α)
/// along one approach direction with a Richardson step.
pub fn residue_limit<F: Fn(C64) -> Result<C64>>(density: F, pole: C64, direction: f64, delta: f64) -> Result<C64> {
    let step = C64::from_polar(delta, direction);
    let v1 = step * density(pole + step)?;
    let v2 = step * 0.5 * density(pole + step * 0.5)?;
    Ok(v2 * 2.0 - v1)
}

/// Residue estimates along three approach directions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidueEstimate {
    pub pole: C64,
    pub directions: Vec<f64>,
    pub values: Vec<C64>,
    /// Largest pairwise difference of the directional estimates.
    pub spread: f64,
}

impl ResidueEstimate {
    pub fn mean(&self) -> C64 {
        self.values.iter().sum::<C64>() / self.values.len() as f64
    }
}

pub fn residue_estimate<F: Fn(C64) -> Result<C64>>(density: F, pole: C64, delta: f64) -> Result<ResidueEstimate> {
    let directions = vec![0.3, 2.0, 4.4];
    let values: Vec<C64> = directions.iter().map(|&d| residue_limit(&density, pole, d, delta)).collect::<Result<_>>()?;
    let mut spread: f64 = 0.0;
    for a in &values {
        for b in &values {
            spread = spread.max((a - b).norm());
        }
    }
    Ok(ResidueEstimate { pole, directions, values, spread })
}

/// i·u_k / (2ⁿ π^{n/2} (n/2−k−1)!), the residue of the zeta density at
/// α = n/2 − k carried by the k-th transport coefficient.
pub fn residue_prediction(k: usize, n: usize, uk_diag: &CMat) -> Result<CMat> {
    if !n.is_multiple_of(2) || n < 2 || k + 1 > n / 2 {
        return Err(Error::InvalidInput(format!("residue order k = {k} needs even n and 0 <= k <= n/2 - 1 (n = {n})")));
    }
    let c = C64::new(0.0, 1.0) / (2f64.powi(n as i32) * PI.powf(n as f64 / 2.0) * factorial((n / 2 - k - 1) as u32));
    Ok(uk_diag * c)
}

/// The two normalizations of the residue carried by u₁ and which one the
/// constant-shift oracle confirms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidueNormalizations {
    pub n: usize,
    /// [`residue_prediction`] with k = 1.
    pub transport: CMat,
    /// 2u₁ / (i (4π)^{n/2} Γ(n/2−1)), which equals −2 times `transport`.
    pub alternative: CMat,
    /// Residue at α = n/2 − 1 of the constant-shift density, per unit shift.
    pub oracle_per_unit: C64,
    /// Relative mismatch of each normalization against the oracle, for u₁ = 𝟙.
    pub transport_mismatch: f64,
    pub alternative_mismatch: f64,
}

/// Compare both normalizations on u₁ against the residue of the flat
/// operator shifted by a constant C, for which u₁(x,x) = (C + iε)𝟙.
pub fn residue_normalizations(n: usize, u1: &CMat, epsilon: f64) -> Result<ResidueNormalizations> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("the u₁ residue needs even n >= 4 (n = {n})")));
    }
    let transport = residue_prediction(1, n, u1)?;
    let alt_c = C64::new(2.0, 0.0) / (C64::new(0.0, 1.0) * (4.0 * PI).powf(n as f64 / 2.0) * gamma(C64::new(n as f64 / 2.0 - 1.0, 0.0)));
    let alternative = u1 * alt_c;
    let pole = C64::new(n as f64 / 2.0 - 1.0, 0.0);
    let constant = 0.7;
    let res = residue_estimate(|a| constant_shift_density(n, a, epsilon, constant), pole, 1e-4)?.mean();
    let lambda = C64::new(constant, epsilon);
    let oracle_per_unit = res / lambda;
    let one = CMat::identity(1, 1);
    let t1 = residue_prediction(1, n, &one)?[(0, 0)];
    let a1 = alt_c;
    Ok(ResidueNormalizations {
        n,
        transport,
        alternative,
        oracle_per_unit,
        transport_mismatch: (t1 - oracle_per_unit).norm() / oracle_per_unit.norm(),
        alternative_mismatch: (a1 - oracle_per_unit).norm() / oracle_per_unit.norm(),
    })
}

/// (−1)^m Γ(1−α) / (Γ(1−α−m) Γ(α+m)), with the ratio Γ(1−α)/Γ(1−α−m)
/// replaced by its polynomial limit where Γ(1−α) has a pole.
pub fn mellin_gamma_factor(alpha: C64, m: u32) -> C64 {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let x = C64::new(1.0, 0.0) - alpha;
    if gamma_pole_distance(x) < 1e-12 {
        let mut prod = C64::new(1.0, 0.0);
        for j in 1..=m {
            prod *= x - j as f64;
        }
        return prod * rgamma(alpha + m as f64) * sign;
    }
    gamma(x) * rgamma(x - m as f64) * rgamma(alpha + m as f64) * sign
}

/// The same factor as the finite product α(α+1)⋯(α+m−1)/Γ(α+m).
pub fn mellin_gamma_factor_product(alpha: C64, m: u32) -> C64 {
    let mut prod = C64::new(1.0, 0.0);
    for j in 0..m {
        prod *= alpha + j as f64;
    }
    prod * rgamma(alpha + m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn closed_form_matches_rotated_quadrature() {
        for n in [2usize, 4] {
            let a = c(10.0, 0.0);
            let l = c(0.0, 1.0);
            let exact = flat_f_alpha_diag(n, a, l).unwrap();
            let quad = flat_f_alpha_quadrature(n, a, l, PI / 4.0, 48).unwrap();
            assert!((exact - quad).norm() <= 1e-8 * exact.norm(), "n={n}: {exact} vs {quad}");
        }
        let a = c(3.5, 0.7);
        let l = c(0.4, 0.8);
        let exact = flat_f_alpha_diag(2, a, l).unwrap();
        for th in [0.4, 1.1] {
            let quad = flat_f_alpha_quadrature(2, a, l, th, 48).unwrap();
            assert!((exact - quad).norm() <= 1e-8 * exact.norm(), "θ={th}: {exact} vs {quad}");
        }
    }

    #[test]
    fn closed_form_scales_homogeneously() {
        let a = c(1.3, 0.4);
        for l in [c(0.0, 1.0), c(-2.0, 0.5), c(3.0, 0.1)] {
            for s in [0.5, 3.0] {
                let lhs = flat_f_alpha_diag(4, a, l * s).unwrap();
                let rhs = flat_f_alpha_diag(4, a, l).unwrap() * C64::new(s, 0.0).powc(2.0 - a - 1.0);
                assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
            }
        }
    }

    #[test]
    fn pole_is_reported() {
        assert!(matches!(flat_f_alpha_diag(2, c(-1.0 + 1e-8, 0.0), c(0.0, 1.0)), Err(Error::PoleProximity { .. })));
        assert!(matches!(continuum_zeta_density(2, c(1.0, 0.0), 0.5, Shift::Minus), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn flat_residues() {
        let r2 = residue_estimate(|a| continuum_zeta_density(2, a, 0.3, Shift::Minus), c(1.0, 0.0), 1e-4).unwrap();
        let want2 = c(0.0, 1.0 / (4.0 * PI));
        assert!((r2.mean() - want2).norm() < 1e-6, "{:?}", r2);
        let r4 = residue_estimate(|a| continuum_zeta_density(4, a, 0.3, Shift::Minus), c(2.0, 0.0), 1e-4).unwrap();
        let want4 = c(0.0, 1.0 / (16.0 * PI * PI));
        assert!((r4.mean() - want4).norm() < 1e-6);
        let one = CMat::identity(2, 2);
        assert!((residue_prediction(0, 2, &one).unwrap()[(0, 0)] - want2).norm() < 1e-15);
        assert!((residue_prediction(0, 4, &one).unwrap()[(1, 1)] - want4).norm() < 1e-15);
        assert!(residue_prediction(2, 4, &one).is_err());
    }

    #[test]
    fn constant_shift_confirms_the_transport_normalization() {
        let rep = residue_normalizations(4, &CMat::identity(4, 4), 0.2).unwrap();
        assert!(rep.transport_mismatch < 1e-6, "{rep:?}");
        assert!((rep.alternative_mismatch - 3.0).abs() < 1e-6);
    }

    #[test]
    fn mellin_factor_agrees_with_product_and_reciprocal_gamma() {
        assert!((mellin_gamma_factor(c(1.0, 0.0), 0) - 1.0).norm() < 1e-14);
        assert!((mellin_gamma_factor(c(1.0, 0.0), 1) - 1.0).norm() < 1e-14);
        for m in 1..4 {
            assert_eq!(mellin_gamma_factor(c(0.0, 0.0), m), c(0.0, 0.0));
        }
        for a in [c(0.3, 0.2), c(2.0, 0.0), c(-1.5, 1.0), c(4.2, -3.0)] {
            for m in 0..5 {
                let d = mellin_gamma_factor(a, m);
                let p = mellin_gamma_factor_product(a, m);
                assert!((d - p).norm() < 1e-11 * (1.0 + p.norm()), "{a} {m}: {d} {p}");
                assert!((p - rgamma(a)).norm() < 1e-11 * (1.0 + p.norm()));
            }
        }
    }
}
