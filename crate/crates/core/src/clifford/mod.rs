//! Clifford modules over the tangent bundle: gamma matrices, the
//! indefinite Hermitian form β, spin connections with an optional U(1)
//! twist, the Dirac operator on grids and a Bochner–Lichnerowicz verifier.
//!
//! Conventions: γ_aγ_b + γ_bγ_a = −2η_{ab}𝟙 with η = diag(1, −1, …, −1),
//! and β = iγ₀, so that iβγ₀ = 𝟙.

mod connection;
mod grid;

pub use connection::{spin_connection, twisting_curvature, ConnectionData, Twist, TwistCurvature};
pub use grid::{
    bochner_lichnerowicz_residual, dirac_apply, dirac_coefficients, order_estimate, BlReport, Boundary, DiracCoefficients, SectionGrid, TestSection,
};

use crate::error::{Error, Result};
use crate::geometry::eta;
use crate::special::C64;
use nalgebra::DMatrix;

pub type CMat = DMatrix<C64>;

/// Gamma matrices, β and the distinguished timelike frame index.
#[derive(Clone, Debug)]
pub struct CliffordRep {
    pub n: usize,
    pub twist_rank: usize,
    /// Fibre rank N = 2^{n/2}·twist_rank.
    pub rank: usize,
    /// γ_a with lower frame index.
    pub gammas: Vec<CMat>,
    pub beta: CMat,
    /// Frame index of the timelike unit field e.
    pub time_index: usize,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn mat2(e: [[C64; 2]; 2]) -> CMat {
    CMat::from_fn(2, 2, |i, j| e[i][j])
}

/// Build the representation for n ∈ {2, 4} tensored with 𝟙 of the twist rank.
pub fn build_gamma(n: usize, twist_rank: usize) -> Result<CliffordRep> {
    if twist_rank == 0 {
        return Err(Error::InvalidInput("twist rank must be at least 1".into()));
    }
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let eps = mat2([[z, one], [-one, z]]);
    let sx = mat2([[z, one], [one, z]]);
    let sy = mat2([[z, -i], [i, z]]);
    let sz = mat2([[one, z], [z, -one]]);
    let base = match n {
        2 => vec![eps, sx],
        4 => {
            let id = CMat::identity(2, 2);
            vec![kron(&eps, &id), kron(&sx, &sx), kron(&sx, &sy), kron(&sx, &sz)]
        }
        _ => return Err(Error::Unsupported(format!("Clifford representation in dimension {n}"))),
    };
    let tw = CMat::identity(twist_rank, twist_rank);
    let gammas: Vec<CMat> = base.iter().map(|g| kron(g, &tw)).collect();
    let beta = &gammas[0] * i;
    let rank = gammas[0].nrows();
    Ok(CliffordRep { n, twist_rank, rank, gammas, beta, time_index: 0 })
}

impl CliffordRep {
    pub fn identity(&self) -> CMat {
        CMat::identity(self.rank, self.rank)
    }

    /// γ^a = η^{ab}γ_b.
    pub fn gamma_upper(&self, a: usize) -> CMat {
        &self.gammas[a] * c(eta(a), 0.0)
    }

    /// γ(v) = v^a γ_a for frame components v.
    pub fn gamma_of(&self, v: &[f64]) -> CMat {
        let mut out = CMat::zeros(self.rank, self.rank);
        for (a, &va) in v.iter().enumerate() {
            out += &self.gammas[a] * c(va, 0.0);
        }
        out
    }

    /// Largest entry of γ_aγ_b + γ_bγ_a + 2η_{ab}𝟙 over all pairs.
    pub fn clifford_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let id = self.identity();
        for a in 0..self.n {
            for b in 0..self.n {
                let mut m = &self.gammas[a] * &self.gammas[b] + &self.gammas[b] * &self.gammas[a];
                if a == b {
                    m += &id * c(2.0 * eta(a), 0.0);
                }
                worst = worst.max(m.iter().map(|v| v.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// Largest entry of β* − β and of γ_a*β + βγ_a.
    pub fn beta_residual(&self) -> f64 {
        let mut worst = (self.beta.adjoint() - &self.beta).iter().map(|v| v.norm()).fold(0.0, f64::max);
        for g in &self.gammas {
            let m = g.adjoint() * &self.beta + &self.beta * g;
            worst = worst.max(m.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        worst
    }

    /// The Hermitian form iβγ(e) whose positivity defines the inner product.
    pub fn positive_form(&self, e: &[f64]) -> CMat {
        &self.beta * self.gamma_of(e) * c(0.0, 1.0)
    }
}

/// Outcome of [`check_positivity`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Positivity {
    pub positive: bool,
    pub min_eigenvalue: f64,
}

/// Whether iβγ(e) is positive definite for a timelike frame vector e.
pub fn check_positivity(rep: &CliffordRep, e: &[f64]) -> Result<Positivity> {
    if e.len() != rep.n {
        return Err(Error::InvalidInput(format!("vector of length {} for n = {}", e.len(), rep.n)));
    }
    let norm2: f64 = e.iter().enumerate().map(|(a, v)| eta(a) * v * v).sum();
    if !(norm2 > 0.0) {
        return Err(Error::InvalidInput(format!("{e:?} is not timelike")));
    }
    let h = rep.positive_form(e);
    let eig = nalgebra::SymmetricEigen::new(h);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Positivity { positive: min > 0.0, min_eigenvalue: min })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_pair_is_the_stated_one() {
        let r = build_gamma(2, 1).unwrap();
        assert_eq!(r.gammas[0], mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(-1.0, 0.0), c(0.0, 0.0)]]));
        assert_eq!(r.gammas[1], mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]));
    }

    #[test]
    fn relations_hold_exactly() {
        for n in [2, 4] {
            for tw in [1, 2] {
                let r = build_gamma(n, tw).unwrap();
                assert_eq!(r.clifford_residual(), 0.0);
                assert_eq!(r.beta_residual(), 0.0);
                assert_eq!(r.rank, (1 << (n / 2)) * tw);
            }
        }
    }

    #[test]
    fn positivity_in_the_future_cone() {
        let r = build_gamma(4, 1).unwrap();
        assert!(check_positivity(&r, &[1.0, 0.0, 0.0, 0.0]).unwrap().positive);
        assert!(!check_positivity(&r, &[-1.0, 0.0, 0.0, 0.0]).unwrap().positive);
        let p = check_positivity(&r, &[1.0, 0.3, -0.4, 0.5]).unwrap();
        assert!(p.positive && (p.min_eigenvalue - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!(matches!(check_positivity(&r, &[1.0, 1.0, 0.0, 0.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(matches!(build_gamma(3, 1), Err(Error::Unsupported(_))));
    }
}
