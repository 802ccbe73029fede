//! Matrices with planted spectra and their exact functional calculus.
//!
//! A planted matrix is A = S J S⁻¹ with J block diagonal in Jordan form, so
//! any holomorphic function of A is S f(J) S⁻¹ with the familiar Taylor
//! coefficients on each block.

use crate::error::{Error, Result};
use crate::special::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct PlantedMatrix {
    pub matrix: DMatrix<C64>,
    pub basis: DMatrix<C64>,
    pub basis_inv: DMatrix<C64>,
    /// (eigenvalue, block size) in the order they appear on the diagonal of J.
    pub blocks: Vec<(C64, usize)>,
}

fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    random_complex(n, rng).qr().q()
}

impl PlantedMatrix {
    /// Normal matrix U diag(λ) Uᴴ with a random unitary U.
    pub fn normal(eigenvalues: &[C64], seed: u64) -> PlantedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(eigenvalues.len(), &mut rng);
        let uh = u.adjoint();
        Self::from_parts(u, uh, eigenvalues.iter().map(|&l| (l, 1)).collect())
    }

    /// S diag(λ) S⁻¹ with S = U(I + c·G)V for random unitaries U, V and a
    /// random matrix G of unit-scale entries.
    pub fn non_normal(eigenvalues: &[C64], coupling: f64, seed: u64) -> Result<PlantedMatrix> {
        Self::with_blocks(eigenvalues.iter().map(|&l| (l, 1)).collect(), coupling, seed)
    }

    /// General Jordan structure, e.g. `vec![(λ, 2), (μ, 1), …]`.
    pub fn with_blocks(blocks: Vec<(C64, usize)>, coupling: f64, seed: u64) -> Result<PlantedMatrix> {
        let n: usize = blocks.iter().map(|b| b.1).sum();
        if n == 0 || blocks.iter().any(|b| b.1 == 0) {
            return Err(Error::InvalidInput("planted matrix needs non-empty blocks".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(n, &mut rng);
        let v = random_unitary(n, &mut rng);
        let g = random_complex(n, &mut rng) * C64::new(coupling / (n as f64).sqrt(), 0.0);
        let s = &u * (DMatrix::identity(n, n) + g) * &v;
        let s_inv = s.clone().try_inverse().ok_or_else(|| Error::InvalidInput("singular planted basis".into()))?;
        Ok(Self::from_parts(s, s_inv, blocks))
    }

    fn from_parts(basis: DMatrix<C64>, basis_inv: DMatrix<C64>, blocks: Vec<(C64, usize)>) -> PlantedMatrix {
        let j = Self::jordan_with(&blocks, |l, k| match k {
            0 => l,
            1 => C64::new(1.0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let matrix = &basis * j * &basis_inv;
        PlantedMatrix { matrix, basis, basis_inv, blocks }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|&(l, k)| std::iter::repeat_n(l, k)).collect()
    }

    /// f(J) given the Taylor coefficients f^{(k)}(λ)/k!.
    fn jordan_with<F: Fn(C64, usize) -> C64>(blocks: &[(C64, usize)], taylor: F) -> DMatrix<C64> {
        let n: usize = blocks.iter().map(|b| b.1).sum();
        let mut j = DMatrix::zeros(n, n);
        let mut off = 0;
        for &(l, size) in blocks {
            for k in 0..size {
                let c = taylor(l, k);
                for i in 0..size - k {
                    j[(off + i, off + i + k)] = c;
                }
            }
            off += size;
        }
        j
    }

    /// S f(J) S⁻¹ for a holomorphic f given through `taylor(λ, k) = f^{(k)}(λ)/k!`.
    pub fn function<F: Fn(C64, usize) -> C64>(&self, taylor: F) -> DMatrix<C64> {
        &self.basis * Self::jordan_with(&self.blocks, taylor) * &self.basis_inv
    }

    /// (A − iε)^{−α} with the same branch as the contour integral.
    pub fn power(&self, epsilon: f64, alpha: C64) -> Result<DMatrix<C64>> {
        for &(l, _) in &self.blocks {
            super::branch_power(l, epsilon, alpha)?;
        }
        Ok(self.function(|l, k| power_taylor(l, epsilon, alpha, k)))
    }

    /// Riesz projector onto the generalized eigenspace of the eigenvalue λ.
    pub fn projector(&self, lambda: C64) -> DMatrix<C64> {
        let n = self.dim();
        let mut e = DMatrix::zeros(n, n);
        let mut off = 0;
        for &(l, size) in &self.blocks {
            if (l - lambda).norm() <= 1e-12 * (1.0 + l.norm()) {
                for i in 0..size {
                    e[(off + i, off + i)] = C64::new(1.0, 0.0);
                }
            }
            off += size;
        }
        &self.basis * e * &self.basis_inv
    }

    /// (λ − iε)^{−α}·Π_λ plus the nilpotent terms, i.e. the contribution of
    /// one eigenvalue to (A − iε)^{−α}.
    pub fn power_component(&self, lambda: C64, epsilon: f64, alpha: C64) -> DMatrix<C64> {
        let near = |l: C64| (l - lambda).norm() <= 1e-12 * (1.0 + l.norm());
        self.function(|l, k| if near(l) { power_taylor(l, epsilon, alpha, k) } else { C64::new(0.0, 0.0) })
    }

    /// ‖S‖·‖S⁻¹‖ in the Frobenius norm.
    pub fn condition(&self) -> f64 {
        self.basis.norm() * self.basis_inv.norm()
    }
}

/// k-th Taylor coefficient of z ↦ (z − iε)^{−α} at λ.
fn power_taylor(lambda: C64, epsilon: f64, alpha: C64, k: usize) -> C64 {
    let mut c = C64::new(1.0, 0.0);
    for j in 0..k {
        c *= (-alpha - j as f64) / (j + 1) as f64;
    }
    c * super::branch_power(lambda, epsilon, alpha + k as f64).unwrap_or_default()
}

/// Eigenvalues uniformly spread over [−re, re] × [−im, im].
pub fn strip_spectrum(n: usize, re: f64, im: f64, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(re * (2.0 * rng.random::<f64>() - 1.0), im * (2.0 * rng.random::<f64>() - 1.0))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jordan_power_matches_matrix_product() {
        let p = PlantedMatrix::with_blocks(vec![(C64::new(2.0, 0.3), 2), (C64::new(-1.0, 0.0), 1)], 0.3, 3).unwrap();
        let sq = p.function(|l, k| match k {
            0 => l * l,
            1 => 2.0 * l,
            2 => C64::new(1.0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        assert!((sq - &p.matrix * &p.matrix).norm() < 1e-12);
        let inv = p.power(1.0, C64::new(1.0, 0.0)).unwrap();
        let shifted = &p.matrix - DMatrix::identity(3, 3) * C64::new(0.0, 1.0);
        assert!((inv * shifted - DMatrix::<C64>::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn projectors_sum_to_identity() {
        let ev = strip_spectrum(6, 3.0, 0.5, 1);
        let p = PlantedMatrix::non_normal(&ev, 0.5, 2).unwrap();
        let total = ev.iter().fold(DMatrix::zeros(6, 6), |acc, &l| acc + p.projector(l));
        assert!((total - DMatrix::<C64>::identity(6, 6)).norm() < 1e-12);
    }
}
