//! Flat zeta densities near their poles: residues at α = n/2 and the two
//! candidate normalizations of the u₁ residue.

use lorentz_zeta::hadamard::{continuum_zeta_density, flat_f_alpha_diag, flat_f_alpha_quadrature, residue_estimate, residue_normalizations, Shift};
use lorentz_zeta::special::C64;
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn main() -> lorentz_zeta::Result<()> {
    let lambda = C64::new(0.0, 1.0);
    let alpha = C64::new(2.5, 0.4);
    let closed = flat_f_alpha_diag(2, alpha, lambda)?;
    let quad = flat_f_alpha_quadrature(2, alpha, lambda, 1.0, 64)?;
    println!("F_alpha(i), n = 2: closed form {closed:.10}, rotated quadrature {quad:.10}");

    for (n, want) in [(2, C64::new(0.0, 1.0 / (4.0 * PI))), (4, C64::new(0.0, 1.0 / (16.0 * PI * PI)))] {
        let pole = C64::new(n as f64 / 2.0, 0.0);
        let r = residue_estimate(|a| continuum_zeta_density(n, a, 0.5, Shift::Minus), pole, 1e-4)?;
        println!("n = {n}: residue at alpha = {}: {:.10} (expected {want:.10}, spread {:.1e})", pole.re, r.mean(), r.spread);
    }

    let norms = residue_normalizations(4, &DMatrix::identity(4, 4), 0.5)?;
    println!(
        "u1 residue, n = 4: transport normalization mismatch {:.1e}, alternative mismatch {:.3}",
        norms.transport_mismatch, norms.alternative_mismatch
    );
    Ok(())
}
