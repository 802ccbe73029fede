//! Contour-integral complex powers of a non-normal test matrix against the
//! eigendecomposition, and the semigroup property.

use lorentz_zeta::special::C64;
use lorentz_zeta::spectral::{complex_power_dense, strip_spectrum, Contour, ContourSpec, PlantedMatrix};

fn main() -> lorentz_zeta::Result<()> {
    let eigenvalues = strip_spectrum(100, 5.0, 0.5, 3);
    let planted = PlantedMatrix::non_normal(&eigenvalues, 0.5, 4)?;
    let spec = ContourSpec::default();
    let mut contour = Contour::build(&spec, 6.0, (0.5, 2.5))?;
    contour.avoid(&eigenvalues, 1e-2)?;
    println!("{} nodes, {} bumps", contour.len(), contour.bumps);
    let alphas = [C64::new(0.5, 0.0), C64::new(1.0, 0.0), C64::new(2.5, 0.0), C64::new(1.5, 0.0)];
    let powers = complex_power_dense(&planted.matrix, &contour, &alphas)?;
    for (a, p) in alphas.iter().zip(&powers).take(3) {
        let oracle = planted.power(spec.epsilon, *a)?;
        println!("alpha = {}: relative difference {:.2e}", a.re, (p - &oracle).norm() / oracle.norm());
    }
    let product = &powers[0] * &powers[1];
    println!("semigroup: |P^-0.5 P^-1 - P^-1.5| / |P^-1.5| = {:.2e}", (&product - &powers[3]).norm() / powers[3].norm());
    Ok(())
}
