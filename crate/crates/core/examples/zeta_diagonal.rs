//! Lattice zeta density at two points against the Fourier sum of the flat
//! torus.

use lorentz_zeta::clifford::{build_gamma, Twist};
use lorentz_zeta::geometry::{BumpProfile, MetricFamily};
use lorentz_zeta::special::C64;
use lorentz_zeta::spectral::{assemble, flat_zeta_density, zeta_diagonal, Assembly, ContourSpec, GridSpec, SolverOptions};

fn main() -> lorentz_zeta::Result<()> {
    let rep = build_gamma(2, 1)?;
    let family = MetricFamily::conformal_bump(2, 0.05, 1.0, BumpProfile::Compact)?;
    let op = assemble(&family, &rep, &Twist::None, GridSpec { half_width: 4.0, m: 24 }, Assembly::DiracSquared)?;
    let spec = ContourSpec::default();
    let alphas = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(2.5, 0.5)];
    let points = vec![vec![0.0, 0.0], vec![3.0, -3.0]];
    let report = zeta_diagonal(&op, &spec, &alphas, &points, 0.45, SolverOptions::default())?;
    for s in &report.samples {
        let flat = flat_zeta_density(&op, spec.epsilon, s.alpha)?;
        println!("alpha = {:.2}, x = {:?}: {:.8}   flat torus {:.8}", s.alpha, s.x, s.value, flat);
    }
    Ok(())
}
