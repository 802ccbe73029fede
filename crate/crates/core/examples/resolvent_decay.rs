//! |Im λ|·‖(P − λ)⁻¹‖ on the lattice operator of a small bump, next to
//! the flat value.

use lorentz_zeta::clifford::{build_gamma, Twist};
use lorentz_zeta::geometry::{BumpProfile, MetricFamily};
use lorentz_zeta::spectral::{assemble, resolvent_decay_scan, Assembly, GridSpec, SolverOptions};

fn main() -> lorentz_zeta::Result<()> {
    let rep = build_gamma(2, 1)?;
    let grid = GridSpec { half_width: 4.0, m: 32 };
    for (name, family) in [("flat", MetricFamily::minkowski(2)?), ("bump 0.05", MetricFamily::conformal_bump(2, 0.05, 1.0, BumpProfile::Compact)?)] {
        let op = assemble(&family, &rep, &Twist::None, grid, Assembly::DiracSquared)?;
        let rows = resolvent_decay_scan(&op, &[0.0, 3.0], &[4.0, 16.0, 64.0], 2, 40, 1, SolverOptions::default())?;
        for r in rows {
            println!("{name:>9}: lambda = {:>5.1}{:+6.1}i  |Im|·|R| = {:.6}", r.lambda.re, r.lambda.im, r.product);
        }
    }
    Ok(())
}
