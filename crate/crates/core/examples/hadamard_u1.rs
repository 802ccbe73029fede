//! First Hadamard coefficient on the diagonal for three families, compared
//! with R/12 plus the Clifford-contracted twist curvature.

use lorentz_zeta::clifford::{build_gamma, Twist};
use lorentz_zeta::geometry::{BumpProfile, MetricFamily};
use lorentz_zeta::hadamard::{transport_u1_origin, transport_uk, TransportOptions};

fn main() -> lorentz_zeta::Result<()> {
    let cases = [
        ("minkowski", MetricFamily::minkowski(4)?, Twist::None, vec![0.0; 4]),
        ("conformal bump", MetricFamily::conformal_bump(4, 0.1, 1.0, BumpProfile::Gaussian)?, Twist::None, vec![0.0; 4]),
        ("flat, twisted", MetricFamily::minkowski(2)?, Twist::constant_field(2, 0.7), vec![0.0; 2]),
    ];
    for (name, family, twist, x0) in &cases {
        let rep = build_gamma(family.dim(), 1)?;
        let r = transport_u1_origin(family, &rep, twist, x0, 0.05)?;
        println!("{name:>15}: R_g = {:+.8}, u1[0,0] = {:.8}, relative error {:.1e}", r.scalar_curvature, r.u1_numeric[(0, 0)], r.rel_error);
    }
    // u1 at points away from x0, from u0 by one step of the recursion
    let family = MetricFamily::conformal_bump(2, 0.2, 1.0, BumpProfile::Gaussian)?;
    let rep = build_gamma(2, 1)?;
    let u0 = lorentz_zeta::hadamard::transport_u0(&family, rep.rank, &[0.0, 0.0], &[0.0, 1.0], 0.3, 4)?;
    let u1 = transport_uk(&family, &rep, &Twist::None, 1, &u0, TransportOptions::default())?;
    for (r, v) in u1.r.iter().zip(&u1.values) {
        println!("r = {r:.3}: u1[0,0] = {:.6}", v[(0, 0)]);
    }
    Ok(())
}
