//! Scalar curvature of a Gaussian conformal bump along a spatial line,
//! next to the identity residuals of the curvature tensor.

use lorentz_zeta::geometry::{curvature_at, exponential_map, BumpProfile, MetricFamily};

fn main() -> lorentz_zeta::Result<()> {
    let family = MetricFamily::conformal_bump(4, 0.1, 1.0, BumpProfile::Gaussian)?;
    println!("{:>6} {:>14} {:>14} {:>10}", "x1", "R_g", "sqrt|g|", "bianchi");
    for k in 0..9 {
        let x = [0.0, -2.0 + 0.5 * k as f64, 0.0, 0.0];
        let c = curvature_at(&family, &x, 1e-3)?;
        println!("{:>6.2} {:>14.8} {:>14.8} {:>10.1e}", x[1], c.scalar, c.sqrt_det, c.bianchi_residual());
    }
    let geo = exponential_map(&family, &[0.0; 4], &[0.3, 1.0, 0.2, 0.0], 1e-10)?;
    println!("exp_0(0.3, 1, 0.2, 0) = {:.6?} (energy drift {:.1e})", geo.x, geo.energy_drift);
    Ok(())
}
