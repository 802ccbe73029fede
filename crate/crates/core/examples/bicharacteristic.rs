//! One null bicharacteristic through a conformal bump, integrated forward
//! on the compactified phase space and dumped as CSV.

use lorentz_zeta::dynamics::{flow_integrate, radial_label, trajectory_csv, FlowOptions, PhasePoint};
use lorentz_zeta::geometry::{BumpProfile, MetricFamily};

fn main() -> lorentz_zeta::Result<()> {
    let family = MetricFamily::conformal_bump(2, 0.05, 1.0, BumpProfile::Compact)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let start = PhasePoint::Interior { x: vec![-0.4, 0.2], xi: vec![s, s] };
    let traj = flow_integrate(&family, &start, 200.0, FlowOptions::default())?;
    println!(
        "terminal {:?} after {} steps, |p| drift {:.1e}, end label {:?}",
        traj.terminal,
        traj.rows.len() - 1,
        traj.p_drift,
        radial_label(&traj.end)
    );
    let csv = trajectory_csv(&traj);
    for line in csv.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
