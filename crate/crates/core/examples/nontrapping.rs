//! Radial-set certification and the non-trapping check for Minkowski space
//! and a small conformal bump.

use lorentz_zeta::dynamics::{nontrapping_check, radial_set_classify, FlowOptions, Terminal};
use lorentz_zeta::geometry::{BumpProfile, MetricFamily};

fn main() -> lorentz_zeta::error::Result<()> {
    let families = [
        ("minkowski 4D", MetricFamily::minkowski(4)?),
        ("bump 2D", MetricFamily::conformal_bump(2, 0.05, 1.0, BumpProfile::Compact)?),
        ("bump 4D", MetricFamily::conformal_bump(4, 0.05, 1.0, BumpProfile::Compact)?),
    ];
    for (name, family) in &families {
        let (sink, source) = radial_set_classify(family, 1e-6)?;
        println!(
            "{name}: L+ certified {} (beta {:.6}, beta_L {:.6}), L- certified {}",
            sink.certified, sink.beta[0], sink.beta_l[0], source.certified
        );
        let report = nontrapping_check(family, 200, 200.0, 11, FlowOptions::default())?;
        let steps: usize = report.seeds.iter().map(|s| s.forward_steps + s.backward_steps).sum();
        let sinks = report.seeds.iter().filter(|s| s.forward == Terminal::ConvergedToSink).count();
        println!("  verdict {:?}, {sinks}/200 forward ends in L+, {steps} steps in total", report.verdict);
    }
    Ok(())
}
