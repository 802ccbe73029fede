use lorentz_zeta::dynamics::{flow_integrate, nontrapping_check, principal_symbol, FlowOptions, PhasePoint, Terminal, Verdict};
use lorentz_zeta::geometry::{BumpProfile, MetricFamily};

fn bump() -> MetricFamily {
    MetricFamily::conformal_bump(2, 0.05, 1.0, BumpProfile::Compact).unwrap()
}

fn start(x: [f64; 2], xi: [f64; 2]) -> PhasePoint {
    PhasePoint::Interior { x: x.to_vec(), xi: xi.to_vec() }
}

fn distance(a: &PhasePoint, b: &PhasePoint) -> f64 {
    let (a, b) = (a.to_interior().unwrap(), b.to_interior().unwrap());
    a.coords().iter().zip(b.coords()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn symbol_is_conserved_along_the_flow() {
    let opts = FlowOptions::default();
    let p0 = start([0.3, -0.2], [1.0, 1.0]);
    assert!(principal_symbol(&bump(), &p0).unwrap().abs() < 1e-12);
    let traj = flow_integrate(&bump(), &p0, 200.0, opts).unwrap();
    assert!(traj.p_drift <= opts.tol_dyn, "drift {}", traj.p_drift);
    assert!(traj.rows.iter().all(|r| r.p.abs() <= 2.0 * opts.tol_dyn));
}

#[test]
fn flow_is_reversible() {
    let opts = FlowOptions::default();
    let p0 = start([0.4, 0.1], [1.0, -1.0]);
    let there = flow_integrate(&bump(), &p0, 3.0, opts).unwrap();
    let back = flow_integrate(&bump(), &there.end, -3.0, opts).unwrap();
    let d = distance(&back.end, &p0);
    assert!(d <= 10.0 * opts.tol_dyn, "round trip misses by {d:e}");
}

#[test]
fn reversing_the_covector_swaps_the_ends() {
    let opts = FlowOptions::default();
    for (x, xi) in [([0.2, 0.5], [1.0, 1.0]), ([-0.7, 0.0], [1.0, -1.0]), ([0.0, 0.0], [-1.0, 1.0])] {
        let plus = flow_integrate(&bump(), &start(x, xi), 200.0, opts).unwrap();
        let minus = flow_integrate(&bump(), &start(x, [-xi[0], -xi[1]]), -200.0, opts).unwrap();
        assert_eq!(plus.terminal, Terminal::ConvergedToSink);
        assert_eq!(minus.terminal, Terminal::ConvergedToSource, "{x:?} {xi:?}");
    }
}

#[test]
fn minkowski_seeds_are_non_trapping() {
    let flat = MetricFamily::minkowski(4).unwrap();
    let report = nontrapping_check(&flat, 200, 200.0, 11, FlowOptions::default()).unwrap();
    assert_eq!(report.verdict, Verdict::NonTrapping);
    assert_eq!(report.seeds.len(), 200);
    assert!(report.seeds.iter().all(|s| s.forward == Terminal::ConvergedToSink && s.backward == Terminal::ConvergedToSource));
}

#[test]
fn short_budget_is_inconclusive() {
    let report = nontrapping_check(&bump(), 4, 1e-4, 3, FlowOptions::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Inconclusive);
}
