use lorentz_zeta::cli::ExperimentConfig;
use lorentz_zeta::clifford::build_gamma;
use lorentz_zeta::dynamics::PhasePoint;
use lorentz_zeta::special::C64;
use lorentz_zeta::spectral::branch_power;
use proptest::prelude::*;

fn eta(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_of_a_vector_squares_to_minus_its_norm(n in prop::sample::select(vec![2usize, 4]), v in prop::collection::vec(-3.0f64..3.0, 4)) {
        let rep = build_gamma(n, 1).unwrap();
        let v = &v[..n];
        let g = rep.gamma_of(v);
        let q: f64 = v.iter().enumerate().map(|(a, x)| eta(a) * x * x).sum();
        let residual = (&g * &g + rep.identity() * C64::new(q, 0.0)).norm();
        prop_assert!(residual <= 1e-12 * (1.0 + q.abs()), "residual {}", residual);
    }

    #[test]
    fn chart_round_trip(x in prop::collection::vec(-50.0f64..50.0, 3), xi in prop::collection::vec(-5.0f64..5.0, 3)) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let p = PhasePoint::Interior { x: x.clone(), xi: xi.clone() };
        let back = p.to_boundary().unwrap().to_interior().unwrap();
        let scale = 1.0 + x.iter().chain(&xi).map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in p.coords().iter().zip(back.coords()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale, "{:?} -> {:?}", p, back);
        }
        prop_assert!((p.rho_inf() - back.rho_inf()).abs() <= 1e-13);
    }

    #[test]
    fn branch_power_is_a_semigroup_with_the_right_cut(re in -5.0f64..5.0, im in -5.0f64..5.0, a in 0.1f64..3.0, b in 0.1f64..3.0) {
        let z = C64::new(re, im);
        prop_assume!((z - C64::new(0.0, 1.0)).norm() > 1e-3);
        let pa = branch_power(z, 1.0, C64::new(a, 0.0)).unwrap();
        let pb = branch_power(z, 1.0, C64::new(b, 0.0)).unwrap();
        let pab = branch_power(z, 1.0, C64::new(a + b, 0.0)).unwrap();
        prop_assert!((pa * pb - pab).norm() <= 1e-12 * (1.0 + pab.norm()));
        let one = branch_power(z, 1.0, C64::new(1.0, 0.0)).unwrap();
        let exact = 1.0 / (z - C64::new(0.0, 1.0));
        prop_assert!((one - exact).norm() <= 1e-12 * exact.norm());
        if im < 1.0 || re.abs() > 1e-9 {
            let eps = 1e-7;
            let nearby = branch_power(z + C64::new(0.0, eps), 1.0, C64::new(a, 0.0)).unwrap();
            let d = (z - C64::new(0.0, 1.0)).norm();
            prop_assert!((nearby - pa).norm() <= 1e-4 * pa.norm().max(1.0) * (1.0 + 1.0 / d), "discontinuity away from the cut at {}", z);
        }
    }

    #[test]
    fn config_round_trip(seed in any::<u32>(), n in prop::sample::select(vec![2usize, 4]), amp in 0.0f64..0.3, m in 8usize..64) {
        let text = format!(
            r#"{{"metric": {{"family": "conformal_bump", "dimension": {n}, "params": {{"amplitude": {amp}}}}}, "grid": {{"L": 4.0, "m": {m}}}, "seed": {seed}}}"#
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let again = ExperimentConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(serde_json::to_value(&cfg).unwrap(), serde_json::to_value(&again).unwrap());
        prop_assert_eq!(again.seed, seed as u64);
    }
}
