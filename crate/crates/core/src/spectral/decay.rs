//! Large-|Im λ| resolvent bounds and off-diagonal decay of the resolvent.

use super::lattice::LatticeOperator;
use super::solver::{ShiftedSolver, SolverOptions};
use super::sparse::norm2;
use crate::error::Result;
use crate::special::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub lambda: C64,
    /// Power-iteration estimate of ‖(P − λ)⁻¹‖ in the weighted norm.
    pub resolvent_norm: f64,
    /// |Im λ|·‖(P − λ)⁻¹‖.
    pub product: f64,
    pub iterations: usize,
}

/// Estimate ‖(P − λ)⁻¹‖ for every λ = re + i·im by power iteration on
/// R*R with `samples` random starts, taking the largest estimate.
pub fn resolvent_decay_scan(
    op: &LatticeOperator,
    re_values: &[f64],
    im_values: &[f64],
    samples: usize,
    max_iter: usize,
    seed: u64,
    opts: SolverOptions,
) -> Result<Vec<DecayRow>> {
    let lambdas: Vec<C64> = im_values.iter().flat_map(|&im| re_values.iter().map(move |&re| C64::new(re, im))).collect();
    let pc = op.preconditioner();
    let sqrt_w: Vec<f64> = (0..op.dim()).map(|i| op.weights[i / op.fiber].sqrt()).collect();
    lambdas
        .par_iter()
        .enumerate()
        .map(|(li, &lambda)| {
            let solver = ShiftedSolver::new(&op.matrix, lambda, Some(&pc), opts)?;
            let mut best = 0.0f64;
            let mut iters = 0;
            for s in 0..samples.max(1) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((li as u64) << 32) ^ s as u64);
                let mut y: Vec<C64> = (0..op.dim()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
                let ny = norm2(&y);
                y.iter_mut().for_each(|v| *v /= ny);
                let mut est = 0.0;
                for it in 0..max_iter.max(1) {
                    iters += 1;
                    // M = W^{1/2} R W^{-1/2}; M*M applied to y
                    let x: Vec<C64> = y.iter().zip(&sqrt_w).map(|(v, w)| v / w).collect();
                    let u = solver.solve(&x)?.x;
                    let v: Vec<C64> = u.iter().zip(&sqrt_w).map(|(a, w)| a * w).collect();
                    let sigma = norm2(&v);
                    let b: Vec<C64> = v.iter().zip(&sqrt_w).map(|(a, w)| a * w).collect();
                    let t = solver.solve_adjoint(&b)?.x;
                    let mut next: Vec<C64> = t.iter().zip(&sqrt_w).map(|(a, w)| a / w).collect();
                    let nn = norm2(&next);
                    next.iter_mut().for_each(|a| *a /= nn);
                    y = next;
                    let converged = it > 0 && (sigma - est).abs() <= 1e-9 * sigma;
                    est = sigma;
                    if converged {
                        break;
                    }
                }
                best = best.max(est);
            }
            Ok(DecayRow { lambda, resolvent_norm: best, product: lambda.im.abs() * best, iterations: iters })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalityProfile {
    pub z: C64,
    /// (distance from the source, largest |u| over nodes at that distance bin).
    pub profile: Vec<(f64, f64)>,
    /// Least-squares slope of −log|u| against distance.
    pub decay_rate: f64,
}

/// |(P − z)⁻¹δ_source| binned by distance on the torus.
pub fn locality_profile(op: &LatticeOperator, z: C64, source: usize, opts: SolverOptions) -> Result<LocalityProfile> {
    let pc = op.preconditioner();
    let solver = ShiftedSolver::new(&op.matrix, z, Some(&pc), opts)?;
    let mut b = vec![C64::new(0.0, 0.0); op.dim()];
    b[source * op.fiber] = C64::new(1.0, 0.0);
    let u = solver.solve(&b)?.x;
    let xs = op.coords(source);
    let period = 2.0 * op.half_width;
    let nbins = op.m / 2;
    let mut bins = vec![0.0f64; nbins + 1];
    for node in 0..op.nodes() {
        let x = op.coords(node);
        let d = x
            .iter()
            .zip(&xs)
            .map(|(a, b)| {
                let t = (a - b).rem_euclid(period);
                t.min(period - t).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let k = ((d / op.hx).round() as usize).min(nbins);
        let mag = (0..op.fiber).map(|c| u[node * op.fiber + c].norm()).fold(0.0, f64::max);
        bins[k] = bins[k].max(mag);
    }
    let profile: Vec<(f64, f64)> = bins.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(k, &v)| (k as f64 * op.hx, v)).collect();
    let usable: Vec<&(f64, f64)> = profile.iter().filter(|(d, v)| *d > 0.0 && *v > 1e-280).collect();
    let nf = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = usable.iter().map(|p| -p.1.ln()).sum::<f64>() / nf;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (-p.1.ln() - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(LocalityProfile { z, profile, decay_rate: sxy / sxx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{build_gamma, Twist};
    use crate::geometry::MetricFamily;
    use crate::spectral::lattice::{assemble, Assembly, GridSpec};

    #[test]
    fn flat_resolvent_obeys_the_normal_bound() {
        let fam = MetricFamily::minkowski(2).unwrap();
        let rep = build_gamma(2, 1).unwrap();
        let op = assemble(&fam, &rep, &Twist::None, GridSpec { half_width: 4.0, m: 16 }, Assembly::DiracSquared).unwrap();
        let rows = resolvent_decay_scan(&op, &[0.0, 3.0], &[4.0, 16.0], 2, 200, 1, SolverOptions::default()).unwrap();
        for r in rows {
            assert!(r.product <= 1.0 + 1e-6, "{r:?}");
            assert!(r.product > 0.5);
        }
    }

    #[test]
    fn decay_rate_grows_with_imaginary_part() {
        let fam = MetricFamily::minkowski(2).unwrap();
        let rep = build_gamma(2, 1).unwrap();
        let op = assemble(&fam, &rep, &Twist::None, GridSpec { half_width: 4.0, m: 32 }, Assembly::WaveScalar).unwrap();
        let src = op.nearest_node(&[0.0, 0.0]).unwrap();
        let rates: Vec<f64> =
            [1.0, 4.0, 16.0].iter().map(|&im| locality_profile(&op, C64::new(0.0, im), src, SolverOptions::default()).unwrap().decay_rate).collect();
        assert!(rates[0] > 0.0 && rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
    }
}
