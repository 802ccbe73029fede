use super::flow::{flow_integrate, FlowOptions, Terminal};
use super::{check_flat_tail, dot, norm, rescaled_hamilton_field, symbol_jet, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{eta, MetricFamily};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialLabel {
    /// L₊, the sink.
    #[serde(rename = "L+")]
    Sink,
    /// L₋, the source.
    #[serde(rename = "L-")]
    Source,
}

impl RadialLabel {
    /// +1 for the sink, −1 for the source (the ∓ in the sign conditions
    /// is −sign).
    fn sign(self) -> f64 {
        match self {
            RadialLabel::Sink => 1.0,
            RadialLabel::Source => -1.0,
        }
    }
}

/// Which radial set a point at base infinity with ηξ ∥ y lies on.
pub fn radial_label(point: &PhasePoint) -> Option<RadialLabel> {
    let b = point.to_boundary().ok()?;
    let PhasePoint::Boundary { y, .. } = &b else { return None };
    let xi = b.covector();
    let c: f64 = (0..y.len()).map(|a| eta(a) * xi[a] * y[a]).sum();
    if c > 0.0 {
        Some(RadialLabel::Sink)
    } else if c < 0.0 {
        Some(RadialLabel::Source)
    } else {
        None
    }
}

/// The four sign conditions, each required at every sampled point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignConditions {
    /// dp ≠ 0 and H̄_p vanishes (is tangent) on the set.
    pub tangent: bool,
    /// β_L > 0.
    pub beta_l_positive: bool,
    /// β > 0.
    pub beta_positive: bool,
    /// β_∞ = 0 within tol_dyn.
    pub beta_inf_vanishes: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialSetReport {
    pub label: RadialLabel,
    pub points: Vec<PhasePoint>,
    /// ‖H̄_p‖ at each point.
    pub field_norm: Vec<f64>,
    pub beta_l: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_inf: Vec<f64>,
    pub conditions: SignConditions,
    pub certified: bool,
}

/// Unit null directions at infinity used to seed the root finder.
fn null_directions(n: usize) -> Vec<Vec<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut spatial: Vec<Vec<f64>> = Vec::new();
    for i in 0..n - 1 {
        for sg in [1.0, -1.0] {
            let mut v = vec![0.0; n - 1];
            v[i] = sg;
            spatial.push(v);
        }
    }
    if n > 2 {
        let k = 1.0 / ((n - 1) as f64).sqrt();
        spatial.push(vec![k; n - 1]);
        spatial.push(vec![-k; n - 1]);
    }
    let mut out = Vec::new();
    for t in [1.0, -1.0] {
        for w in &spatial {
            let mut y = vec![t * s];
            y.extend(w.iter().map(|v| v * s));
            out.push(y);
        }
    }
    out
}

/// Orthonormal basis of the tangent space of S^{n−1} at y.
fn tangent_basis(y: &[f64]) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        let proj = dot(&v, y);
        v.iter_mut().zip(y).for_each(|(a, b)| *a -= proj * b);
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|a| *a /= nv);
            basis.push(v);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

/// Point at base infinity with direction y and covector ξ.
fn boundary_point(y: &[f64], xi: &[f64]) -> PhasePoint {
    let q = dot(xi, y);
    let mu = xi.iter().zip(y).map(|(a, b)| a - q * b).collect();
    PhasePoint::Boundary { rho: 0.0, y: y.to_vec(), tau: -q, mu }
}

/// Local coordinates w = (w_y ∈ ℝ^{n−1}, w_ξ ∈ ℝⁿ) around (y₀, ξ₀) at ρ = 0.
struct LocalChart {
    y0: Vec<f64>,
    xi0: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl LocalChart {
    fn new(y0: &[f64], xi0: &[f64]) -> Self {
        LocalChart { y0: y0.to_vec(), xi0: xi0.to_vec(), basis: tangent_basis(y0) }
    }

    fn point(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.y0.len();
        let mut y = self.y0.clone();
        for (k, b) in self.basis.iter().enumerate() {
            y.iter_mut().zip(b).for_each(|(a, bb)| *a += w[k] * bb);
        }
        let ny = norm(&y);
        y.iter_mut().for_each(|a| *a /= ny);
        let xi = (0..n).map(|i| self.xi0[i] + w[n - 1 + i]).collect();
        (y, xi)
    }

    /// H̄_p at ρ = 0 expressed in the w coordinates: (E^T ẏ, ξ̇).
    fn field(&self, family: &MetricFamily, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.y0.len();
        let (y, xi) = self.point(w);
        let pt = boundary_point(&y, &xi);
        let PhasePoint::Boundary { tau, .. } = &pt else { unreachable!() };
        let h = rescaled_hamilton_field(family, &pt)?;
        let ydot = &h[1..1 + n];
        let tdot = h[1 + n];
        let mdot = &h[2 + n..];
        // ξ = μ − τy at ρ = 0
        let xidot: Vec<f64> = (0..n).map(|i| mdot[i] - tdot * y[i] - tau * ydot[i]).collect();
        let mut out: Vec<f64> = self.basis.iter().map(|b| dot(b, ydot)).collect();
        out.extend(xidot);
        Ok(out)
    }
}

fn jacobian<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: F, dim: usize, h: f64) -> Result<DMatrix<f64>> {
    let f0 = f(&vec![0.0; dim])?;
    let mut j = DMatrix::zeros(f0.len(), dim);
    for k in 0..dim {
        let mut wp = vec![0.0; dim];
        let mut wm = vec![0.0; dim];
        wp[k] = h;
        wm[k] = -h;
        let (a, b) = (f(&wp)?, f(&wm)?);
        for i in 0..f0.len() {
            j[(i, k)] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Damped Gauss–Newton for a radial point near (y₀, ξ₀) with p = 0 and |ξ| = 1.
fn locate(family: &MetricFamily, y0: &[f64], xi0: &[f64]) -> Result<PhasePoint> {
    let n = y0.len();
    let dim = 2 * n - 1;
    let mut chart = LocalChart::new(y0, xi0);
    let residual = |chart: &LocalChart, w: &[f64]| -> Result<Vec<f64>> {
        let mut r = chart.field(family, w)?;
        let (_, xi) = chart.point(w);
        r.push(symbol_jet(family, None, &xi)?.p);
        r.push(dot(&xi, &xi) - 1.0);
        Ok(r)
    };
    let mut res = residual(&chart, &vec![0.0; dim])?;
    let mut rn = norm(&res);
    for _ in 0..60 {
        if rn < 1e-13 {
            let (y, xi) = chart.point(&vec![0.0; dim]);
            return Ok(boundary_point(&y, &xi));
        }
        let j = jacobian(|w| residual(&chart, w), dim, 1e-7)?;
        let step = j
            .svd(true, true)
            .solve(&DVector::from_vec(res.clone()), 1e-12)
            .map_err(|e| Error::ClassificationFailure(format!("singular linearization: {e}")))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let w: Vec<f64> = step.iter().map(|s| -lambda * s).collect();
            let r = residual(&chart, &w)?;
            let nr = norm(&r);
            if nr < rn {
                let (y, xi) = chart.point(&w);
                chart = LocalChart::new(&y, &xi);
                res = residual(&chart, &vec![0.0; dim])?;
                rn = norm(&res);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn < 1e-10 {
        let (y, xi) = chart.point(&vec![0.0; dim]);
        return Ok(boundary_point(&y, &xi));
    }
    Err(Error::ClassificationFailure(format!("root finder stalled with residual {rn:.3e} near y = {y0:?}")))
}

struct PointData {
    field_norm: f64,
    dp_norm: f64,
    beta_l: f64,
    beta: f64,
    beta_inf: f64,
}

fn analyse(family: &MetricFamily, q: &PhasePoint, label: RadialLabel) -> Result<PointData> {
    let n = q.dim();
    let sg = label.sign();
    let PhasePoint::Boundary { y, tau, mu, .. } = q else { unreachable!() };
    let h = rescaled_hamilton_field(family, q)?;
    let field_norm = norm(&h);
    let xi = q.covector();
    let dp_norm = norm(&symbol_jet(family, None, &xi)?.dxi);
    // β from −sg·H̄ρ = β ρ, extrapolated to ρ → 0
    let beta_at = |d: f64| -> Result<f64> {
        let pt = PhasePoint::Boundary { rho: d, y: y.clone(), tau: *tau, mu: mu.clone() };
        Ok(-sg * rescaled_hamilton_field(family, &pt)?[0] / d)
    };
    let beta = 2.0 * beta_at(5e-5)? - beta_at(1e-4)?;
    // β_∞ from −sg·H̄ρ_∞ = β_∞ β ρ_∞, derivative along the flow
    let c0 = q.coords();
    let step = 1e-6;
    let shifted = |t: f64| {
        let c: Vec<f64> = c0.iter().zip(&h).map(|(a, v)| a + t * v).collect();
        let mut p = PhasePoint::from_coords(true, n, &c);
        p.normalize();
        p.rho_inf()
    };
    let d_rho_inf = (shifted(step) - shifted(-step)) / (2.0 * step);
    let beta_inf = -sg * d_rho_inf / (beta * q.rho_inf());
    // β_L from the linearization in the y directions; the ξ rows vanish at ρ = 0
    let chart = LocalChart::new(y, &xi);
    let j = jacobian(|w| chart.field(family, w), 2 * n - 1, 1e-6)?;
    let block = j.view((0, 0), (n - 1, n - 1)).into_owned();
    let eig: Vec<f64> = faer::Mat::<f64>::from_fn(n - 1, n - 1, |i, k| block[(i, k)])
        .eigenvalues()
        .map_err(|e| Error::ClassificationFailure(format!("eigenvalues of the linearized flow: {e:?}")))?
        .iter()
        .map(|l| l.re)
        .collect();
    if eig.iter().any(|l| !l.is_finite()) {
        return Err(Error::ClassificationFailure("non-finite eigenvalue of the linearized flow".into()));
    }
    let beta_l = 2.0 * eig.iter().map(|l| -sg * l).fold(f64::INFINITY, f64::min);
    Ok(PointData { field_norm, dp_norm, beta_l, beta, beta_inf })
}

/// Locate L₊ and L₋ at base infinity and evaluate the sign conditions.
pub fn radial_set_classify(family: &MetricFamily, tol_dyn: f64) -> Result<(RadialSetReport, RadialSetReport)> {
    check_flat_tail(family)?;
    let n = family.dim();
    let mut reports = Vec::new();
    for label in [RadialLabel::Sink, RadialLabel::Source] {
        let c = label.sign();
        let mut points = Vec::new();
        let mut data = Vec::new();
        for (k, y) in null_directions(n).iter().enumerate() {
            // ηξ = c·y, then perturb the seed slightly so the solver does real work
            let mut xi: Vec<f64> = y.iter().enumerate().map(|(a, v)| c * eta(a) * v).collect();
            let mut yp = y.clone();
            let jitter = 1e-3 * (1.0 + k as f64 % 3.0);
            yp[n - 1] += jitter;
            xi[0] += jitter;
            let q = locate(family, &yp, &xi)?;
            if radial_label(&q) != Some(label) {
                return Err(Error::ClassificationFailure(format!("root near {y:?} landed on the other radial set")));
            }
            data.push(analyse(family, &q, label)?);
            points.push(q);
        }
        let conditions = SignConditions {
            tangent: data.iter().all(|d| d.field_norm < tol_dyn && d.dp_norm > tol_dyn),
            beta_l_positive: data.iter().all(|d| d.beta_l > 0.0),
            beta_positive: data.iter().all(|d| d.beta > 0.0),
            beta_inf_vanishes: data.iter().all(|d| d.beta_inf.abs() < tol_dyn),
        };
        let certified = conditions.tangent && conditions.beta_l_positive && conditions.beta_positive && conditions.beta_inf_vanishes;
        reports.push(RadialSetReport {
            label,
            field_norm: data.iter().map(|d| d.field_norm).collect(),
            beta_l: data.iter().map(|d| d.beta_l).collect(),
            beta: data.iter().map(|d| d.beta).collect(),
            beta_inf: data.iter().map(|d| d.beta_inf).collect(),
            points,
            conditions,
            certified,
        });
    }
    let source = reports.pop().unwrap();
    let sink = reports.pop().unwrap();
    Ok((sink, source))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NonTrapping,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedLog {
    pub start: PhasePoint,
    pub forward: Terminal,
    pub backward: Terminal,
    pub forward_steps: usize,
    pub backward_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NontrappingReport {
    pub verdict: Verdict,
    pub seeds: Vec<SeedLog>,
    pub sink: RadialSetReport,
    pub source: RadialSetReport,
}

/// Null covector at x with spatial direction ω: solves g^{μν}ξ_μξ_ν = 0
/// for ξ₀ and normalizes |ξ| = 1.
fn null_covector(family: &MetricFamily, x: &[f64], omega: &[f64], future: bool) -> Result<Vec<f64>> {
    let n = x.len();
    let g = family.metric_at(x)?;
    let ginv = g.try_inverse().ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
    let a = ginv[(0, 0)];
    let b: f64 = 2.0 * (1..n).map(|i| ginv[(0, i)] * omega[i - 1]).sum::<f64>();
    let c: f64 = (1..n).flat_map(|i| (1..n).map(move |j| (i, j))).map(|(i, j)| ginv[(i, j)] * omega[i - 1] * omega[j - 1]).sum();
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return Err(Error::Precondition(format!("no null covector with spatial part {omega:?} at {x:?}")));
    }
    let r = if future { (-b + disc.sqrt()) / (2.0 * a) } else { (-b - disc.sqrt()) / (2.0 * a) };
    let mut xi = vec![r];
    xi.extend_from_slice(omega);
    let nx = norm(&xi);
    Ok(xi.iter().map(|v| v / nx).collect())
}

/// Sample `seeds` characteristic points over the ball containing the
/// perturbation, integrate both ways and require every end in L₊ ∪ L₋.
pub fn nontrapping_check(family: &MetricFamily, seeds: usize, t_max: f64, seed: u64, opts: FlowOptions) -> Result<NontrappingReport> {
    let (sink, source) = radial_set_classify(family, opts.tol_dyn)?;
    if !(sink.certified && source.certified) {
        return Err(Error::Precondition("radial sets are not certified sources/sinks".into()));
    }
    let n = family.dim();
    let radius = family.effective_radius(1e-12).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(seeds);
    while starts.len() < seeds {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
        if norm(&x) > radius {
            continue;
        }
        let mut omega: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let no = norm(&omega);
        if !(0.05..=1.0).contains(&no) {
            continue;
        }
        omega.iter_mut().for_each(|v| *v /= no);
        let future = rng.random_bool(0.5);
        let xi = null_covector(family, &x, &omega, future)?;
        starts.push(PhasePoint::Interior { x, xi });
    }
    let logs: Vec<SeedLog> = starts
        .par_iter()
        .map(|s| {
            let f = flow_integrate(family, s, t_max, opts)?;
            let b = flow_integrate(family, s, -t_max, opts)?;
            Ok(SeedLog {
                start: s.clone(),
                forward: f.terminal,
                backward: b.terminal,
                forward_steps: f.rows.len() - 1,
                backward_steps: b.rows.len() - 1,
            })
        })
        .collect::<Result<_>>()?;
    let done = |t: Terminal| matches!(t, Terminal::ConvergedToSink | Terminal::ConvergedToSource);
    let verdict = if logs.iter().all(|l| done(l.forward) && done(l.backward)) { Verdict::NonTrapping } else { Verdict::Inconclusive };
    Ok(NontrappingReport { verdict, seeds: logs, sink, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BumpProfile;

    #[test]
    fn minkowski_radial_sets_are_certified() {
        for n in [2, 4] {
            let m = MetricFamily::minkowski(n).unwrap();
            let (sink, source) = radial_set_classify(&m, 1e-6).unwrap();
            assert!(sink.certified && source.certified, "{sink:?}\n{source:?}");
            let r2 = 2f64.sqrt();
            assert!(sink.beta.iter().chain(&source.beta).all(|b| (b - r2).abs() < 1e-6), "{:?}", sink.beta);
            assert!(sink.beta_l.iter().all(|b| (b - 2.0 * r2).abs() < 1e-5), "{:?}", sink.beta_l);
        }
    }

    #[test]
    fn reversing_the_covector_swaps_labels() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = boundary_point(&[s, -s], &[s, s]);
        assert_eq!(radial_label(&p), Some(RadialLabel::Sink));
        let q = boundary_point(&[s, -s], &[-s, -s]);
        assert_eq!(radial_label(&q), Some(RadialLabel::Source));
    }

    #[test]
    fn small_bump_is_non_trapping() {
        let bump = MetricFamily::conformal_bump(2, 0.05, 1.0, BumpProfile::Compact).unwrap();
        let rep = nontrapping_check(&bump, 12, 200.0, 7, FlowOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NonTrapping, "{:?}", rep.seeds.iter().map(|s| (s.forward, s.backward)).collect::<Vec<_>>());
        let short = nontrapping_check(&bump, 3, 1e-3, 7, FlowOptions::default()).unwrap();
        assert_eq!(short.verdict, Verdict::Inconclusive);
    }
}
