use super::{check_flat_tail, dot, norm, rescaled_hamilton_field, symbol_jet, PhasePoint, TOL_DYN};
use crate::error::{Error, Result};
use crate::geometry::{eta, MetricFamily};
use crate::ode::{Dopri5, OdeOptions};
use serde::{Deserialize, Serialize};

/// How a trajectory ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    ConvergedToSink,
    ConvergedToSource,
    LeftDomain,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub tol_dyn: f64,
    /// Radius ⟨x⟩ beyond which the boundary chart is used.
    pub switch_radius: f64,
    /// Base-infinity barrier on ρ.
    pub rho_barrier: f64,
    /// Require |p| ≤ tol_dyn·|ξ|² at the start.
    pub bicharacteristic: bool,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol_dyn: TOL_DYN, switch_radius: 4.0, rho_barrier: 1e-8, bicharacteristic: true, max_steps: 200_000 }
    }
}

/// One accepted step, in boundary-chart quantities where they exist.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub rho: f64,
    pub rho_inf: f64,
    pub tau: f64,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
    pub p: f64,
    /// Distance to the flat radial-set candidate over the current y.
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub terminal: Terminal,
    pub end: PhasePoint,
    /// max |p(t) − p(0)|.
    pub p_drift: f64,
}

/// Distance of a boundary-chart point from {ρ = 0, ηξ ∥ y}: ρ plus the
/// sine of the angle between y and ηξ.
pub(crate) fn radial_distance(point: &PhasePoint) -> f64 {
    let xi = point.covector();
    let bp = match point.to_boundary() {
        Ok(b) => b,
        Err(_) => return f64::INFINITY,
    };
    let PhasePoint::Boundary { rho, y, .. } = &bp else { unreachable!() };
    let e: Vec<f64> = xi.iter().enumerate().map(|(a, v)| eta(a) * v).collect();
    let ne = norm(&e);
    if ne == 0.0 {
        return f64::INFINITY;
    }
    let c = dot(y, &e);
    let perp: f64 = e.iter().zip(y).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>().sqrt();
    rho + perp / ne
}

fn row(family: &MetricFamily, t: f64, point: &PhasePoint) -> Result<TrajectoryRow> {
    let xi = point.covector();
    let p = symbol_jet(family, point.base_point().as_deref(), &xi)?.p;
    let distance = radial_distance(point);
    let n = point.dim();
    Ok(match point.to_boundary() {
        Ok(PhasePoint::Boundary { rho, y, tau, mu }) => TrajectoryRow { t, rho, rho_inf: point.rho_inf(), tau, mu, y, p, distance },
        _ => TrajectoryRow { t, rho: 1.0, rho_inf: point.rho_inf(), tau: 0.0, mu: vec![0.0; n], y: vec![0.0; n], p, distance },
    })
}

fn sign_label(point: &PhasePoint) -> Terminal {
    let xi = point.covector();
    let PhasePoint::Boundary { y, .. } = point.to_boundary().unwrap_or_else(|_| point.clone()) else {
        return Terminal::LeftDomain;
    };
    let c: f64 = xi.iter().zip(&y).enumerate().map(|(a, (v, w))| eta(a) * v * w).sum();
    if c > 0.0 {
        Terminal::ConvergedToSink
    } else {
        Terminal::ConvergedToSource
    }
}

/// Integrate H̄_p from `start` for rescaled time `t_max` (negative for the
/// backward flow) and classify the end.
pub fn flow_integrate(family: &MetricFamily, start: &PhasePoint, t_max: f64, opts: FlowOptions) -> Result<Trajectory> {
    check_flat_tail(family)?;
    let n = start.dim();
    if n != family.dim() {
        return Err(Error::InvalidInput(format!("phase point of dimension {n} for an n = {} metric", family.dim())));
    }
    if start.coords().iter().any(|v| !v.is_finite()) || start.rho() < 0.0 {
        return Err(Error::InvalidInput("phase point must be finite with ρ >= 0".into()));
    }
    let xi0 = start.covector();
    let scale = dot(&xi0, &xi0);
    let p0 = symbol_jet(family, start.base_point().as_deref(), &xi0)?.p;
    if opts.bicharacteristic && p0.abs() > opts.tol_dyn * scale.max(1e-300) {
        return Err(Error::Precondition(format!("start is not characteristic: p = {p0:.3e}")));
    }
    let switch_rho = 1.0 / opts.switch_radius;
    let mut point = start.clone();
    if point.is_boundary_chart() && point.rho() > 1.5 * switch_rho {
        point = point.to_interior()?;
    }
    let ode_opts = OdeOptions { h_init: 1e-2, h_max: 0.5, ..OdeOptions::with_tol(0.01 * opts.tol_dyn) };
    let mut rows = vec![row(family, 0.0, &point)?];
    let mut p_drift: f64 = 0.0;
    let mut t = 0.0;
    let mut steps = 0usize;
    let fail: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let start_on_boundary = start.rho() <= opts.rho_barrier;
    let dir = t_max.signum();
    let terminal = 'outer: loop {
        let boundary = point.is_boundary_chart();
        let mut rhs = |_t: f64, c: &[f64], d: &mut [f64]| {
            let mut pt = PhasePoint::from_coords(boundary, n, c);
            pt.normalize();
            match rescaled_hamilton_field(family, &pt) {
                Ok(v) => d.copy_from_slice(&v),
                Err(e) => {
                    fail.borrow_mut().get_or_insert(e);
                    d.iter_mut().for_each(|x| *x = 0.0);
                }
            }
        };
        let mut solver = Dopri5::new(t, point.coords(), ode_opts);
        loop {
            if (t_max - t) * dir <= 0.0 {
                break 'outer Terminal::BudgetExhausted;
            }
            if steps >= opts.max_steps {
                break 'outer Terminal::BudgetExhausted;
            }
            solver.step(&mut rhs, t_max).map_err(|e| Error::IntegrationFailure { t, reason: format!("{e}; last state {:?}", point.coords()) })?;
            if let Some(e) = fail.borrow_mut().take() {
                return Err(e);
            }
            steps += 1;
            t = solver.t;
            let mut next = PhasePoint::from_coords(boundary, n, &solver.y);
            next.normalize();
            if next.coords().iter().any(|v| !v.is_finite()) || next.rho_inf() < opts.rho_barrier {
                point = next;
                break 'outer Terminal::LeftDomain;
            }
            point = next;
            let r = row(family, t, &point)?;
            p_drift = p_drift.max((r.p - p0).abs());
            rows.push(r);
            if boundary && !start_on_boundary && point.rho() < opts.rho_barrier {
                break 'outer classify_end(&rows, &point, opts.tol_dyn);
            }
            if boundary && point.rho() > 1.5 * switch_rho {
                point = point.to_interior()?;
                continue 'outer;
            }
            if !boundary && point.rho() < switch_rho {
                point = point.to_boundary()?;
                continue 'outer;
            }
        }
    };
    let terminal = if terminal == Terminal::BudgetExhausted && start_on_boundary && radial_distance(&point) < opts.tol_dyn {
        sign_label(&point)
    } else {
        terminal
    };
    Ok(Trajectory { rows, terminal, end: point, p_drift })
}

/// Converged when the distance to the set is below tol and did not grow
/// over the final tenth of the steps.
fn classify_end(rows: &[TrajectoryRow], point: &PhasePoint, tol: f64) -> Terminal {
    let last = rows[rows.len() - 1].distance;
    let k = rows.len() - 1 - (rows.len() / 10).max(1).min(rows.len() - 1);
    let monotone = rows[k..].windows(2).all(|w| w[1].distance <= w[0].distance * (1.0 + 1e-9) + 1e-15);
    if last < tol && monotone {
        sign_label(point)
    } else {
        Terminal::LeftDomain
    }
}

/// CSV dump with columns t, rho, rho_inf, tau, mu_0..mu_{n−1}, y_0..y_{n−1}, p.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.rows.first().map(|r| r.y.len()).unwrap_or(0);
    let mut out = String::from("t,rho,rho_inf,tau");
    for i in 0..n {
        out.push_str(&format!(",mu_{i}"));
    }
    for i in 0..n {
        out.push_str(&format!(",y_{i}"));
    }
    out.push_str(",p\n");
    for r in &traj.rows {
        out.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}", r.t, r.rho, r.rho_inf, r.tau));
        for v in r.mu.iter().chain(&r.y) {
            out.push_str(&format!(",{v:.17e}"));
        }
        out.push_str(&format!(",{:.17e}\n", r.p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_null_bicharacteristic_goes_from_source_to_sink() {
        let m = MetricFamily::minkowski(4).unwrap();
        let xi = vec![1.0, 0.6, 0.8, 0.0];
        let start = PhasePoint::Interior { x: vec![0.5, -1.0, 2.0, 1.0], xi: xi.clone() }.to_boundary().unwrap();
        let fwd = flow_integrate(&m, &start, 200.0, FlowOptions::default()).unwrap();
        assert_eq!(fwd.terminal, Terminal::ConvergedToSink);
        let PhasePoint::Boundary { y, .. } = &fwd.end else { panic!() };
        // straight line x + tηξ: direction tends to ηξ/|ηξ|
        let e = [1.0, -0.6, -0.8, 0.0];
        let ne = (2.0f64).sqrt();
        assert!(y.iter().zip(&e).all(|(a, b)| (a - b / ne).abs() < 1e-6), "{y:?}");
        let bwd = flow_integrate(&m, &start, -200.0, FlowOptions::default()).unwrap();
        assert_eq!(bwd.terminal, Terminal::ConvergedToSource);
        assert!(fwd.p_drift < 1e-6 && bwd.p_drift < 1e-6);
    }

    #[test]
    fn radial_point_is_fixed_and_elliptic_start_is_rejected() {
        let m = MetricFamily::minkowski(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // y null, ξ = ηy: τ = −ξ·y = 0, μ = ξ
        let start = PhasePoint::Boundary { rho: 0.0, y: vec![s, s], tau: 0.0, mu: vec![s, -s] };
        let tr = flow_integrate(&m, &start, 5.0, FlowOptions::default()).unwrap();
        assert!(tr.rows.iter().all(|r| r.distance < 1e-6));
        assert_eq!(tr.terminal, Terminal::ConvergedToSink);
        let ell = PhasePoint::Interior { x: vec![0.0, 0.5], xi: vec![2.0, 1.0] };
        assert!(matches!(flow_integrate(&m, &ell, 5.0, FlowOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn reversible_and_chart_consistent() {
        let bump = MetricFamily::conformal_bump(2, 0.05, 1.0, crate::geometry::BumpProfile::Gaussian).unwrap();
        let start = PhasePoint::Interior { x: vec![0.2, 0.9], xi: vec![1.0, 1.0] };
        let opts = FlowOptions { switch_radius: 100.0, ..FlowOptions::default() };
        let f = flow_integrate(&bump, &start, 1.0, opts).unwrap();
        let b = flow_integrate(&bump, &f.end, -1.0, opts).unwrap();
        let d: f64 = b.end.coords().iter().zip(start.coords()).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(d < 10.0 * TOL_DYN, "{d}");
        // integrate in the boundary chart from the mapped start
        let opts_b = FlowOptions { switch_radius: 1.01, ..FlowOptions::default() };
        let g = flow_integrate(&bump, &start.to_boundary().unwrap(), 1.0, opts_b).unwrap();
        let mapped = f.end.to_boundary().unwrap().coords();
        let e: f64 = g.end.to_boundary().unwrap().coords().iter().zip(&mapped).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(e < 10.0 * TOL_DYN, "{e}");
    }
}
