//! Geodesics, the exponential map and its Jacobian, and radial data along
//! geodesic rays from a base point.
//!
//! The integrated state is laid out as `[x, ẋ, rest]`, where `rest` holds
//! either a parallel-transported n×n matrix (column-major) or a pair of
//! Jacobi-field matrices `(δx, δẋ)`.

use super::curvature::connection_jet;
use super::{christoffel_at, gram_schmidt_frame, minkowski, MetricFamily};
use crate::error::{Error, Result};
use crate::ode::{rk4_fixed, Dopri5, OdeOptions};
use nalgebra::DMatrix;

/// Endpoint of a geodesic together with transport data.
#[derive(Clone, Debug)]
pub struct GeodesicState {
    pub x0: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    /// Parallel-transport matrix: column j is the transport of ∂_j.
    pub frame: DMatrix<f64>,
    /// max |g(ẋ,ẋ)(t) − g(ẋ,ẋ)(0)| over accepted steps.
    pub energy_drift: f64,
}

impl GeodesicState {
    /// Largest deviation of Tᵀ g(x) T from g(x₀).
    pub fn transport_defect(&self, family: &MetricFamily) -> Result<f64> {
        let g0 = family.metric_at(&self.x0)?;
        let g1 = family.metric_at(&self.x)?;
        Ok((self.frame.transpose() * g1 * &self.frame - g0).amax())
    }
}

/// Samples along the geodesic ray r ↦ exp(x₀, rω).
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub x0: Vec<f64>,
    pub direction: Vec<f64>,
    pub r: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// Parallel transport of the Gram–Schmidt frame at x₀ (columns e_a).
    pub frames: Vec<DMatrix<f64>>,
    /// |g(γ(r))|^{1/2} in the original coordinates.
    pub sqrt_det: Vec<f64>,
    /// |g_N(rω)|^{1/2} in normal coordinates centred at x₀.
    pub sqrt_det_normal: Vec<f64>,
    /// h(r) = r ∂_r log |g_N|^{1/2}.
    pub h: Vec<f64>,
}

fn metric_energy(g: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e += g[(i, j)] * v[i] * v[j];
        }
    }
    e
}

fn geodesic_accel(gam: &[f64], n: usize, v: &[f64], out: &mut [f64]) {
    for l in 0..n {
        let mut acc = 0.0;
        for m in 0..n {
            for k in 0..n {
                acc += gam[(l * n + m) * n + k] * v[m] * v[k];
            }
        }
        out[l] = -acc;
    }
}

/// Right-hand side for geodesic plus parallel transport of an n×n matrix.
fn transport_rhs(family: &MetricFamily, y: &[f64], dy: &mut [f64], fail: &mut Option<Error>) {
    let n = family.dim();
    let (x, rest) = y.split_at(n);
    let (v, t) = rest.split_at(n);
    dy[..n].copy_from_slice(v);
    let gam = if family.is_flat_at(x) {
        None
    } else {
        match christoffel_at(family, x) {
            Ok(g) => Some(g),
            Err(e) => {
                fail.get_or_insert(e);
                None
            }
        }
    };
    let Some(gam) = gam else {
        dy[n..].iter_mut().for_each(|d| *d = 0.0);
        return;
    };
    geodesic_accel(&gam, n, v, &mut dy[n..2 * n]);
    let dt = &mut dy[2 * n..];
    for j in 0..t.len() / n {
        for l in 0..n {
            let mut acc = 0.0;
            for m in 0..n {
                for k in 0..n {
                    acc += gam[(l * n + m) * n + k] * v[m] * t[j * n + k];
                }
            }
            dt[j * n + l] = -acc;
        }
    }
}

/// Right-hand side for geodesic plus Jacobi fields: δẋ = δv,
/// δv̇^λ = −∂_κΓ^λ_{μν} δx^κ v^μ v^ν − 2Γ^λ_{μν} v^μ δv^ν.
fn jacobi_rhs(family: &MetricFamily, y: &[f64], dy: &mut [f64], fail: &mut Option<Error>) {
    let n = family.dim();
    let nn = n * n;
    let x = &y[..n];
    let v = &y[n..2 * n];
    let dx = &y[2 * n..2 * n + nn];
    let dv = &y[2 * n + nn..];
    dy[..n].copy_from_slice(v);
    dy[2 * n..2 * n + nn].copy_from_slice(dv);
    if family.is_flat_at(x) {
        dy[n..2 * n].iter_mut().for_each(|d| *d = 0.0);
        dy[2 * n + nn..].iter_mut().for_each(|d| *d = 0.0);
        return;
    }
    let (gam, dgam) = match connection_jet(family, x) {
        Ok(p) => p,
        Err(e) => {
            fail.get_or_insert(e);
            dy.iter_mut().for_each(|d| *d = 0.0);
            return;
        }
    };
    geodesic_accel(&gam, n, v, &mut dy[n..2 * n]);
    // ∂_κ(Γ^λ_{μν} v^μ v^ν) as an n×n matrix M[λ][κ]
    let mut m = vec![0.0; nn];
    for k in 0..n {
        for l in 0..n {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += dgam[((k * n + l) * n + a) * n + b] * v[a] * v[b];
                }
            }
            m[l * n + k] = acc;
        }
    }
    let ddv = &mut dy[2 * n + nn..];
    for j in 0..n {
        for l in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc -= m[l * n + k] * dx[j * n + k];
            }
            for a in 0..n {
                for b in 0..n {
                    acc -= 2.0 * gam[(l * n + a) * n + b] * v[a] * dv[j * n + b];
                }
            }
            ddv[j * n + l] = acc;
        }
    }
}

fn check_point(family: &MetricFamily, x: &[f64], what: &str) -> Result<()> {
    let n = family.dim();
    if x.len() != n || x.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} {x:?} is not a finite {n}-vector")));
    }
    Ok(())
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Integrate the geodesic with γ(0) = x₀, γ̇(0) = v up to t = 1 and
/// parallel-transport the coordinate basis along it.
pub fn exponential_map(family: &MetricFamily, x0: &[f64], v: &[f64], tol_ode: f64) -> Result<GeodesicState> {
    check_point(family, x0, "base point")?;
    check_point(family, v, "tangent")?;
    let n = family.dim();
    if euclid_norm(v) >= family.normal_radius() {
        return Err(Error::Precondition(format!(
            "|v| = {:.4} exceeds the normal-neighbourhood radius {:.4}",
            euclid_norm(v),
            family.normal_radius()
        )));
    }
    let g0 = family.metric_at(x0)?;
    if let MetricFamily::Minkowski { .. } = family {
        return Ok(GeodesicState {
            x0: x0.to_vec(),
            v: v.to_vec(),
            t: 1.0,
            x: x0.iter().zip(v).map(|(a, b)| a + b).collect(),
            xdot: v.to_vec(),
            frame: DMatrix::identity(n, n),
            energy_drift: 0.0,
        });
    }
    let e0 = metric_energy(&g0, v);
    let mut y0 = Vec::with_capacity(2 * n + n * n);
    y0.extend_from_slice(x0);
    y0.extend_from_slice(v);
    y0.extend(DMatrix::<f64>::identity(n, n).iter());
    let mut fail = None;
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| transport_rhs(family, y, dy, &mut fail);
    let opts = OdeOptions { h_init: 0.05, ..OdeOptions::with_tol(tol_ode) };
    let mut solver = Dopri5::new(0.0, y0, opts);
    let mut drift: f64 = 0.0;
    while solver.t < 1.0 {
        solver.step(&mut rhs, 1.0).map_err(|e| Error::GeodesicFailure(e.to_string()))?;
        let x = &solver.y[..n];
        let g = family.raw_metric(x);
        drift = drift.max((metric_energy(&g, &solver.y[n..2 * n]) - e0).abs());
        if (1.0 - solver.t).abs() < 1e-15 {
            break;
        }
    }
    if let Some(e) = fail {
        return Err(Error::GeodesicFailure(e.to_string()));
    }
    let y = &solver.y;
    Ok(GeodesicState {
        x0: x0.to_vec(),
        v: v.to_vec(),
        t: 1.0,
        x: y[..n].to_vec(),
        xdot: y[n..2 * n].to_vec(),
        frame: DMatrix::from_column_slice(n, n, &y[2 * n..]),
        energy_drift: drift,
    })
}

/// exp(x₀, y) and its derivative ∂x/∂y, from `steps` fixed RK4 steps of the
/// geodesic and Jacobi equations. The fixed grid makes the result a smooth
/// function of (x₀, y), which finite differences across nearby calls rely on.
pub fn exp_with_jacobian(family: &MetricFamily, x0: &[f64], y: &[f64], steps: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_point(family, x0, "base point")?;
    check_point(family, y, "tangent")?;
    let n = family.dim();
    if let MetricFamily::Minkowski { .. } = family {
        return Ok((x0.iter().zip(y).map(|(a, b)| a + b).collect(), DMatrix::identity(n, n)));
    }
    let nn = n * n;
    let mut s0 = vec![0.0; 2 * n + 2 * nn];
    s0[..n].copy_from_slice(x0);
    s0[n..2 * n].copy_from_slice(y);
    for j in 0..n {
        s0[2 * n + nn + j * n + j] = 1.0;
    }
    let mut fail = None;
    let mut rhs = |_t: f64, s: &[f64], ds: &mut [f64]| jacobi_rhs(family, s, ds, &mut fail);
    let out = rk4_fixed(&mut rhs, 0.0, 1.0, &s0, steps.max(1));
    if let Some(e) = fail {
        return Err(Error::GeodesicFailure(e.to_string()));
    }
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::GeodesicFailure("non-finite geodesic state".into()));
    }
    Ok((out[..n].to_vec(), DMatrix::from_column_slice(n, n, &out[2 * n..2 * n + nn])))
}

/// Solve exp(x₀, y) = x for y by Newton iteration on [`exp_with_jacobian`].
pub fn inverse_exp(family: &MetricFamily, x0: &[f64], x: &[f64], steps: usize) -> Result<Vec<f64>> {
    check_point(family, x0, "base point")?;
    check_point(family, x, "target")?;
    let n = family.dim();
    let mut y: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    if let MetricFamily::Minkowski { .. } = family {
        return Ok(y);
    }
    let scale = 1.0 + euclid_norm(&y);
    for _ in 0..50 {
        let (xe, jac) = exp_with_jacobian(family, x0, &y, steps)?;
        let res = nalgebra::DVector::from_iterator(n, x.iter().zip(&xe).map(|(a, b)| a - b));
        let rn = res.amax();
        if rn <= 4.0 * f64::EPSILON * scale {
            return Ok(y);
        }
        let dy = jac.lu().solve(&res).ok_or_else(|| Error::GeodesicFailure(format!("conjugate point on the way to {x:?}")))?;
        for i in 0..n {
            y[i] += dy[i];
        }
        if dy.amax() <= 1e-15 * scale {
            return Ok(y);
        }
    }
    Err(Error::GeodesicFailure(format!("inverse exponential map did not converge for x = {x:?}")))
}

/// Radial data along r ↦ exp(x₀, rω) at `samples` equispaced radii in
/// [0, r_max]: the parallel-transported Gram–Schmidt frame, volume
/// densities in the original and in normal coordinates, and h.
pub fn radial_trivialization(family: &MetricFamily, x0: &[f64], direction: &[f64], r_max: f64, samples: usize) -> Result<RadialProfile> {
    check_point(family, x0, "base point")?;
    check_point(family, direction, "direction")?;
    if samples < 2 || !(r_max > 0.0) {
        return Err(Error::InvalidInput("radial_trivialization needs samples >= 2 and r_max > 0".into()));
    }
    let n = family.dim();
    let nn = n * n;
    let wn = euclid_norm(direction);
    if r_max * wn >= family.normal_radius() {
        return Err(Error::Precondition(format!(
            "ray of length {:.4} leaves the normal neighbourhood (radius {:.4})",
            r_max * wn,
            family.normal_radius()
        )));
    }
    let g0 = family.metric_at(x0)?;
    let frame0 = gram_schmidt_frame(&g0, x0)?;
    let sqrt_det0 = g0.determinant().abs().sqrt();

    // state: x, ẋ, transported frame, Jacobi δx (= A), δẋ (= A')
    let off_t = 2 * n;
    let off_a = off_t + nn;
    let off_ad = off_a + nn;
    let mut s0 = vec![0.0; off_ad + nn];
    s0[..n].copy_from_slice(x0);
    s0[n..2 * n].copy_from_slice(direction);
    s0[off_t..off_a].copy_from_slice(frame0.as_slice());
    for j in 0..n {
        s0[off_ad + j * n + j] = 1.0;
    }
    let fail = std::cell::RefCell::new(None);
    let mut scratch_t = vec![0.0; 2 * n + nn];
    let mut scratch_j = vec![0.0; 2 * n + 2 * nn];
    let mut rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
        let mut yt = Vec::with_capacity(2 * n + nn);
        yt.extend_from_slice(&s[..off_a]);
        let mut f = fail.borrow_mut();
        transport_rhs(family, &yt, &mut scratch_t, &mut f);
        let mut yj = Vec::with_capacity(2 * n + 2 * nn);
        yj.extend_from_slice(&s[..2 * n]);
        yj.extend_from_slice(&s[off_a..]);
        jacobi_rhs(family, &yj, &mut scratch_j, &mut f);
        ds[..off_a].copy_from_slice(&scratch_t);
        ds[off_a..].copy_from_slice(&scratch_j[2 * n..]);
    };
    let mut solver = Dopri5::new(0.0, s0.clone(), OdeOptions { h_init: r_max / 64.0, ..OdeOptions::with_tol(1e-12) });
    let mut prof = RadialProfile {
        x0: x0.to_vec(),
        direction: direction.to_vec(),
        r: Vec::with_capacity(samples),
        points: Vec::with_capacity(samples),
        velocities: Vec::with_capacity(samples),
        frames: Vec::with_capacity(samples),
        sqrt_det: Vec::with_capacity(samples),
        sqrt_det_normal: Vec::with_capacity(samples),
        h: Vec::with_capacity(samples),
    };
    let eta = minkowski(n);
    for i in 0..samples {
        let r = r_max * i as f64 / (samples - 1) as f64;
        if i > 0 {
            solver.integrate_to(&mut rhs, r).map_err(|e| Error::GeodesicFailure(e.to_string()))?;
        }
        if let Some(e) = fail.borrow_mut().take() {
            return Err(Error::GeodesicFailure(e.to_string()));
        }
        let s = &solver.y;
        let x = s[..n].to_vec();
        let xd = s[n..2 * n].to_vec();
        let frame = DMatrix::from_column_slice(n, n, &s[off_t..off_a]);
        let g = family.metric_at(&x).map_err(|e| Error::GeodesicFailure(e.to_string()))?;
        let gram = frame.transpose() * &g * &frame;
        if (gram - &eta).amax() > 1e-6 {
            return Err(Error::GeodesicFailure(format!("transported frame degenerated at r = {r}")));
        }
        let sd = g.determinant().abs().sqrt();
        let (sdn, h) = if i == 0 {
            (sqrt_det0, 0.0)
        } else {
            let a = DMatrix::from_column_slice(n, n, &s[off_a..off_ad]);
            let ad = DMatrix::from_column_slice(n, n, &s[off_ad..]);
            let det = (&a / r).determinant();
            let ainv = a.clone().try_inverse().ok_or_else(|| Error::GeodesicFailure(format!("conjugate point at r = {r}")))?;
            let gam = christoffel_at(family, &x).map_err(|e| Error::GeodesicFailure(e.to_string()))?;
            let mut trace_term = 0.0;
            for l in 0..n {
                for k in 0..n {
                    trace_term += gam[(l * n + l) * n + k] * xd[k];
                }
            }
            let h = r * (ainv * ad).trace() - n as f64 + r * trace_term;
            (det.abs() * sd, h)
        };
        prof.r.push(r);
        prof.points.push(x);
        prof.velocities.push(xd);
        prof.frames.push(frame);
        prof.sqrt_det.push(sd);
        prof.sqrt_det_normal.push(sdn);
        prof.h.push(h);
    }
    Ok(prof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_at, BumpProfile, WarpProfile};

    fn bump2() -> MetricFamily {
        MetricFamily::conformal_bump(2, 0.2, 1.0, BumpProfile::Compact).unwrap()
    }

    #[test]
    fn minkowski_endpoint_is_exact() {
        let f = MetricFamily::minkowski(4).unwrap();
        let v = [0.3, -1.7, 2.2, 0.01];
        let st = exponential_map(&f, &[0.0; 4], &v, 1e-10).unwrap();
        assert_eq!(st.x, v.to_vec());
    }

    #[test]
    fn energy_and_transport_are_conserved() {
        let f = MetricFamily::conformal_bump(4, 0.15, 1.0, BumpProfile::Gaussian).unwrap();
        let v = [0.4, 0.3, -0.5, 0.2];
        let st = exponential_map(&f, &[0.1, 0.0, 0.2, -0.1], &v, 1e-10).unwrap();
        assert!(st.energy_drift < 1e-10 * (1.0 + 0.54));
        assert!(st.transport_defect(&f).unwrap() < 1e-9);
    }

    #[test]
    fn exits_support_along_a_straight_line() {
        let f = bump2();
        let x0 = [0.3, 0.1];
        let v = [0.8, 2.5];
        let st = exponential_map(&f, &x0, &v, 1e-11).unwrap();
        // past the support the position is affine in t with slope ẋ(1)
        let st_half = exponential_map(&f, &x0, &[0.9 * v[0], 0.9 * v[1]], 1e-11).unwrap();
        let t_half: Vec<f64> = (0..2).map(|i| st.x[i] - 0.1 * st.xdot[i]).collect();
        // rescaled geodesic: exp(0.9v) = γ_v(0.9)
        for i in 0..2 {
            assert!((st_half.x[i] - t_half[i]).abs() < 1e-8);
        }
        assert!((st.x[0] * st.x[0] + st.x[1] * st.x[1]).sqrt() > 1.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let f = bump2();
        let x0 = [0.2, -0.1];
        let y = [0.3, 0.5];
        let (_, j) = exp_with_jacobian(&f, &x0, &y, 200).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[k] += h;
            ym[k] -= h;
            let (xp, _) = exp_with_jacobian(&f, &x0, &yp, 200).unwrap();
            let (xm, _) = exp_with_jacobian(&f, &x0, &ym, 200).unwrap();
            for i in 0..2 {
                let fd = (xp[i] - xm[i]) / (2.0 * h);
                assert!((fd - j[(i, k)]).abs() < 1e-8, "{fd} vs {}", j[(i, k)]);
            }
        }
    }

    #[test]
    fn inverse_exp_round_trips() {
        let f = MetricFamily::warped(4, WarpProfile::Cosh { rate: 0.5 }).unwrap();
        let x0 = [0.1, 0.0, 0.2, -0.3];
        let y = [0.2, -0.3, 0.1, 0.25];
        let (x, _) = exp_with_jacobian(&f, &x0, &y, 128).unwrap();
        let back = inverse_exp(&f, &x0, &x, 128).unwrap();
        for i in 0..4 {
            assert!((back[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_profile_is_trivial_in_flat_space() {
        let f = MetricFamily::minkowski(2).unwrap();
        let p = radial_trivialization(&f, &[0.0, 0.0], &[0.3, 0.8], 2.0, 9).unwrap();
        assert!(p.h.iter().all(|h| h.abs() < 1e-13));
        assert!(p.frames.iter().all(|fr| (fr - &p.frames[0]).amax() < 1e-13));
    }

    #[test]
    fn radial_h_follows_ricci_at_small_radius() {
        let f = MetricFamily::conformal_bump(2, 0.2, 1.0, BumpProfile::Gaussian).unwrap();
        let x0 = [0.1, 0.2];
        let w = [0.6, 0.3];
        let p = radial_trivialization(&f, &x0, &w, 0.02, 3).unwrap();
        let c = curvature_at(&f, &x0, 1e-3).unwrap();
        let ric_ww: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| c.ricci[(a, b)] * w[a] * w[b]).sum();
        let r = p.r[2];
        let want = -ric_ww * r * r / 3.0;
        assert_eq!(p.h[0], 0.0);
        assert!((p.h[2] - want).abs() < 0.05 * want.abs() + 1e-12, "{} vs {want}", p.h[2]);
    }

    #[test]
    fn radial_h_is_log_derivative_of_density() {
        let f = MetricFamily::warped(2, WarpProfile::Cosh { rate: 0.8 }).unwrap();
        let p = radial_trivialization(&f, &[0.0, 0.0], &[0.5, 0.2], 1.0, 201).unwrap();
        let dr = p.r[1] - p.r[0];
        for i in [50, 100, 150] {
            let d = (p.sqrt_det_normal[i + 1].ln() - p.sqrt_det_normal[i - 1].ln()) / (2.0 * dr);
            assert!((p.r[i] * d - p.h[i]).abs() < 1e-5, "{} vs {}", p.r[i] * d, p.h[i]);
        }
    }
}
