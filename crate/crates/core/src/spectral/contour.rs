//! The integration path for complex powers.
//!
//! The path comes in from infinity along the ray iε + d·e^{iθ}, passes
//! below iε on the circle of radius ε/2, and leaves along iε + d·e^{i(π−θ)}.
//! The spectrum lies to the right of the direction of travel, so that
//!
//! (P − iε)^{−α} = (1/2πi) ∫ (z − iε)^{−α} (P − z)^{−1} dz
//!
//! with arg(z − iε) ∈ (−3π/2, π/2]; the cut runs upward from iε and is
//! never crossed.

use crate::error::{Error, Result};
use crate::special::{GaussLegendre, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ORDER: usize = 16;

/// User-facing contour parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub epsilon: f64,
    pub theta: f64,
    /// Truncation radius of the rays, chosen automatically when absent.
    #[serde(default)]
    pub rtrunc: Option<f64>,
    #[serde(default = "default_nodes_per_unit")]
    pub nodes_per_unit: f64,
}

fn default_nodes_per_unit() -> f64 {
    16.0
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec { epsilon: 1.0, theta: 0.75 * PI, rtrunc: None, nodes_per_unit: default_nodes_per_unit() }
    }
}

/// A smooth piece of the path, parametrized by t ∈ [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    Line {
        a: C64,
        b: C64,
    },
    /// center + radius·e^{i(start + t·sweep)}
    Arc {
        center: C64,
        radius: f64,
        start: f64,
        sweep: f64,
    },
    /// base + d·e^{i·angle}, log d linear in t from d_from to d_to.
    Ray {
        base: C64,
        angle: f64,
        d_from: f64,
        d_to: f64,
    },
}

impl Piece {
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Piece::Line { a, b } => a + (b - a) * t,
            Piece::Arc { center, radius, start, sweep } => center + C64::from_polar(radius, start + t * sweep),
            Piece::Ray { base, angle, d_from, d_to } => base + C64::from_polar(ray_distance(d_from, d_to, t), angle),
        }
    }

    /// dz/dt.
    pub fn derivative(&self, t: f64) -> C64 {
        match *self {
            Piece::Line { a, b } => b - a,
            Piece::Arc { radius, start, sweep, .. } => C64::new(0.0, sweep) * C64::from_polar(radius, start + t * sweep),
            Piece::Ray { angle, d_from, d_to, .. } => {
                let d = ray_distance(d_from, d_to, t);
                C64::from_polar(d * (d_to / d_from).ln(), angle)
            }
        }
    }

    /// The same piece restricted to parameters [t0, t1].
    pub fn restrict(&self, t0: f64, t1: f64) -> Piece {
        match *self {
            Piece::Line { .. } => Piece::Line { a: self.point(t0), b: self.point(t1) },
            Piece::Arc { center, radius, start, sweep } => Piece::Arc { center, radius, start: start + t0 * sweep, sweep: (t1 - t0) * sweep },
            Piece::Ray { base, angle, d_from, d_to } => {
                Piece::Ray { base, angle, d_from: ray_distance(d_from, d_to, t0), d_to: ray_distance(d_from, d_to, t1) }
            }
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Piece::Line { a, b } => (b - a).norm(),
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
            Piece::Ray { d_from, d_to, .. } => (d_to - d_from).abs(),
        }
    }
}

fn ray_distance(d_from: f64, d_to: f64, t: f64) -> f64 {
    (d_from.ln() + t * (d_to / d_from).ln()).exp()
}

/// (z − iε)^{−α} with arg(z − iε) ∈ (−3π/2, π/2].
pub fn branch_power(z: C64, epsilon: f64, alpha: C64) -> Result<C64> {
    let w = z - C64::new(0.0, epsilon);
    if w.norm() == 0.0 {
        return Err(Error::PoleProximity { alpha, distance: 0.0 });
    }
    let mut arg = w.im.atan2(w.re);
    if arg > 0.5 * PI {
        arg -= 2.0 * PI;
    }
    Ok((-alpha * C64::new(w.norm().ln(), arg)).exp())
}

/// Quadrature nodes and weights of a contour, with the geometry that
/// produced them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Contour {
    pub epsilon: f64,
    pub theta: f64,
    pub rtrunc: f64,
    pub pieces: Vec<Piece>,
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
    /// Number of deformation bumps inserted to avoid eigenvalues.
    pub bumps: usize,
    /// Number of enclosing circles appended.
    pub enclosures: usize,
    nodes_per_unit: f64,
    /// Spectral scale separating fine and coarse ray panels.
    scale: f64,
    /// Width in log-distance of the coarse ray panels.
    far_width: f64,
    /// Points near which panels are refined.
    refine_at: Vec<C64>,
}

/// Ray length beyond which (1/π)∫_R^∞ d^{−a−1}dd stays below `tol`.
pub fn truncation_radius(alpha_re_min: f64, tol: f64, scale: f64) -> f64 {
    let a = alpha_re_min.max(1e-3);
    (1.0 / (PI * a * tol)).powf(1.0 / a).max(100.0 * scale.max(1.0))
}

/// Default minimal node-to-eigenvalue distance for a spectral radius.
pub fn default_dist_min(spectral_radius: f64) -> f64 {
    1e-3 * spectral_radius.max(1.0)
}

impl Contour {
    /// Build the undeformed path. `scale` bounds the spectral radius of the
    /// operators it will be used with; `alpha_range` holds the smallest
    /// Re α and the largest |α| the nodes must serve.
    pub fn build(spec: &ContourSpec, scale: f64, alpha_range: (f64, f64)) -> Result<Contour> {
        let alpha_re = alpha_range;
        let ContourSpec { epsilon, theta, rtrunc, nodes_per_unit } = *spec;
        if !(theta > 0.5 * PI && theta < PI) {
            return Err(Error::Config(format!("contour angle θ = {theta} must lie in (π/2, π)")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("contour shift ε = {epsilon} must be positive")));
        }
        if !(nodes_per_unit >= 1.0) {
            return Err(Error::Config("nodes_per_unit must be at least 1".into()));
        }
        if !(alpha_re.0 > 0.0 && alpha_re.1 >= alpha_re.0) {
            return Err(Error::InvalidInput(format!("contour quadrature needs 0 < Re α (got range {alpha_re:?})")));
        }
        let scale = scale.max(epsilon);
        let rtrunc = rtrunc.unwrap_or_else(|| truncation_radius(alpha_re.0, 1e-12, scale));
        let base = C64::new(0.0, epsilon);
        let r0 = 0.5 * epsilon;
        if !(rtrunc > r0 && rtrunc.is_finite()) {
            return Err(Error::Config(format!("truncation radius {rtrunc} must be finite and exceed ε/2")));
        }
        let pieces = vec![
            Piece::Ray { base, angle: theta, d_from: rtrunc, d_to: r0 },
            Piece::Arc { center: base, radius: r0, start: theta - 2.0 * PI, sweep: 3.0 * PI - 2.0 * theta },
            Piece::Ray { base, angle: PI - theta, d_from: r0, d_to: rtrunc },
        ];
        let mut c = Contour {
            epsilon,
            theta,
            rtrunc,
            pieces,
            nodes: Vec::new(),
            weights: Vec::new(),
            bumps: 0,
            enclosures: 0,
            nodes_per_unit,
            scale,
            far_width: (44.0 / nodes_per_unit).min(10.0 / alpha_re.1.max(0.5)),
            refine_at: Vec::new(),
        };
        c.discretize();
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ_j w_j f(z_j).
    pub fn integrate<F: FnMut(C64) -> C64>(&self, mut f: F) -> C64 {
        let mut acc = crate::special::CompensatedSum::new();
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(*z));
        }
        acc.value()
    }

    /// Smallest distance between a quadrature node and any of `points`.
    pub fn min_node_distance(&self, points: &[C64]) -> f64 {
        self.nodes.iter().flat_map(|z| points.iter().map(move |p| (z - p).norm())).fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance between a node and the rectangle
    /// {|Re λ| ≤ re_bound, |Im λ| ≤ im_bound} that contains the spectrum.
    pub fn distance_to_strip(&self, re_bound: f64, im_bound: f64) -> f64 {
        self.nodes
            .iter()
            .map(|z| {
                let dx = (z.re.abs() - re_bound).max(0.0);
                let dy = (z.im.abs() - im_bound).max(0.0);
                (dx * dx + dy * dy).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from p to the path, with the piece index and parameter of
    /// the closest point.
    fn closest(&self, p: C64) -> (f64, usize, f64) {
        let mut best = (f64::INFINITY, 0, 0.0);
        for (k, piece) in self.pieces.iter().enumerate() {
            let samples = 2000;
            let mut local = (f64::INFINITY, 0.0);
            for s in 0..=samples {
                let t = s as f64 / samples as f64;
                let d = (piece.point(t) - p).norm();
                if d < local.0 {
                    local = (d, t);
                }
            }
            // golden-section polish around the best sample
            let (mut a, mut b) = ((local.1 - 1.0 / samples as f64).max(0.0), (local.1 + 1.0 / samples as f64).min(1.0));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if (piece.point(c) - p).norm() < (piece.point(d) - p).norm() {
                    b = d;
                } else {
                    a = c;
                }
            }
            let t = 0.5 * (a + b);
            let d = (piece.point(t) - p).norm().min(local.0);
            if d < best.0 {
                best = (d, k, t);
            }
        }
        best
    }

    /// +1 if p lies to the left of the direction of travel at its closest
    /// point, −1 if to the right, 0 if on the path.
    fn side(&self, p: C64) -> i32 {
        let (d, k, t) = self.closest(p);
        if d < 1e-14 * (1.0 + p.norm()) {
            return 0;
        }
        let piece = self.pieces[k];
        let tangent = piece.derivative(t);
        let cross = (tangent.conj() * (p - piece.point(t))).im;
        if cross > 0.0 {
            1
        } else {
            -1
        }
    }

    fn distance_to_cut(&self, p: C64) -> f64 {
        if p.im >= self.epsilon {
            p.re.abs()
        } else {
            (p - C64::new(0.0, self.epsilon)).norm()
        }
    }

    /// Deform the path around every eigenvalue closer than `dist_min`, and
    /// refine panels near all of them.
    pub fn avoid(&mut self, eigenvalues: &[C64], dist_min: f64) -> Result<()> {
        if !(dist_min > 0.0) {
            return Err(Error::InvalidInput("dist_min must be positive".into()));
        }
        let mut distinct: Vec<C64> = Vec::new();
        for &l in eigenvalues {
            if !l.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite eigenvalue {l}")));
            }
            if distinct.iter().all(|d| (d - l).norm() > 1e-12 * (1.0 + l.norm())) {
                distinct.push(l);
            }
        }
        for &lam in &distinct {
            if self.closest(lam).0 >= dist_min {
                continue;
            }
            let side = self.side(lam);
            let mut done = false;
            for factor in [4.0, 8.0, 16.0, 32.0] {
                let r = factor * dist_min;
                let inside_ok = distinct.iter().all(|&mu| {
                    let d = (mu - lam).norm();
                    if (d - r).abs() < dist_min {
                        return false;
                    }
                    d > r || mu == lam || self.side(mu) == side || self.side(mu) == 0
                });
                if !inside_ok || self.distance_to_cut(lam) <= r + dist_min {
                    continue;
                }
                if self.insert_bump(lam, r, side)? {
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(Error::ContourFailure(format!("no admissible deformation around the eigenvalue {lam}")));
            }
            self.bumps += 1;
        }
        self.refine_at.extend(distinct);
        self.discretize();
        let worst = self.min_node_distance(&self.refine_at);
        if worst < 0.5 * dist_min {
            return Err(Error::ContourFailure(format!("a node remains within {worst:.3e} of the spectrum")));
        }
        Ok(())
    }

    fn insert_bump(&mut self, lam: C64, r: f64, side: i32) -> Result<bool> {
        let inside = |z: C64| (z - lam).norm() < r;
        let samples = 4000;
        let mut first: Option<(usize, f64)> = None;
        let mut last: Option<(usize, f64)> = None;
        for (k, piece) in self.pieces.iter().enumerate() {
            let mut prev_in = inside(piece.point(0.0));
            for s in 1..=samples {
                let t = s as f64 / samples as f64;
                let now_in = inside(piece.point(t));
                if now_in != prev_in {
                    let t0 = (s - 1) as f64 / samples as f64;
                    let root = bisect(|u| (piece.point(u) - lam).norm() - r, t0, t);
                    if now_in && first.is_none() {
                        first = Some((k, root));
                    }
                    if !now_in {
                        last = Some((k, root));
                    }
                }
                prev_in = now_in;
            }
        }
        let (Some((k0, t0)), Some((k1, t1))) = (first, last) else {
            return Ok(false);
        };
        if (k0, t0) >= (k1, t1) {
            return Ok(false);
        }
        let z_in = self.pieces[k0].point(t0);
        let z_out = self.pieces[k1].point(t1);
        let a1 = (z_in - lam).arg();
        let a2 = (z_out - lam).arg();
        let sweep = if side > 0 { (a2 - a1).rem_euclid(2.0 * PI) } else { -(a1 - a2).rem_euclid(2.0 * PI) };
        let mut replacement = Vec::new();
        if t0 > 0.0 {
            replacement.push(self.pieces[k0].restrict(0.0, t0));
        }
        replacement.push(Piece::Arc { center: lam, radius: r, start: a1, sweep });
        if t1 < 1.0 {
            replacement.push(self.pieces[k1].restrict(t1, 1.0));
        }
        // the bump must not pass the branch point
        let bump = replacement.iter().find(|p| matches!(p, Piece::Arc { center, .. } if *center == lam)).copied();
        if let Some(b) = bump {
            let crosses = (0..=200).any(|s| self.distance_to_cut(b.point(s as f64 / 200.0)) < 1e-12);
            if crosses {
                return Ok(false);
            }
        }
        self.pieces.splice(k0..=k1, replacement);
        Ok(true)
    }

    /// Append a clockwise circle of radius r around λ. Integrating the
    /// resolvent over it adds f(λ)Π_λ for an eigenvalue λ inside.
    pub fn enclose(&mut self, lambda: C64, radius: f64) -> Result<()> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("enclosing radius must be positive".into()));
        }
        if self.distance_to_cut(lambda) <= radius {
            return Err(Error::ContourFailure(format!("a circle of radius {radius} around {lambda} meets the branch cut")));
        }
        if self.closest(lambda).0 <= radius {
            return Err(Error::ContourFailure(format!("a circle of radius {radius} around {lambda} meets the contour")));
        }
        self.pieces.push(Piece::Arc { center: lambda, radius, start: 0.0, sweep: -2.0 * PI });
        self.enclosures += 1;
        self.refine_at.push(lambda);
        self.discretize();
        Ok(())
    }

    fn initial_panels(&self, piece: &Piece) -> Vec<f64> {
        let per = self.nodes_per_unit / ORDER as f64;
        match *piece {
            Piece::Line { .. } => uniform((piece.length() * per).ceil().max(1.0) as usize),
            Piece::Arc { .. } => uniform((piece.length() * per).ceil().max(4.0) as usize),
            Piece::Ray { d_from, d_to, angle, .. } => {
                let delta = (angle.rem_euclid(PI) - 0.5 * PI).abs().max(1e-3);
                let near = (11.0 / self.nodes_per_unit).min(0.5 * PI - delta).max(1e-3).min(std::f64::consts::LN_2.max(0.5 * PI - delta));
                let near = near.min(std::f64::consts::LN_2 * 16.0 / self.nodes_per_unit).min(self.far_width);
                let (lo, hi) = (d_from.min(d_to).ln(), d_from.max(d_to).ln());
                let knee = (4.0 * self.scale).ln();
                let mut s = vec![lo];
                let mut cur = lo;
                while cur < hi {
                    let w = if cur < knee { near } else { self.far_width };
                    let mut next = cur + w;
                    if cur < knee && next > knee {
                        next = knee;
                    }
                    if next > hi - 1e-9 * w {
                        next = hi;
                    }
                    s.push(next);
                    cur = next;
                }
                let span = (d_to / d_from).ln();
                let mut t: Vec<f64> = s.iter().map(|v| ((v - d_from.ln()) / span).clamp(0.0, 1.0)).collect();
                t.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                t.dedup();
                t
            }
        }
    }

    fn discretize(&mut self) {
        let gl = GaussLegendre::new(ORDER);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for piece in &self.pieces {
            let breaks = self.initial_panels(piece);
            let mut stack: Vec<(f64, f64, usize)> = breaks.windows(2).rev().map(|w| (w[0], w[1], 0)).collect();
            while let Some((a, b, depth)) = stack.pop() {
                let za = piece.point(a);
                let zb = piece.point(b);
                let zm = piece.point(0.5 * (a + b));
                let len = (zb - zm).norm() + (zm - za).norm();
                let needs = depth < 48
                    && self.refine_at.iter().any(|&p| {
                        let d = (0..=8).map(|s| (piece.point(a + (b - a) * s as f64 / 8.0) - p).norm()).fold(f64::INFINITY, f64::min);
                        len > 2.0 * d
                    });
                if needs {
                    let m = 0.5 * (a + b);
                    stack.push((m, b, depth + 1));
                    stack.push((a, m, depth + 1));
                    continue;
                }
                let half = 0.5 * (b - a);
                for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                    let t = a + half * (x + 1.0);
                    nodes.push(piece.point(t));
                    weights.push(piece.derivative(t) * (half * w));
                }
            }
        }
        self.nodes = nodes;
        self.weights = weights;
    }
}

fn uniform(panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| i as f64 / panels as f64).collect()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ContourSpec {
        ContourSpec { epsilon: 1.0, theta: 0.75 * PI, rtrunc: Some(1e12), nodes_per_unit: 16.0 }
    }

    #[test]
    fn cauchy_theorem_on_the_path() {
        let c = Contour::build(&spec(), 10.0, (0.5, 3.0)).unwrap();
        let v = c.integrate(|z| (z - C64::new(0.0, 1.0)).powi(-2));
        assert!(v.norm() < 1e-10, "{v}");
        assert_eq!(c.bumps, 0);
    }

    #[test]
    fn scalar_power_and_branch() {
        let c = Contour::build(&ContourSpec { rtrunc: None, ..spec() }, 1.0, (1.0, 1.0)).unwrap();
        let lam = C64::new(1.0, 0.0);
        let v = c.integrate(|z| branch_power(z, 1.0, C64::new(1.0, 0.0)).unwrap() / (lam - z)) / C64::new(0.0, 2.0 * PI);
        assert!((v - C64::new(0.5, 0.5)).norm() < 1e-11, "{v}");
        // below iε the branch is the principal one
        let z = C64::new(-3.0, 0.2);
        let a = C64::new(0.7, 0.3);
        assert!((branch_power(z, 1.0, a).unwrap() - (z - C64::new(0.0, 1.0)).powc(-a)).norm() < 1e-14);
    }

    #[test]
    fn bump_around_an_eigenvalue_on_the_path() {
        let mut c = Contour::build(&spec(), 4.0, (0.5, 2.0)).unwrap();
        let lam = C64::new(0.0, 0.5);
        c.avoid(&[lam, C64::new(2.0, 0.0)], 4e-3).unwrap();
        assert_eq!(c.bumps, 1);
        assert!(c.min_node_distance(&[lam]) > 4e-3);
        let alpha = C64::new(1.5, 0.0);
        let v = c.integrate(|z| branch_power(z, 1.0, alpha).unwrap() / (lam - z)) / C64::new(0.0, 2.0 * PI);
        let exact = branch_power(lam, 1.0, alpha).unwrap();
        assert!((v - exact).norm() < 1e-9 * exact.norm(), "{v} vs {exact}");
    }

    #[test]
    fn enclosing_circle_adds_the_residue() {
        let mut c = Contour::build(&ContourSpec { rtrunc: None, ..spec() }, 4.0, (0.5, 2.0)).unwrap();
        let lam = C64::new(0.3, 2.5);
        let alpha = C64::new(0.5, 0.0);
        let f = |c: &Contour| c.integrate(|z| branch_power(z, 1.0, alpha).unwrap() / (lam - z)) / C64::new(0.0, 2.0 * PI);
        let before = f(&c);
        assert!(before.norm() < 1e-10);
        c.enclose(lam, 0.2).unwrap();
        let after = f(&c);
        assert!((after - branch_power(lam, 1.0, alpha).unwrap()).norm() < 1e-11);
        assert!(c.enclose(C64::new(0.05, 3.0), 0.2).is_err());
    }

    #[test]
    fn rejects_bad_angles() {
        assert!(Contour::build(&ContourSpec { theta: 0.3, ..spec() }, 1.0, (1.0, 1.0)).unwrap_err().is_config());
    }
}
