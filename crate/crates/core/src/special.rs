//! Special functions and quadrature rules.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

pub type C64 = Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Principal branch of log Γ(z) for complex z (Lanczos approximation with
/// reflection for Re z < 1/2). Returns `None` at the poles.
pub fn ln_gamma(z: C64) -> Option<C64> {
    if z.re < 0.5 {
        // Γ(z) = π / (sin(πz) Γ(1−z))
        let s = (z * PI).sin();
        if s.norm() == 0.0 {
            return None;
        }
        let rest = ln_gamma(C64::new(1.0, 0.0) - z)?;
        return Some(C64::new(PI.ln(), 0.0) - s.ln() - rest);
    }
    let z = z - 1.0;
    let mut x = C64::new(LANCZOS_COEF[0], 0.0);
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Some(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln())
}

/// Γ(z) for complex z. Poles return an infinite value.
pub fn gamma(z: C64) -> C64 {
    if nonpositive_integer(z).is_some() {
        return C64::new(f64::INFINITY, 0.0);
    }
    if z.im == 0.0 && z.re > 0.0 && z.re < 171.0 {
        return C64::new(gamma_real(z.re), 0.0);
    }
    ln_gamma(z).map(|l| l.exp()).unwrap_or(C64::new(f64::INFINITY, 0.0))
}

/// 1/Γ(z), which is entire; exact zeros at the non-positive integers.
pub fn rgamma(z: C64) -> C64 {
    if nonpositive_integer(z).is_some() {
        return C64::new(0.0, 0.0);
    }
    if z.im == 0.0 && z.re > 0.0 && z.re < 171.0 {
        return C64::new(1.0 / gamma_real(z.re), 0.0);
    }
    match ln_gamma(z) {
        Some(l) => (-l).exp(),
        None => C64::new(0.0, 0.0),
    }
}

fn gamma_real(x: f64) -> f64 {
    if x == x.floor() && x <= 21.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    ln_gamma(C64::new(x, 0.0)).map(|l| l.re.exp()).unwrap_or(f64::INFINITY)
}

/// Returns `Some(k)` when z equals the non-positive integer −k exactly.
pub fn nonpositive_integer(z: C64) -> Option<u64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        Some((-z.re) as u64)
    } else {
        None
    }
}

/// Distance from z to the nearest pole of Γ.
pub fn gamma_pole_distance(z: C64) -> f64 {
    let k = z.re.round().min(0.0);
    (z - C64::new(k, 0.0)).norm()
}

/// Integer factorial as a float.
pub fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Neumaier-compensated sum of complex numbers in the given order.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: C64,
    comp: C64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: C64) {
        self.sum.re = neumaier(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = neumaier(self.sum.im, x.im, &mut self.comp.im);
    }

    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }
}

fn neumaier(sum: f64, x: f64, comp: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

/// Gauss–Legendre rule on [−1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule of the given order; rules are cached after the first request.
    pub fn new(order: usize) -> GaussLegendre {
        static CACHE: OnceLock<Mutex<Vec<Option<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        if guard.len() <= order {
            guard.resize(order + 1, None);
        }
        if let Some(rule) = &guard[order] {
            return rule.clone();
        }
        let rule = Self::compute(order);
        guard[order] = Some(rule.clone());
        rule
    }

    fn compute(order: usize) -> GaussLegendre {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate a real function over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Integrate a complex-valued function over [a, b].
    pub fn integrate_c<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = CompensatedSum::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(f(mid + half * x) * *w);
        }
        acc.value() * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre integral of a complex function over [a, b]
/// with `panels` equal panels of the given order.
pub fn composite_c<F: FnMut(f64) -> C64>(a: f64, b: f64, panels: usize, order: usize, mut f: F) -> C64 {
    let rule = GaussLegendre::new(order);
    let h = (b - a) / panels as f64;
    let mut acc = CompensatedSum::new();
    for p in 0..panels {
        let lo = a + p as f64 * h;
        acc.add(rule.integrate_c(lo, lo + h, &mut f));
    }
    acc.value()
}

/// Composite Gauss–Legendre integral of a real function.
pub fn composite<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, order: usize, mut f: F) -> f64 {
    composite_c(a, b, panels, order, |x| C64::new(f(x), 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_factorials_and_half_integers() {
        for k in 1..10u32 {
            let g = gamma(C64::new(k as f64, 0.0));
            assert!((g.re - factorial(k - 1)).abs() < 1e-12 * factorial(k - 1));
        }
        let g = gamma(C64::new(0.5, 0.0));
        assert!((g.re - PI.sqrt()).abs() < 1e-14);
        let g = gamma(C64::new(-0.5, 0.0));
        assert!((g.re + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gamma_recurrence_holds_off_axis() {
        for &z in &[C64::new(0.3, 2.0), C64::new(-2.7, 0.4), C64::new(4.0, -9.0)] {
            let lhs = gamma(z + 1.0);
            let rhs = z * gamma(z);
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
        }
    }

    #[test]
    fn rgamma_vanishes_at_poles() {
        for k in 0..5 {
            assert_eq!(rgamma(C64::new(-(k as f64), 0.0)), C64::new(0.0, 0.0));
        }
        assert!((rgamma(C64::new(1.0, 0.0)).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(15) - 3.0 * x.powi(4));
        let exact = (2f64.powi(16) - 1.0) / 16.0 - 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs());
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(C64::new(1e16, 0.0));
        for _ in 0..10 {
            s.add(C64::new(1.0, 0.0));
        }
        s.add(C64::new(-1e16, 0.0));
        assert_eq!(s.value().re, 10.0);
    }
}
