//! Explicit Runge–Kutta integrators for first-order systems y' = f(t, y).
//!
//! `Dopri5` is the adaptive Dormand–Prince 5(4) pair with a PI step
//! controller. `rk4_fixed` is the classical fourth-order scheme on a uniform
//! grid; it is used where the result must depend smoothly on the initial
//! data (finite differences taken across neighbouring solutions).

use crate::error::{Error, Result};

/// Tolerances and limits for [`Dopri5`].
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol, ..Default::default() }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-10, h_init: 1e-2, h_min: 1e-14, h_max: f64::INFINITY, max_steps: 200_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince stepper. The caller drives the loop with
/// [`Dopri5::step`], which makes it easy to interleave event checks.
pub struct Dopri5 {
    pub t: f64,
    pub y: Vec<f64>,
    pub h: f64,
    pub opts: OdeOptions,
    pub steps: usize,
    k1: Vec<f64>,
    fsal_valid: bool,
    err_prev: f64,
}

impl Dopri5 {
    pub fn new(t0: f64, y0: Vec<f64>, opts: OdeOptions) -> Self {
        let n = y0.len();
        Dopri5 { t: t0, y: y0, h: opts.h_init, opts, steps: 0, k1: vec![0.0; n], fsal_valid: false, err_prev: 1e-4 }
    }

    /// Take one accepted step of size at most `t_end − t` in the direction of
    /// `t_end`. Returns the size of the accepted step.
    pub fn step<F>(&mut self, f: &mut F, t_end: f64) -> Result<f64>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = self.y.len();
        let dir = if t_end >= self.t { 1.0 } else { -1.0 };
        if !self.fsal_valid {
            f(self.t, &self.y, &mut self.k1);
            self.fsal_valid = true;
        }
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::IntegrationFailure { t: self.t, reason: "step budget exhausted".into() });
            }
            let remaining = (t_end - self.t).abs();
            let mut h = self.h.abs().min(self.opts.h_max).min(remaining);
            if h < self.opts.h_min && h < remaining {
                return Err(Error::IntegrationFailure { t: self.t, reason: format!("step size underflow (h = {h:.3e})") });
            }
            if h == 0.0 {
                return Ok(0.0);
            }
            h *= dir;
            let t = self.t;
            let y = &self.y;
            let k1 = &self.k1;
            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, &tmp, &mut k4);
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, &tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, &tmp, &mut k6);
            for i in 0..n {
                y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t + h, &y_new, &mut k7);
            let mut err = 0.0;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            self.steps += 1;
            if !err.is_finite() {
                self.h = h.abs() * 0.1;
                continue;
            }
            if err <= 1.0 {
                // PI controller (Hairer–Wanner, beta = 0.04)
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.17) * self.err_prev.powf(0.04)).clamp(0.2, 5.0) };
                self.err_prev = err.max(1e-4);
                self.t += h;
                std::mem::swap(&mut self.y, &mut y_new);
                std::mem::swap(&mut self.k1, &mut k7);
                self.h = h.abs() * fac;
                return Ok(h);
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            self.h = h.abs() * fac;
        }
    }

    /// Integrate until `t_end`.
    pub fn integrate_to<F>(&mut self, f: &mut F, t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        while (t_end - self.t).abs() > 1e-15 * (1.0 + t_end.abs()) {
            self.step(f, t_end)?;
        }
        self.t = t_end;
        Ok(())
    }

    /// Restart the stepper from a modified state (e.g. after a projection).
    pub fn reset_state(&mut self, y: Vec<f64>) {
        self.y = y;
        self.fsal_valid = false;
    }
}

/// Classical RK4 with `steps` uniform steps from `t0` to `t1`.
pub fn rk4_fixed<F>(f: &mut F, t0: f64, t1: f64, y0: &[f64], steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        f(t, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dopri_solves_harmonic_oscillator() {
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut s = Dopri5::new(0.0, vec![1.0, 0.0], OdeOptions::with_tol(1e-12));
        s.integrate_to(&mut f, 10.0).unwrap();
        assert!((s.y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((s.y[1] + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn dopri_integrates_backwards() {
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0];
        let mut s = Dopri5::new(1.0, vec![1.0], OdeOptions::with_tol(1e-12));
        s.integrate_to(&mut f, 0.0).unwrap();
        assert!((s.y[0] - (-1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rk4_has_fourth_order_error() {
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0];
        let e1 = (rk4_fixed(&mut f, 0.0, 1.0, &[1.0], 10)[0] - 1f64.exp()).abs();
        let e2 = (rk4_fixed(&mut f, 0.0, 1.0, &[1.0], 20)[0] - 1f64.exp()).abs();
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
