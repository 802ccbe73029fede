use super::{invert_metric, MetricFamily, MetricJet};
use crate::error::Result;
use nalgebra::DMatrix;

/// Source of metric derivatives for curvature evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Fourth-order central differences with the given spacing.
    FiniteDifference {
        step: f64,
    },
}

/// Curvature quantities at a point.
///
/// Index layout: `christoffel[(l * n + m) * n + v]` is Γ^l_{mv},
/// `christoffel_deriv[((k * n + l) * n + m) * n + v]` is ∂_k Γ^l_{mv},
/// `riemann[((r * n + s) * n + m) * n + v]` is R^r_{smv}.
#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub n: usize,
    pub point: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub inverse_metric: DMatrix<f64>,
    pub christoffel: Vec<f64>,
    pub christoffel_deriv: Vec<f64>,
    pub riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    pub sqrt_det: f64,
    /// ∂_μ log |g|^{1/2} = Γ^λ_{λμ}
    pub log_sqrt_det_grad: Vec<f64>,
}

impl CurvatureData {
    #[inline]
    pub fn gamma(&self, l: usize, m: usize, v: usize) -> f64 {
        let n = self.n;
        self.christoffel[(l * n + m) * n + v]
    }

    #[inline]
    pub fn dgamma(&self, k: usize, l: usize, m: usize, v: usize) -> f64 {
        let n = self.n;
        self.christoffel_deriv[((k * n + l) * n + m) * n + v]
    }

    #[inline]
    pub fn riem(&self, r: usize, s: usize, m: usize, v: usize) -> f64 {
        let n = self.n;
        self.riemann[((r * n + s) * n + m) * n + v]
    }

    /// Largest violation of Γ^l_{mv} = Γ^l_{vm}.
    pub fn christoffel_symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for m in 0..n {
                for v in 0..n {
                    worst = worst.max((self.gamma(l, m, v) - self.gamma(l, v, m)).abs());
                }
            }
        }
        worst
    }

    /// Largest violation of antisymmetry in the last two Riemann indices.
    pub fn riemann_antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for s in 0..n {
                for m in 0..n {
                    for v in 0..n {
                        worst = worst.max((self.riem(r, s, m, v) + self.riem(r, s, v, m)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest first-Bianchi residual R^r_{smv} + R^r_{mvs} + R^r_{vsm}.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for s in 0..n {
                for m in 0..n {
                    for v in 0..n {
                        let b = self.riem(r, s, m, v) + self.riem(r, m, v, s) + self.riem(r, v, s, m);
                        worst = worst.max(b.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Curvature from analytic metric derivatives when the family has them,
/// otherwise from fourth-order differences with spacing `step`.
pub fn curvature_at(family: &MetricFamily, x: &[f64], step: f64) -> Result<CurvatureData> {
    let mode = if family.has_analytic_derivatives() { DerivativeMode::Analytic } else { DerivativeMode::FiniteDifference { step } };
    curvature_at_with(family, x, mode)
}

pub fn curvature_at_with(family: &MetricFamily, x: &[f64], mode: DerivativeMode) -> Result<CurvatureData> {
    family.metric_at(x)?;
    let jet = match mode {
        DerivativeMode::Analytic => family.jet(x),
        DerivativeMode::FiniteDifference { step } => family.jet_fd(x, step),
    };
    from_jet(x, &jet)
}

/// Christoffel symbols only (cheaper path used by geodesic integration).
pub fn christoffel_at(family: &MetricFamily, x: &[f64]) -> Result<Vec<f64>> {
    let jet = family.jet(x);
    let ginv = invert_metric(&jet.g, x)?;
    Ok(christoffel_from(&jet, &ginv))
}

pub(crate) fn christoffel_from(jet: &MetricJet, ginv: &DMatrix<f64>) -> Vec<f64> {
    let n = jet.g.nrows();
    let mut gam = vec![0.0; n * n * n];
    for l in 0..n {
        for m in 0..n {
            for v in m..n {
                let mut acc = 0.0;
                for s in 0..n {
                    let gi = ginv[(l, s)];
                    if gi == 0.0 {
                        continue;
                    }
                    acc += gi * (jet.dg[m][(s, v)] + jet.dg[v][(s, m)] - jet.dg[s][(m, v)]);
                }
                gam[(l * n + m) * n + v] = 0.5 * acc;
                gam[(l * n + v) * n + m] = 0.5 * acc;
            }
        }
    }
    gam
}

/// Γ and ∂Γ at x from analytic derivatives.
pub fn connection_jet(family: &MetricFamily, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let jet = family.jet(x);
    let ginv = invert_metric(&jet.g, x)?;
    let gam = christoffel_from(&jet, &ginv);
    let dgam = christoffel_deriv_from(&jet, &ginv);
    Ok((gam, dgam))
}

fn christoffel_deriv_from(jet: &MetricJet, ginv: &DMatrix<f64>) -> Vec<f64> {
    let n = jet.g.nrows();
    // ∂_k g^{-1} = −g^{-1} (∂_k g) g^{-1}
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|k| -(ginv * &jet.dg[k] * ginv)).collect();
    let mut dgam = vec![0.0; n * n * n * n];
    for k in 0..n {
        for l in 0..n {
            for m in 0..n {
                for v in m..n {
                    let mut acc = 0.0;
                    for s in 0..n {
                        let first = jet.dg[m][(s, v)] + jet.dg[v][(s, m)] - jet.dg[s][(m, v)];
                        let second = jet.ddg[k * n + m][(s, v)] + jet.ddg[k * n + v][(s, m)] - jet.ddg[k * n + s][(m, v)];
                        acc += dginv[k][(l, s)] * first + ginv[(l, s)] * second;
                    }
                    dgam[((k * n + l) * n + m) * n + v] = 0.5 * acc;
                    dgam[((k * n + l) * n + v) * n + m] = 0.5 * acc;
                }
            }
        }
    }
    dgam
}

pub(crate) fn from_jet(x: &[f64], jet: &MetricJet) -> Result<CurvatureData> {
    let n = jet.g.nrows();
    let g = &jet.g;
    let ginv = invert_metric(g, x)?;
    let gam = christoffel_from(jet, &ginv);
    let dgam = christoffel_deriv_from(jet, &ginv);
    let gi = |l: usize, m: usize, v: usize| gam[(l * n + m) * n + v];
    let dgi = |k: usize, l: usize, m: usize, v: usize| dgam[((k * n + l) * n + m) * n + v];

    // R^r_{smv} = ∂_m Γ^r_{vs} − ∂_v Γ^r_{ms} + Γ^r_{ml} Γ^l_{vs} − Γ^r_{vl} Γ^l_{ms}
    let mut riem = vec![0.0; n * n * n * n];
    for r in 0..n {
        for s in 0..n {
            for m in 0..n {
                for v in 0..n {
                    let mut acc = dgi(m, r, v, s) - dgi(v, r, m, s);
                    for l in 0..n {
                        acc += gi(r, m, l) * gi(l, v, s) - gi(r, v, l) * gi(l, m, s);
                    }
                    riem[((r * n + s) * n + m) * n + v] = acc;
                }
            }
        }
    }
    let ricci = DMatrix::from_fn(n, n, |s, v| (0..n).map(|m| riem[((m * n + s) * n + m) * n + v]).sum());
    let mut scalar = 0.0;
    for s in 0..n {
        for v in 0..n {
            scalar += ginv[(s, v)] * ricci[(s, v)];
        }
    }
    let sqrt_det = g.determinant().abs().sqrt();
    let log_sqrt_det_grad = (0..n).map(|m| (0..n).map(|l| gi(l, l, m)).sum()).collect();
    Ok(CurvatureData {
        n,
        point: x.to_vec(),
        metric: g.clone(),
        inverse_metric: ginv,
        christoffel: gam,
        christoffel_deriv: dgam,
        riemann: riem,
        ricci,
        scalar,
        sqrt_det,
        log_sqrt_det_grad,
    })
}
