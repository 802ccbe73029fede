use super::{c, CMat, CliffordRep};
use crate::error::{Error, Result};
use crate::geometry::{christoffel_at, eta, gram_schmidt_frame, MetricFamily};
use crate::special::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Spacing of the fourth-order differences of the vielbein.
const FRAME_STEP: f64 = 1e-3;

/// Twisting bundle. `U1` is the trivial line bundle with connection
/// potential A_μ(x) = i(a_μ + Σ_ν b_{μν}x^ν).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Twist {
    #[default]
    None,
    U1 {
        a: Vec<f64>,
        b: Vec<Vec<f64>>,
    },
}

impl Twist {
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Twist::U1 { a, b } = self {
            let ok = a.len() == n && b.len() == n && b.iter().all(|r| r.len() == n);
            let finite = a.iter().chain(b.iter().flatten()).all(|v| v.is_finite());
            if !ok || !finite {
                return Err(Error::Config(format!("u1 twist needs a finite {n}-vector a and {n}x{n} matrix b")));
            }
        }
        Ok(())
    }

    /// Constant-curvature twist with F_{01} = i·strength.
    pub fn constant_field(n: usize, strength: f64) -> Twist {
        let mut b = vec![vec![0.0; n]; n];
        b[1][0] = strength;
        Twist::U1 { a: vec![0.0; n], b }
    }

    pub fn potential(&self, x: &[f64]) -> Vec<C64> {
        match self {
            Twist::None => vec![C64::new(0.0, 0.0); x.len()],
            Twist::U1 { a, b } => (0..x.len()).map(|m| C64::new(0.0, a[m] + (0..x.len()).map(|v| b[m][v] * x[v]).sum::<f64>())).collect(),
        }
    }

    /// F_{μν} = ∂_μA_ν − ∂_νA_μ in coordinates.
    pub fn field_strength(&self, n: usize) -> DMatrix<C64> {
        match self {
            Twist::None => DMatrix::zeros(n, n),
            Twist::U1 { b, .. } => DMatrix::from_fn(n, n, |m, v| C64::new(0.0, b[v][m] - b[m][v])),
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self, Twist::None)
    }
}

/// Twisting curvature at a point.
#[derive(Clone, Debug)]
pub struct TwistCurvature {
    /// F_{μν} in coordinates.
    pub coordinate: DMatrix<C64>,
    /// F_{ab} = F(e_a, e_b) in the orthonormal frame.
    pub frame: DMatrix<C64>,
    /// Σ_{a<b} γ^aγ^b F_{ab}, the contraction appearing in Ð².
    pub clifford: CMat,
    /// Σ_{a<b} γ_aγ_b F_{ab}, the same sum with lowered gammas.
    pub clifford_lowered: CMat,
}

/// Connection data at a point in the Gram–Schmidt gauge.
#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub point: Vec<f64>,
    /// Column a holds e_a^μ.
    pub vielbein: DMatrix<f64>,
    /// Row a holds e^a_μ.
    pub coframe: DMatrix<f64>,
    /// ω_μ{}^a{}_b, one n×n matrix per coordinate direction μ.
    pub frame_connection: Vec<DMatrix<f64>>,
    /// Spin part of the connection, one N×N matrix per μ.
    pub omega: Vec<CMat>,
    /// Twist potential A_μ (purely imaginary).
    pub twist_potential: Vec<C64>,
    /// γ^μ = e_c^μ γ^c.
    pub gamma_upper: Vec<CMat>,
}

impl ConnectionData {
    /// Ω_μ = ω_μ + A_μ𝟙.
    pub fn connection(&self, m: usize) -> CMat {
        let mut out = self.omega[m].clone();
        for i in 0..out.nrows() {
            out[(i, i)] += self.twist_potential[m];
        }
        out
    }

    /// max |[ω_μ, γ_b] − ω_μ{}^a{}_b γ_a|.
    pub fn compatibility_residual(&self, rep: &CliffordRep) -> f64 {
        let n = rep.n;
        let mut worst: f64 = 0.0;
        for m in 0..n {
            for b in 0..n {
                let mut d = &self.omega[m] * &rep.gammas[b] - &rep.gammas[b] * &self.omega[m];
                for a in 0..n {
                    d -= &rep.gammas[a] * c(self.frame_connection[m][(a, b)], 0.0);
                }
                worst = worst.max(d.iter().map(|v| v.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// max |ω_μ*β + βω_μ|; β is constant in this gauge.
    pub fn metricity_residual(&self, rep: &CliffordRep) -> f64 {
        self.omega.iter().map(|w| (w.adjoint() * &rep.beta + &rep.beta * w).iter().map(|v| v.norm()).fold(0.0, f64::max)).fold(0.0, f64::max)
    }
}

fn frame_derivatives(family: &MetricFamily, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let n = family.dim();
    let frame_at = |y: &[f64]| -> Result<DMatrix<f64>> {
        let g = family.metric_at(y)?;
        gram_schmidt_frame(&g, y)
    };
    (0..n)
        .map(|m| {
            let shifted = |s: f64| {
                let mut y = x.to_vec();
                y[m] += s * FRAME_STEP;
                frame_at(&y)
            };
            let d1 = shifted(1.0)? - shifted(-1.0)?;
            let d2 = shifted(2.0)? - shifted(-2.0)?;
            Ok((d1 * 8.0 - d2) / (12.0 * FRAME_STEP))
        })
        .collect()
}

/// Vielbein, spin connection ω_μ = −¼ ω_{μab}γ^aγ^b and twist potential at x.
pub fn spin_connection(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, x: &[f64]) -> Result<ConnectionData> {
    let n = family.dim();
    if rep.n != n {
        return Err(Error::InvalidInput(format!("representation for n = {} used with a metric in n = {n}", rep.n)));
    }
    twist.validate(n)?;
    let g = family.metric_at(x)?;
    let e = gram_schmidt_frame(&g, x)?;
    let coframe = e.clone().try_inverse().ok_or_else(|| Error::SingularMetric { point: x.to_vec() })?;
    let de = frame_derivatives(family, x)?;
    let gam = christoffel_at(family, x)?;
    let mut frame_connection = Vec::with_capacity(n);
    let mut omega = Vec::with_capacity(n);
    let gup: Vec<CMat> = (0..n).map(|a| rep.gamma_upper(a)).collect();
    for m in 0..n {
        // ∇_μ e_b = (∂_μ e_b^ν + Γ^ν_{μλ} e_b^λ) ∂_ν
        let mut nab = de[m].clone();
        for b in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += gam[(v * n + m) * n + l] * e[(l, b)];
                }
                nab[(v, b)] += acc;
            }
        }
        let wm = &coframe * nab;
        let mut spin = CMat::zeros(rep.rank, rep.rank);
        for a in 0..n {
            for b in 0..n {
                let w_ab = eta(a) * wm[(a, b)];
                if w_ab != 0.0 {
                    spin += &gup[a] * &gup[b] * c(-0.25 * w_ab, 0.0);
                }
            }
        }
        frame_connection.push(wm);
        omega.push(spin);
    }
    let gamma_upper = (0..n)
        .map(|m| {
            let mut acc = CMat::zeros(rep.rank, rep.rank);
            for a in 0..n {
                acc += &gup[a] * c(e[(m, a)], 0.0);
            }
            acc
        })
        .collect();
    Ok(ConnectionData { point: x.to_vec(), vielbein: e, coframe, frame_connection, omega, twist_potential: twist.potential(x), gamma_upper })
}

/// Twisting curvature F and its Clifford contractions at x.
pub fn twisting_curvature(family: &MetricFamily, rep: &CliffordRep, twist: &Twist, x: &[f64]) -> Result<TwistCurvature> {
    let n = family.dim();
    twist.validate(n)?;
    let g = family.metric_at(x)?;
    let e = gram_schmidt_frame(&g, x)?;
    let coordinate = twist.field_strength(n);
    let ec = e.map(|v| C64::new(v, 0.0));
    let frame = ec.transpose() * &coordinate * &ec;
    let mut clifford = CMat::zeros(rep.rank, rep.rank);
    let mut clifford_lowered = CMat::zeros(rep.rank, rep.rank);
    for a in 0..n {
        for b in a + 1..n {
            clifford += rep.gamma_upper(a) * rep.gamma_upper(b) * frame[(a, b)];
            clifford_lowered += &rep.gammas[a] * &rep.gammas[b] * frame[(a, b)];
        }
    }
    Ok(TwistCurvature { coordinate, frame, clifford, clifford_lowered })
}
