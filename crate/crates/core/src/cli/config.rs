use crate::clifford::{TestSection, Twist};
use crate::error::{Error, Result};
use crate::geometry::{BumpProfile, MetricFamily, WarpProfile};
use crate::spectral::{Assembly, ContourSpec, GridSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Metric family as written in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub family: String,
    pub dimension: usize,
    #[serde(default)]
    pub params: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BumpParams {
    amplitude: f64,
    #[serde(default = "one")]
    width: f64,
    #[serde(default = "compact")]
    profile: BumpProfile,
}

fn one() -> f64 {
    1.0
}

fn compact() -> BumpProfile {
    BumpProfile::Compact
}

impl MetricSpec {
    pub fn build(&self) -> Result<MetricFamily> {
        let params = if self.params.is_null() { Value::Object(Default::default()) } else { self.params.clone() };
        let bad = |e: serde_json::Error| Error::Config(format!("metric.params: {e}"));
        match self.family.as_str() {
            "minkowski" => MetricFamily::minkowski(self.dimension),
            "conformal_bump" => {
                let p: BumpParams = serde_json::from_value(params).map_err(bad)?;
                MetricFamily::conformal_bump(self.dimension, p.amplitude, p.width, p.profile)
            }
            "warped" => {
                let w: WarpProfile = serde_json::from_value(params).map_err(bad)?;
                MetricFamily::warped(self.dimension, w)
            }
            other => Err(Error::Config(format!("metric.family: unknown family \"{other}\" (expected minkowski, conformal_bump or warped)"))),
        }
    }
}

/// Twist as written in the config file: `{"type": "u1", "potential":
/// "affine", "params": {"a": [...], "b": [[...]]}}` or
/// `{"type": "u1", "potential": "constant_field", "params": {"strength": s}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub potential: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliffordSpec {
    #[serde(default)]
    pub twist: Option<TwistSpec>,
}

impl CliffordSpec {
    pub fn build(&self, n: usize) -> Result<Twist> {
        let Some(t) = &self.twist else { return Ok(Twist::None) };
        if t.kind != "u1" {
            return Err(Error::Config(format!("clifford.twist.type: only \"u1\" is supported (got \"{}\")", t.kind)));
        }
        let bad = |e: serde_json::Error| Error::Config(format!("clifford.twist.params: {e}"));
        let twist = match t.potential.as_str() {
            "affine" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct Affine {
                    a: Vec<f64>,
                    b: Vec<Vec<f64>>,
                }
                let p: Affine = serde_json::from_value(t.params.clone()).map_err(bad)?;
                Twist::U1 { a: p.a, b: p.b }
            }
            "constant_field" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct Constant {
                    strength: f64,
                }
                let p: Constant = serde_json::from_value(t.params.clone()).map_err(bad)?;
                Twist::constant_field(n, p.strength)
            }
            other => return Err(Error::Config(format!("clifford.twist.potential: unknown potential \"{other}\""))),
        };
        twist.validate(n)?;
        Ok(twist)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureParams {
    /// Evaluation points; a line through the origin along x₁ when empty.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_fd_step")]
    pub step: f64,
}

fn default_fd_step() -> f64 {
    1e-3
}

impl Default for CurvatureParams {
    fn default() -> Self {
        CurvatureParams { points: Vec::new(), step: default_fd_step() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HadamardParams {
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_hadamard_step")]
    pub step: f64,
    /// ε used to evaluate the residue normalizations (n = 4 only).
    #[serde(default = "default_residue_epsilon")]
    pub residue_epsilon: f64,
}

fn default_hadamard_step() -> f64 {
    0.05
}

fn default_residue_epsilon() -> f64 {
    1.0
}

impl Default for HadamardParams {
    fn default() -> Self {
        HadamardParams { x0: None, step: default_hadamard_step(), residue_epsilon: default_residue_epsilon() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_tmax")]
    pub tmax: f64,
    #[serde(default = "default_tol_dyn")]
    pub tol_dyn: f64,
    /// Number of seeds whose trajectories are written as CSV.
    #[serde(default = "default_dump")]
    pub dump: usize,
}

fn default_seeds() -> usize {
    200
}

fn default_tmax() -> f64 {
    200.0
}

fn default_tol_dyn() -> f64 {
    crate::dynamics::TOL_DYN
}

fn default_dump() -> usize {
    4
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { seeds: default_seeds(), tmax: default_tmax(), tol_dyn: default_tol_dyn(), dump: default_dump() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssembleParams {
    #[serde(default = "dirac_squared")]
    pub assembly: Assembly,
    /// Power iterations for the adjoint-defect estimate.
    #[serde(default = "default_defect_iter")]
    pub defect_iterations: usize,
}

fn dirac_squared() -> Assembly {
    Assembly::DiracSquared
}

fn default_defect_iter() -> usize {
    60
}

impl Default for AssembleParams {
    fn default() -> Self {
        AssembleParams { assembly: dirac_squared(), defect_iterations: default_defect_iter() }
    }
}

/// Complex number written as `[re, im]` or a bare real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cplx {
    Real(f64),
    Pair([f64; 2]),
}

impl Cplx {
    pub fn value(self) -> crate::special::C64 {
        match self {
            Cplx::Real(r) => crate::special::C64::new(r, 0.0),
            Cplx::Pair([r, i]) => crate::special::C64::new(r, i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams {
    #[serde(default = "default_alpha")]
    pub alpha: Cplx,
    /// Diagonal points; the origin when empty.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

fn default_alpha() -> Cplx {
    Cplx::Real(1.0)
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams { alpha: default_alpha(), points: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaParams {
    /// Explicit α values; the sweep below is used when empty.
    #[serde(default)]
    pub alphas: Vec<Cplx>,
    #[serde(default = "default_sweep")]
    pub re_range: [f64; 2],
    #[serde(default = "default_sweep_count")]
    pub count: usize,
    #[serde(default)]
    pub im: f64,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

fn default_sweep() -> [f64; 2] {
    [0.2, 6.0]
}

fn default_sweep_count() -> usize {
    30
}

impl Default for ZetaParams {
    fn default() -> Self {
        ZetaParams { alphas: Vec::new(), re_range: default_sweep(), count: default_sweep_count(), im: 0.0, points: Vec::new() }
    }
}

impl ZetaParams {
    pub fn alpha_list(&self) -> Vec<crate::special::C64> {
        if !self.alphas.is_empty() {
            return self.alphas.iter().map(|a| a.value()).collect();
        }
        let [a, b] = self.re_range;
        let k = self.count.max(1);
        (0..k)
            .map(|j| {
                let t = if k == 1 { 0.0 } else { j as f64 / (k - 1) as f64 };
                crate::special::C64::new(a + t * (b - a), self.im)
            })
            .collect()
    }
}

/// One planted block `[re, im, size]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedBlock {
    pub eigenvalue: Cplx,
    #[serde(default = "one_usize")]
    pub size: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguityParams {
    /// Planted Jordan structure of the test matrix.
    pub blocks: Vec<PlantedBlock>,
    /// Size of the random background spectrum in the strip.
    #[serde(default = "default_background")]
    pub background: usize,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    /// Eigenvalues enclosed by the second contour.
    pub enclose: Vec<Cplx>,
    #[serde(default = "default_enclose_radius")]
    pub radius: f64,
    #[serde(default = "default_alpha")]
    pub alpha: Cplx,
}

fn default_background() -> usize {
    40
}

fn default_coupling() -> f64 {
    0.5
}

fn default_enclose_radius() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlcheckParams {
    /// Node counts per side; successive values should double.
    #[serde(default = "default_bl_m")]
    pub m: Vec<usize>,
    #[serde(default = "default_bl_l")]
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(default = "default_section")]
    pub section: TestSection,
}

fn default_bl_m() -> Vec<usize> {
    vec![64, 128, 256]
}

fn default_bl_l() -> f64 {
    2.0
}

fn default_section() -> TestSection {
    TestSection::GaussianPolynomial { center: vec![0.1, -0.05], width: 0.6 }
}

impl Default for BlcheckParams {
    fn default() -> Self {
        BlcheckParams { m: default_bl_m(), half_width: default_bl_l(), section: default_section() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaFlatParams {
    #[serde(default)]
    pub alphas: Vec<Cplx>,
    #[serde(default = "default_flat_range")]
    pub re_range: [f64; 2],
    #[serde(default = "default_sweep_count")]
    pub count: usize,
    #[serde(default)]
    pub im: f64,
    #[serde(default = "default_residue_epsilon")]
    pub epsilon: f64,
}

fn default_flat_range() -> [f64; 2] {
    [0.25, 4.25]
}

impl Default for ZetaFlatParams {
    fn default() -> Self {
        ZetaFlatParams { alphas: Vec::new(), re_range: default_flat_range(), count: 41, im: 0.1, epsilon: 1.0 }
    }
}

/// Full experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub metric: MetricSpec,
    #[serde(default)]
    pub clifford: CliffordSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub contour: Option<ContourSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub curvature: CurvatureParams,
    #[serde(default)]
    pub hadamard: HadamardParams,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub assemble: AssembleParams,
    #[serde(default)]
    pub power: PowerParams,
    #[serde(default)]
    pub zeta: ZetaParams,
    #[serde(default)]
    pub ambiguity: Option<AmbiguityParams>,
    #[serde(default)]
    pub blcheck: BlcheckParams,
    #[serde(default)]
    pub zeta_flat: ZetaFlatParams,
}

/// A configuration problem with the 1-based line it refers to.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config line {}, column {}: {}", self.line, self.column, self.message)
    }
}

/// Line and column of the first occurrence of `"key"` in the text, or (1, 1).
pub fn locate_key(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = line.find(&needle) {
            return (i + 1, c + 1);
        }
    }
    (1, 1)
}

impl ExperimentConfig {
    /// Parse and validate a config file's text.
    pub fn parse(text: &str) -> std::result::Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError { line: e.line().max(1), column: e.column().max(1), message: e.to_string() })?;
        cfg.validate().map_err(|(key, e)| {
            let (line, column) = locate_key(text, key);
            ConfigError { line, column, message: e.to_string() }
        })?;
        Ok(cfg)
    }

    /// Semantic checks; on failure returns the offending key.
    fn validate(&self) -> std::result::Result<(), (&'static str, Error)> {
        let family = self.metric.build().map_err(|e| ("metric", e))?;
        let n = family.dim();
        self.clifford.build(n).map_err(|e| ("clifford", e))?;
        if let Some(g) = &self.grid {
            if !(g.half_width > 0.0 && g.half_width.is_finite()) || g.m < 4 {
                return Err(("grid", Error::Config(format!("grid needs L > 0 and m ≥ 4 (got L = {}, m = {})", g.half_width, g.m))));
            }
        }
        if let Some(c) = &self.contour {
            crate::spectral::Contour::build(c, 1.0, (1.0, 1.0)).map_err(|e| ("contour", e))?;
        }
        let dim_ok = |pts: &[Vec<f64>]| pts.iter().all(|p| p.len() == n);
        if !dim_ok(&self.curvature.points) {
            return Err(("curvature", Error::Config(format!("curvature.points must have {n} coordinates"))));
        }
        if self.hadamard.x0.as_ref().is_some_and(|x| x.len() != n) {
            return Err(("hadamard", Error::Config(format!("hadamard.x0 must have {n} coordinates"))));
        }
        if !dim_ok(&self.power.points) || !dim_ok(&self.zeta.points) {
            return Err(("points", Error::Config(format!("diagonal points must have {n} coordinates"))));
        }
        if !(self.flow.tmax > 0.0 && self.flow.tol_dyn > 0.0) {
            return Err(("flow", Error::Config("flow needs tmax > 0 and tol_dyn > 0".into())));
        }
        if self.blcheck.m.len() < 2 {
            return Err(("blcheck", Error::Config("blcheck.m needs at least two resolutions".into())));
        }
        if let Some(a) = &self.ambiguity {
            if a.blocks.is_empty() || a.blocks.iter().any(|b| b.size == 0) {
                return Err(("ambiguity", Error::Config("ambiguity.blocks must be non-empty with positive sizes".into())));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<MetricFamily> {
        self.metric.build()
    }

    pub fn twist(&self) -> Result<Twist> {
        self.clifford.build(self.metric.dimension)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        self.grid.ok_or_else(|| Error::Config("this subcommand needs a \"grid\" section".into()))
    }

    pub fn contour(&self) -> ContourSpec {
        self.contour.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = r#"{
  "metric": {"family": "conformal_bump", "dimension": 2, "params": {"amplitude": 0.05, "width": 1.0}},
  "clifford": {"twist": {"type": "u1", "potential": "constant_field", "params": {"strength": 0.3}}},
  "grid": {"L": 4.0, "m": 16},
  "seed": 3
}"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.twist().unwrap(), Twist::constant_field(2, 0.3));
    }

    #[test]
    fn errors_carry_lines() {
        let missing = "{\n  \"seed\": 1\n}";
        let e = ExperimentConfig::parse(missing).unwrap_err();
        assert!(e.message.contains("metric"), "{e}");
        let bad = "{\n  \"seed\": 1,\n  \"metric\": {\"family\": \"minkowski\", \"dimension\": 3}\n}";
        let e = ExperimentConfig::parse(bad).unwrap_err();
        assert_eq!(e.line, 3, "{e}");
        let typo = "{\n  \"metric\": {\"family\": \"minkowski\", \"dimension\": 2},\n  \"grdi\": {}\n}";
        assert_eq!(ExperimentConfig::parse(typo).unwrap_err().line, 3);
    }
}
