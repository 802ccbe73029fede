//! Command-line front end: configuration files, subcommand dispatch and
//! run manifests.
//!
//! Exit codes are 0 on success, 2 for configuration errors and 3 for
//! numerical failures.

mod config;
mod run;

pub use config::{
    locate_key, AmbiguityParams, AssembleParams, BlcheckParams, CliffordSpec, ConfigError, Cplx, CurvatureParams, ExperimentConfig, FlowParams,
    HadamardParams, MetricSpec, PlantedBlock, PowerParams, TwistSpec, ZetaFlatParams, ZetaParams,
};
pub use run::{run, thread_cap, Artifact, RunSummary, Subcommand};

use clap::{Args, Parser};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lorentz-zeta",
    version,
    about = "Spectral zeta densities and Hadamard coefficients for Dirac-squared operators on perturbed Minkowski space"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: the config's "output", else out/<subcommand>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed, overriding the config's "seed".
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Curvature table along sample points.
    Curvature(Common),
    /// u₁ at a base point by Hadamard transport.
    Hadamard(Common),
    /// Radial sets and the non-trapping check.
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        tmax: Option<f64>,
        /// Metric family name, overriding metric.family.
        #[arg(long)]
        family: Option<String>,
    },
    /// Assemble the lattice operator and report its statistics.
    Assemble(Common),
    /// Diagonal of one complex power.
    Power {
        #[command(flatten)]
        common: Common,
        /// α as "re" or "re,im".
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        rtrunc: Option<f64>,
    },
    /// Sweep of the zeta density over α.
    Zeta(Common),
    /// Two-contour difference and its rank.
    Ambiguity(Common),
    /// Bochner–Lichnerowicz residual under refinement.
    Blcheck(Common),
    /// Closed-form flat zeta density over α.
    ZetaFlat(Common),
}

fn parse_alpha(s: &str) -> Option<Cplx> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [r] => r.parse().ok().map(Cplx::Real),
        [r, i] => Some(Cplx::Pair([r.parse().ok()?, i.parse().ok()?])),
        _ => None,
    }
}

/// Parsed invocation: the validated config, subcommand and output directory.
pub struct Invocation {
    pub config: ExperimentConfig,
    pub subcommand: Subcommand,
    pub out_dir: PathBuf,
}

/// Turn parsed arguments into an invocation; `Err` holds a message for
/// exit code 2.
pub fn resolve(cli: Cli) -> Result<Invocation, String> {
    let (common, sub) = match &cli.command {
        Command::Curvature(c) => (c, Subcommand::Curvature),
        Command::Hadamard(c) => (c, Subcommand::Hadamard),
        Command::Flow { common, .. } => (common, Subcommand::Flow),
        Command::Assemble(c) => (c, Subcommand::Assemble),
        Command::Power { common, .. } => (common, Subcommand::Power),
        Command::Zeta(c) => (c, Subcommand::Zeta),
        Command::Ambiguity(c) => (c, Subcommand::Ambiguity),
        Command::Blcheck(c) => (c, Subcommand::Blcheck),
        Command::ZetaFlat(c) => (c, Subcommand::ZetaFlat),
    };
    let path = common.config.display().to_string();
    let text = std::fs::read_to_string(&common.config).map_err(|e| format!("{path}: {e}"))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| format!("{path}: {e}"))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Flow { seeds, tmax, family, .. } => {
            if let Some(s) = seeds {
                cfg.flow.seeds = *s;
            }
            if let Some(t) = tmax {
                cfg.flow.tmax = *t;
            }
            if let Some(f) = family {
                cfg.metric.family = f.clone();
            }
        }
        Command::Power { alpha, epsilon, theta, rtrunc, .. } => {
            if let Some(a) = alpha {
                cfg.power.alpha = parse_alpha(a).ok_or_else(|| format!("--alpha: cannot parse \"{a}\" (expected re or re,im)"))?;
            }
            let mut spec = cfg.contour();
            if let Some(e) = epsilon {
                spec.epsilon = *e;
            }
            if let Some(t) = theta {
                spec.theta = *t;
            }
            if rtrunc.is_some() {
                spec.rtrunc = *rtrunc;
            }
            cfg.contour = Some(spec);
        }
        _ => {}
    }
    // re-check after command-line overrides, reporting against the command line
    let revalidated = serde_json::to_string_pretty(&cfg).expect("serializable config");
    let cfg = ExperimentConfig::parse(&revalidated).map_err(|e| format!("{path} with command-line overrides: {}", e.message))?;
    let out_dir = common.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out").join(sub.name()));
    Ok(Invocation { config: cfg, subcommand: sub, out_dir })
}

/// Full command-line entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let inv = match resolve(cli) {
        Ok(i) => i,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    if let Some(k) = thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match run(&inv.config, inv.subcommand, &inv.out_dir) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary.result).expect("serializable result"));
            for a in &summary.artifacts {
                eprintln!("wrote {} ({})", inv.out_dir.join(&a.file).display(), &a.sha256[..16]);
            }
            EXIT_OK
        }
        Err(e) => {
            let payload = serde_json::json!({ "error": e.to_string(), "detail": format!("{e:?}") });
            eprintln!("{payload}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_flag() {
        assert_eq!(parse_alpha("1.5"), Some(Cplx::Real(1.5)));
        assert_eq!(parse_alpha("-0.5, 2"), Some(Cplx::Pair([-0.5, 2.0])));
        assert_eq!(parse_alpha("x"), None);
    }
}
