//! Drive a subcommand from an in-memory configuration, as the command-line
//! program does, and print the manifest entries.

use lorentz_zeta::cli::{run, ExperimentConfig, Subcommand};

fn main() {
    let text = r#"{
  "metric": {"family": "conformal_bump", "dimension": 2, "params": {"amplitude": 0.05}},
  "seed": 3,
  "flow": {"seeds": 20, "tmax": 200.0, "dump": 1}
}"#;
    let cfg = ExperimentConfig::parse(text).unwrap_or_else(|e| panic!("{e}"));
    let dir = std::env::temp_dir().join("lorentz-zeta-example");
    let summary = run(&cfg, Subcommand::Flow, &dir).expect("flow run");
    println!("{}", summary.result);
    for a in &summary.artifacts {
        println!("{}  {}", a.sha256, a.file);
    }
}
