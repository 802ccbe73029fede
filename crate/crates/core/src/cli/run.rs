use super::config::ExperimentConfig;
use crate::clifford::{bochner_lichnerowicz_residual, build_gamma, order_estimate, CliffordRep};
use crate::dynamics::{flow_integrate, nontrapping_check, trajectory_csv, FlowOptions, Terminal};
use crate::error::{Error, Result};
use crate::geometry::{curvature_at, MetricFamily};
use crate::hadamard::{continuum_zeta_density, residue_normalizations, transport_u1_origin, Shift};
use crate::special::C64;
use crate::spectral::{
    adjoint_defect, assemble, contour_ambiguity, default_dist_min, flat_zeta_density, strip_spectrum, zeta_diagonal, Contour, LatticeOperator,
    PlantedMatrix, SolverOptions,
};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// The experiments the front end can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Curvature,
    Hadamard,
    Flow,
    Assemble,
    Power,
    Zeta,
    Ambiguity,
    Blcheck,
    ZetaFlat,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Curvature => "curvature",
            Subcommand::Hadamard => "hadamard",
            Subcommand::Flow => "flow",
            Subcommand::Assemble => "assemble",
            Subcommand::Power => "power",
            Subcommand::Zeta => "zeta",
            Subcommand::Ambiguity => "ambiguity",
            Subcommand::Blcheck => "blcheck",
            Subcommand::ZetaFlat => "zeta-flat",
        }
    }
}

/// An output file and its SHA-256.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub subcommand: Subcommand,
    pub out_dir: PathBuf,
    pub artifacts: Vec<Artifact>,
    /// Headline result, also written to the JSON output.
    pub result: Value,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.push(Artifact { file: name.to_string(), sha256: format!("{:x}", Sha256::digest(bytes)) });
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).expect("serializable value");
        s.push('\n');
        self.put(name, s.as_bytes())
    }
}

fn c2(z: C64) -> Value {
    json!([z.re, z.im])
}

fn cmat(m: &crate::clifford::CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| c2(m[(i, j)])).collect())).collect())
}

fn csv_line(out: &mut String, fields: &[f64]) {
    let parts: Vec<String> = fields.iter().map(|v| format!("{v}")).collect();
    out.push_str(&parts.join(","));
    out.push('\n');
}

fn rep_for(family: &MetricFamily) -> Result<CliffordRep> {
    build_gamma(family.dim(), 1)
}

fn default_points(n: usize, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if points.is_empty() {
        vec![vec![0.0; n]]
    } else {
        points.to_vec()
    }
}

/// Worker count from LORENTZ_ZETA_THREADS, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("LORENTZ_ZETA_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&k| k > 0)
}

/// Run one subcommand, writing its outputs and `manifest.json` into `out_dir`.
pub fn run(cfg: &ExperimentConfig, sub: Subcommand, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut w = Writer { dir: out_dir.to_path_buf(), artifacts: Vec::new() };
    let result = match sub {
        Subcommand::Curvature => curvature(cfg, &mut w)?,
        Subcommand::Hadamard => hadamard(cfg, &mut w)?,
        Subcommand::Flow => flow(cfg, &mut w)?,
        Subcommand::Assemble => assemble_stats(cfg, &mut w)?,
        Subcommand::Power => power(cfg, &mut w)?,
        Subcommand::Zeta => zeta(cfg, &mut w)?,
        Subcommand::Ambiguity => ambiguity(cfg, &mut w)?,
        Subcommand::Blcheck => blcheck(cfg, &mut w)?,
        Subcommand::ZetaFlat => zeta_flat(cfg, &mut w)?,
    };
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": sub.name(),
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg).expect("serializable config"),
        "artifacts": serde_json::to_value(&w.artifacts).expect("serializable artifacts"),
    });
    w.json("manifest.json", &manifest)?;
    Ok(RunSummary { subcommand: sub, out_dir: out_dir.to_path_buf(), artifacts: w.artifacts, result })
}

fn curvature(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let family = cfg.family()?;
    let n = family.dim();
    let points = if cfg.curvature.points.is_empty() {
        (0..21)
            .map(|k| {
                let mut x = vec![0.0; n];
                x[1] = -2.0 + 0.2 * k as f64;
                x
            })
            .collect()
    } else {
        cfg.curvature.points.clone()
    };
    let mut csv = String::new();
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).chain(["R_g".into(), "sqrt_abs_det_g".into()]).collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    let (mut bianchi, mut sym, mut anti) = (0f64, 0f64, 0f64);
    for x in &points {
        let cd = curvature_at(&family, x, cfg.curvature.step)?;
        let mut row = x.clone();
        row.push(cd.scalar);
        row.push(cd.sqrt_det);
        csv_line(&mut csv, &row);
        bianchi = bianchi.max(cd.bianchi_residual());
        sym = sym.max(cd.christoffel_symmetry_residual());
        anti = anti.max(cd.riemann_antisymmetry_residual());
    }
    w.put("curvature.csv", csv.as_bytes())?;
    let summary = json!({
        "family": family.label(),
        "points": points.len(),
        "max_bianchi_residual": bianchi,
        "max_christoffel_symmetry_residual": sym,
        "max_riemann_antisymmetry_residual": anti,
    });
    w.json("curvature.json", &summary)?;
    Ok(summary)
}

fn hadamard(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let family = cfg.family()?;
    let n = family.dim();
    let twist = cfg.twist()?;
    let rep = rep_for(&family)?;
    let x0 = cfg.hadamard.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let report = transport_u1_origin(&family, &rep, &twist, &x0, cfg.hadamard.step)?;
    let mut out = json!({
        "x0": x0,
        "R_g": report.scalar_curvature,
        "u1_numeric": cmat(&report.u1_numeric),
        "u1_predicted": cmat(&report.u1_predicted),
        "rel_error": report.rel_error,
        "u1_predicted_lowered": cmat(&report.u1_predicted_lowered),
        "rel_error_lowered": report.rel_error_lowered,
        "richardson_estimate": report.richardson_estimate,
    });
    if n >= 4 {
        let r = residue_normalizations(n, &report.u1_numeric, cfg.hadamard.residue_epsilon)?;
        out["residue"] = json!({
            "transport": cmat(&r.transport),
            "alternative": cmat(&r.alternative),
            "oracle_per_unit": c2(r.oracle_per_unit),
            "transport_mismatch": r.transport_mismatch,
            "alternative_mismatch": r.alternative_mismatch,
        });
    }
    w.json("hadamard.json", &out)?;
    Ok(out)
}

fn flow(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let family = cfg.family()?;
    let p = &cfg.flow;
    let opts = FlowOptions { tol_dyn: p.tol_dyn, ..FlowOptions::default() };
    let report = nontrapping_check(&family, p.seeds, p.tmax, cfg.seed, opts)?;
    let count = |t: Terminal| report.seeds.iter().map(|s| (s.forward == t) as usize + (s.backward == t) as usize).sum::<usize>();
    let radial = |r: &crate::dynamics::RadialSetReport| {
        json!({
            "label": r.label,
            "certified": r.certified,
            "conditions": r.conditions,
            "beta": r.beta,
            "beta_l": r.beta_l,
            "beta_inf": r.beta_inf,
            "field_norm": r.field_norm,
        })
    };
    let out = json!({
        "family": family.label(),
        "seeds": p.seeds,
        "tmax": p.tmax,
        "tol_dyn": p.tol_dyn,
        "verdict": report.verdict,
        "terminals": {
            "converged_to_sink": count(Terminal::ConvergedToSink),
            "converged_to_source": count(Terminal::ConvergedToSource),
            "left_domain": count(Terminal::LeftDomain),
            "budget_exhausted": count(Terminal::BudgetExhausted),
        },
        "sink": radial(&report.sink),
        "source": radial(&report.source),
        "log": report.seeds,
    });
    w.json("flow.json", &out)?;
    for (k, s) in report.seeds.iter().take(p.dump).enumerate() {
        for (dir, t) in [("forward", p.tmax), ("backward", -p.tmax)] {
            let traj = flow_integrate(&family, &s.start, t, opts)?;
            w.put(&format!("trajectory_{k:03}_{dir}.csv"), trajectory_csv(&traj).as_bytes())?;
        }
    }
    Ok(json!({ "verdict": out["verdict"], "terminals": out["terminals"] }))
}

fn lattice(cfg: &ExperimentConfig) -> Result<LatticeOperator> {
    let family = cfg.family()?;
    let rep = rep_for(&family)?;
    assemble(&family, &rep, &cfg.twist()?, cfg.grid()?, cfg.assemble.assembly)
}

/// Bound on |Im λ| over the spectrum from the anti-Hermitian part.
fn im_bound(op: &LatticeOperator, seed: u64) -> f64 {
    0.55 * adjoint_defect(op, 60, seed).norm
}

fn assemble_stats(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let op = lattice(cfg)?;
    let defect = adjoint_defect(&op, cfg.assemble.defect_iterations, cfg.seed);
    let (smin, smax) = op.flat_symbol.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    let out = json!({
        "family": op.family.label(),
        "assembly": op.assembly,
        "n": op.n,
        "m": op.m,
        "L": op.half_width,
        "hx": op.hx,
        "fiber": op.fiber,
        "unknowns": op.dim(),
        "nnz": op.matrix.nnz(),
        "max_row_nnz": op.matrix.max_row_nnz(),
        "inf_norm": op.matrix.inf_norm(),
        "support_radius": op.support_radius,
        "flat_symbol_range": [smin, smax],
        "weighted_adjoint_defect": defect,
    });
    w.json("assemble.json", &out)?;
    Ok(out)
}

fn power(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let op = lattice(cfg)?;
    let spec = cfg.contour();
    let alpha = cfg.power.alpha.value();
    let points = default_points(op.n, &cfg.power.points);
    let bound = im_bound(&op, cfg.seed);
    let rep = zeta_diagonal(&op, &spec, &[alpha], &points, bound, SolverOptions::default())?;
    let flat = flat_zeta_density(&op, spec.epsilon, alpha)?;
    let samples: Vec<Value> = rep.samples.iter().map(|s| json!({ "x": s.x, "value": c2(s.value) })).collect();
    let out = json!({
        "alpha": c2(alpha),
        "contour": spec,
        "contour_nodes": rep.contour_nodes,
        "certified_distance": rep.certified_distance,
        "im_bound": bound,
        "samples": samples,
        "flat_torus_density": c2(flat),
    });
    w.json("power.json", &out)?;
    Ok(out)
}

fn zeta(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let op = lattice(cfg)?;
    let spec = cfg.contour();
    let alphas = cfg.zeta.alpha_list();
    let points = default_points(op.n, &cfg.zeta.points);
    let bound = im_bound(&op, cfg.seed);
    let rep = zeta_diagonal(&op, &spec, &alphas, &points, bound, SolverOptions::default())?;
    let mut csv = String::from("alpha_re,alpha_im");
    for i in 0..op.n {
        let _ = write!(csv, ",x{i}");
    }
    csv.push_str(",trace_re,trace_im\n");
    for s in &rep.samples {
        let mut row = vec![s.alpha.re, s.alpha.im];
        row.extend(&s.x);
        row.push(s.value.re);
        row.push(s.value.im);
        csv_line(&mut csv, &row);
    }
    w.put("zeta.csv", csv.as_bytes())?;
    let out = json!({ "samples": rep.samples.len(), "contour_nodes": rep.contour_nodes, "im_bound": bound });
    w.json("zeta.json", &out)?;
    Ok(out)
}

fn ambiguity(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let p = cfg.ambiguity.as_ref().ok_or_else(|| Error::Config("the ambiguity subcommand needs an \"ambiguity\" section".into()))?;
    let spec = cfg.contour();
    let mut blocks: Vec<(C64, usize)> = strip_spectrum(p.background, 3.0, 0.5, cfg.seed).into_iter().map(|l| (l, 1)).collect();
    blocks.extend(p.blocks.iter().map(|b| (b.eigenvalue.value(), b.size)));
    let planted = PlantedMatrix::with_blocks(blocks.clone(), p.coupling, cfg.seed.wrapping_add(1))?;
    let eigs = planted.eigenvalues();
    let scale = eigs.iter().map(|l| l.norm()).fold(1.0, f64::max);
    let alpha = p.alpha.value();
    let mut a = Contour::build(&spec, scale, (alpha.re, alpha.norm()))?;
    a.avoid(&eigs, default_dist_min(scale))?;
    let mut b = a.clone();
    let enclosed: Vec<C64> = p.enclose.iter().map(|z| z.value()).collect();
    for &lam in &enclosed {
        b.enclose(lam, p.radius)?;
    }
    let rep = contour_ambiguity(&planted.matrix, &a, &b, alpha)?;
    let expected: usize = blocks.iter().filter(|(l, _)| enclosed.iter().any(|e| (e - l).norm() < p.radius)).map(|b| b.1).sum();
    let mut oracle = crate::clifford::CMat::zeros(planted.dim(), planted.dim());
    for &lam in &enclosed {
        if eigs.iter().any(|l| (l - lam).norm() < p.radius) {
            oracle += planted.power_component(lam, spec.epsilon, alpha);
        }
    }
    let oracle_error = if oracle.norm() > 0.0 { (&rep.difference - &oracle).norm() / oracle.norm() } else { rep.difference.norm() };
    let out = json!({
        "alpha": c2(alpha),
        "dimension": planted.dim(),
        "enclosed": enclosed.iter().map(|z| c2(*z)).collect::<Vec<_>>(),
        "expected_rank": expected,
        "rank": rep.rank,
        "difference_norm": rep.norm,
        "reference_norm": rep.reference,
        "leading_singular_values": rep.singular_values.iter().take(8).collect::<Vec<_>>(),
        "projector_oracle_error": oracle_error,
        "bumps": a.bumps,
    });
    w.json("ambiguity.json", &out)?;
    Ok(out)
}

fn blcheck(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let family = cfg.family()?;
    let twist = cfg.twist()?;
    let rep = rep_for(&family)?;
    let p = &cfg.blcheck;
    let mut section = p.section.clone();
    if let crate::clifford::TestSection::GaussianPolynomial { center, .. } = &mut section {
        center.resize(family.dim(), 0.0);
    }
    let mut hx = Vec::new();
    let mut residual = Vec::new();
    let mut flipped = Vec::new();
    let mut lowered = Vec::new();
    for &m in &p.m {
        let r = bochner_lichnerowicz_residual(&family, &rep, &twist, &section, m, p.half_width)?;
        hx.push(r.hx);
        residual.push(r.residual);
        flipped.push(r.residual_flipped_scalar);
        lowered.push(r.residual_lowered_twist);
    }
    let out = json!({
        "hx": hx,
        "residual": residual,
        "order_estimate": order_estimate(&residual),
        "residual_flipped_scalar": flipped,
        "residual_lowered_twist": lowered,
    });
    w.json("blcheck.json", &out)?;
    Ok(out)
}

fn zeta_flat(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let n = cfg.family()?.dim();
    let p = &cfg.zeta_flat;
    let alphas: Vec<C64> = if p.alphas.is_empty() {
        let k = p.count.max(1);
        (0..k)
            .map(|j| {
                let t = if k == 1 { 0.0 } else { j as f64 / (k - 1) as f64 };
                C64::new(p.re_range[0] + t * (p.re_range[1] - p.re_range[0]), p.im)
            })
            .collect()
    } else {
        p.alphas.iter().map(|a| a.value()).collect()
    };
    let mut csv = String::from("alpha_re,alpha_im,value_re,value_im\n");
    let mut skipped = 0;
    for &a in &alphas {
        match continuum_zeta_density(n, a, p.epsilon, Shift::Minus) {
            Ok(v) => csv_line(&mut csv, &[a.re, a.im, v.re, v.im]),
            Err(Error::PoleProximity { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    w.put("zeta_flat.csv", csv.as_bytes())?;
    let out = json!({ "n": n, "epsilon": p.epsilon, "rows": alphas.len() - skipped, "skipped_near_poles": skipped });
    w.json("zeta_flat.json", &out)?;
    Ok(out)
}
