use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use epild::{
    default_t_grid, eta_boundary_problem, extrapolate_vbar, vbar, QpResult, DEFAULT_SEGMENTS,
};
use serde::Serialize;

use crate::config::{resolve, resolve_seed, Config};
use crate::manifest::ManifestBuilder;
use crate::modelspec::{parse_vector, ModelArgs, ModelSpec};

#[derive(Debug, Args)]
pub struct QuasipotentialArgs {
    /// Boundary offsets, comma-separated, e.g. `0.02,0.01,0.005`.
    #[arg(long)]
    eta: Option<String>,

    /// Number of path segments.
    #[arg(long)]
    j: Option<usize>,

    /// Boundary samples per offset.
    #[arg(long)]
    boundary_samples: Option<usize>,

    /// Horizon grid, comma-separated.
    #[arg(long)]
    t_grid: Option<String>,

    /// Seed for optimizer multi-starts.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct QuasipotentialReport {
    results: Vec<QpResult>,
    extrapolated_vbar: f64,
    eta_slope: f64,
}

pub fn run(args: &QuasipotentialArgs, margs: &ModelArgs, cfg: &Config) -> Result<()> {
    const SECTION: &str = "quasipotential";
    let spec = ModelSpec::resolve(margs, cfg)?;
    let Some(params) = spec.sirs_params().copied() else {
        bail!("the quasipotential command targets the sirs model's shrunken domains");
    };
    let model = spec.build()?;
    let etas = parse_vector(&resolve(
        &args.eta,
        cfg,
        SECTION,
        "eta",
        "0.02,0.01,0.005".to_string(),
    )?)?;
    if etas.is_empty() {
        bail!("need at least one boundary offset");
    }
    let segments = resolve(&args.j, cfg, SECTION, "j", DEFAULT_SEGMENTS)?;
    let samples = resolve(&args.boundary_samples, cfg, SECTION, "boundary_samples", 9usize)?;
    let t_grid = match &args.t_grid {
        Some(g) => parse_vector(g)?,
        None => match cfg.get::<String>(SECTION, "t_grid")? {
            Some(g) => parse_vector(&g)?,
            None => default_t_grid(),
        },
    };
    let seed = resolve_seed(args.seed, cfg, SECTION)?;
    let out = resolve(&args.out, cfg, SECTION, "out", PathBuf::from("epild-out"))?;

    super::ensure_out_dir(&out)?;
    let mut manifest = ManifestBuilder::new("quasipotential", seed, &model);
    manifest
        .setting("eta", format!("{etas:?}"))
        .setting("j", segments)
        .setting("boundary_samples", samples)
        .setting("t_grid", format!("{t_grid:?}"))
        .setting("out", out.display());

    let mut results = Vec::new();
    let mut csv = String::from("eta,value,horizon,iterations,converged,exit_z2\n");
    for &eta in &etas {
        let problem = eta_boundary_problem(&params, eta)?;
        let mut res = vbar(&problem, segments, &t_grid, samples, seed)?;
        res.eta = eta;
        let z_exit = res.path.end()[1];
        println!(
            "eta={eta}: vbar_eta={} (T={}, exit point z2={z_exit}, iterations={}, converged={})",
            res.value, res.horizon, res.iterations, res.converged
        );
        let _ = writeln!(
            csv,
            "{eta},{},{},{},{},{z_exit}",
            res.value,
            res.horizon,
            res.iterations,
            u8::from(res.converged)
        );
        results.push(res);
    }
    let pairs: Vec<(f64, f64)> = results.iter().map(|r| (r.eta, r.value)).collect();
    let (v0, slope) = if pairs.len() >= 2 {
        extrapolate_vbar(&pairs)?
    } else {
        (pairs[0].1, 0.0)
    };
    println!("extrapolated vbar (eta -> 0): {v0}");

    let csv_path = out.join("vbar.csv");
    super::write_file(&csv_path, &csv)?;
    manifest.output(&csv_path);

    let report = QuasipotentialReport { results, extrapolated_vbar: v0, eta_slope: slope };
    let json_path = out.join("quasipotential.json");
    let json = serde_json::to_string_pretty(&report).context("serializing report")?;
    super::write_file(&json_path, &(json + "\n"))?;
    manifest.output(&json_path);
    manifest.write(&out)?;
    Ok(())
}
