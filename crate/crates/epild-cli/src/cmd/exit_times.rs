use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use epild::{
    eta_boundary_problem, extinction_problem, fit_exit_scaling, grid_snap, SimConfig,
};
use serde::Serialize;

use crate::config::{resolve, resolve_seed, Config};
use crate::manifest::ManifestBuilder;
use crate::modelspec::{ModelArgs, ModelSpec};

#[derive(Debug, Args)]
pub struct ExitTimesArgs {
    /// Population sizes, comma-separated, e.g. `20,30,40,50`.
    #[arg(long)]
    n_list: Option<String>,

    /// Replicas per population size.
    #[arg(long)]
    replicas: Option<u32>,

    /// Per-replica horizon; replicas that neither exit nor absorb by then
    /// are censored.
    #[arg(long)]
    t_max: Option<f64>,

    /// Exit through the shrunken boundary {z1 = eta} instead of extinction
    /// at {z1 = 0}.
    #[arg(long)]
    eta: Option<f64>,

    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Per-replica jump cap.
    #[arg(long)]
    max_jumps: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ExitFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

pub fn run(args: &ExitTimesArgs, margs: &ModelArgs, cfg: &Config) -> Result<()> {
    const SECTION: &str = "exit-times";
    let spec = ModelSpec::resolve(margs, cfg)?;
    let Some(params) = spec.sirs_params().copied() else {
        bail!("the exit-times command targets the sirs model");
    };
    let n_spec = resolve(&args.n_list, cfg, SECTION, "n_list", "20,30,40,50".to_string())?;
    let n_list: Vec<u64> = n_spec
        .split(',')
        .map(|tok| tok.trim().parse::<u64>().context("bad population size"))
        .collect::<Result<_>>()?;
    if n_list.is_empty() {
        bail!("need at least one population size");
    }
    let replicas = resolve(&args.replicas, cfg, SECTION, "replicas", 600u32)?;
    let t_max = resolve(&args.t_max, cfg, SECTION, "t_max", 1e5f64)?;
    let seed = resolve_seed(args.seed, cfg, SECTION)?;
    let max_jumps = resolve(&args.max_jumps, cfg, SECTION, "max_jumps", 10_000_000u64)?;
    let out = resolve(&args.out, cfg, SECTION, "out", PathBuf::from("epild-out"))?;
    let eta = match args.eta {
        Some(e) => Some(e),
        None => cfg.get::<f64>(SECTION, "eta")?,
    };

    let problem = match eta {
        Some(e) => eta_boundary_problem(&params, e)?,
        None => extinction_problem(&params)?,
    };
    let model = &problem.model;

    super::ensure_out_dir(&out)?;
    let mut manifest = ManifestBuilder::new("exit-times", seed, model);
    manifest
        .setting("n_list", &n_spec)
        .setting("replicas", replicas)
        .setting("t_max", t_max)
        .setting("max_jumps", max_jumps)
        .setting("eta", eta.map_or("0 (extinction)".to_string(), |e| e.to_string()))
        .setting("out", out.display());

    let mut exits_csv = String::from("replica,N,tau,censored\n");
    let mut summary_csv = String::from("N,mean,se,exits,censored\n");
    let mut fit_samples: Vec<(f64, f64, f64)> = Vec::new();
    for &n in &n_list {
        let sim_cfg = SimConfig { t_max, max_jumps, seed, replicas };
        let x0 = grid_snap(model, problem.equilibrium(), n)?;
        let outcomes =
            epild::exit_time_ensemble(model, n, &x0, problem.domain_pred(), &sim_cfg)?;
        let mut times = Vec::new();
        for (i, o) in outcomes.iter().enumerate() {
            let _ = writeln!(
                exits_csv,
                "{i},{n},{},{}",
                o.time(),
                u8::from(o.is_censored())
            );
            if !o.is_censored() {
                times.push(o.time());
            }
        }
        let censored = outcomes.len() - times.len();
        let mean = epild::stats::mean(&times);
        let se = epild::stats::standard_error(&times);
        println!(
            "N={n}: {} exits ({censored} censored), mean tau = {mean} (se {se})",
            times.len()
        );
        let _ = writeln!(summary_csv, "{n},{mean},{se},{},{censored}", times.len());
        if !times.is_empty() {
            fit_samples.push((n as f64, mean, se));
        }
    }

    let exits_path = out.join("exits.csv");
    super::write_file(&exits_path, &exits_csv)?;
    manifest.output(&exits_path);
    let summary_path = out.join("summary.csv");
    super::write_file(&summary_path, &summary_csv)?;
    manifest.output(&summary_path);

    if fit_samples.len() >= 3 {
        let (slope, intercept, r2) = fit_exit_scaling(&fit_samples)?;
        println!("log-mean fit: slope = {slope}, intercept = {intercept}, r^2 = {r2}");
        let fit = ExitFit { slope, intercept, r_squared: r2 };
        let fit_path = out.join("fit.json");
        let json = serde_json::to_string_pretty(&fit).context("serializing fit")?;
        super::write_file(&fit_path, &(json + "\n"))?;
        manifest.output(&fit_path);
    } else {
        println!("fewer than three population sizes with exits; skipping the scaling fit");
    }
    manifest.write(&out)?;
    Ok(())
}
