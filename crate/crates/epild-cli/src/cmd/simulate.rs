use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use epild::{grid_snap, simulate_ensemble, SimConfig};

use crate::config::{resolve, resolve_required, resolve_seed, Config};
use crate::manifest::ManifestBuilder;
use crate::modelspec::{ModelArgs, ModelSpec};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Population size N.
    #[arg(long)]
    n: Option<u64>,

    /// Initial state: `endemic` or comma-separated coordinates. Snapped to
    /// the 1/N grid.
    #[arg(long)]
    x0: Option<String>,

    /// Time horizon.
    #[arg(long)]
    t: Option<f64>,

    /// Number of replicas.
    #[arg(long)]
    replicas: Option<u32>,

    /// Master seed (fallback: config, then EPILD_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,

    /// Per-replica jump cap.
    #[arg(long)]
    max_jumps: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: &SimulateArgs, margs: &ModelArgs, cfg: &Config) -> Result<()> {
    const SECTION: &str = "simulate";
    let spec = ModelSpec::resolve(margs, cfg)?;
    let model = spec.build()?;
    let n = resolve_required(&args.n, cfg, SECTION, "n")?;
    let t = resolve_required(&args.t, cfg, SECTION, "t")?;
    let x0_spec = resolve(&args.x0, cfg, SECTION, "x0", "endemic".to_string())?;
    let replicas = resolve(&args.replicas, cfg, SECTION, "replicas", 1u32)?;
    let seed = resolve_seed(args.seed, cfg, SECTION)?;
    let max_jumps = resolve(&args.max_jumps, cfg, SECTION, "max_jumps", 10_000_000u64)?;
    let out = resolve(&args.out, cfg, SECTION, "out", PathBuf::from("epild-out"))?;

    let x0 = grid_snap(&model, &spec.initial_state(&x0_spec)?, n)?;
    let sim_cfg = SimConfig { t_max: t, max_jumps, seed, replicas };

    super::ensure_out_dir(&out)?;
    let mut manifest = ManifestBuilder::new("simulate", seed, &model);
    manifest
        .setting("n", n)
        .setting("t", t)
        .setting("x0", &x0_spec)
        .setting("x0_resolved", format!("{x0:?}"))
        .setting("replicas", replicas)
        .setting("max_jumps", max_jumps)
        .setting("out", out.display());

    let trajectories = simulate_ensemble(&model, n, &x0, &sim_cfg)?;

    let mut summary = String::from("replica,jumps,censored,t_end");
    for i in 1..=model.dim() {
        let _ = write!(summary, ",x_final_{i}");
    }
    summary.push('\n');
    for (i, traj) in trajectories.iter().enumerate() {
        let path = out.join(format!("traj_{i:05}.csv"));
        let mut buf = Vec::new();
        traj.write_csv(&model, &mut buf)
            .context("formatting trajectory CSV")?;
        std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        manifest.output(&path);
        let _ = write!(
            summary,
            "{i},{},{},{}",
            traj.n_jumps(),
            u8::from(traj.censored),
            traj.end_time
        );
        for v in traj.final_state(&model) {
            let _ = write!(summary, ",{v}");
        }
        summary.push('\n');
    }
    let summary_path = out.join("summary.csv");
    super::write_file(&summary_path, &summary)?;
    manifest.output(&summary_path);
    let manifest_path = manifest.write(&out)?;

    println!(
        "simulated {} replica(s) of {} at N={n} over [0,{t}]; outputs in {} (manifest {})",
        replicas,
        model.id(),
        out.display(),
        manifest_path.display()
    );
    Ok(())
}
