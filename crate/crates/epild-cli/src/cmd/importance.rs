use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use epild::{
    grid_snap, simulate_ensemble, tilted_ensemble, JumpModel, SimConfig, Trajectory,
};

use crate::config::{resolve, resolve_required, resolve_seed, Config};
use crate::manifest::ManifestBuilder;
use crate::modelspec::{ModelArgs, ModelSpec};

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Population size N.
    #[arg(long)]
    n: Option<u64>,

    /// Initial state (`endemic` or coordinates); snapped to the grid.
    #[arg(long)]
    x0: Option<String>,

    /// Time horizon.
    #[arg(long)]
    t: Option<f64>,

    /// Event: `jumps-ge` (at least `--threshold` jumps) or `extinct`
    /// (first coordinate absorbed at zero by the horizon).
    #[arg(long)]
    event: Option<String>,

    /// Jump-count threshold for `--event jumps-ge`.
    #[arg(long)]
    threshold: Option<u64>,

    /// Tilted constant rate (const model).
    #[arg(long)]
    tilt_rate: Option<f64>,

    /// Tilted SIRS infection rate.
    #[arg(long)]
    tilt_beta: Option<f64>,

    /// Tilted SIRS recovery rate.
    #[arg(long)]
    tilt_gamma: Option<f64>,

    /// Tilted SIRS immunity-loss rate.
    #[arg(long)]
    tilt_nu: Option<f64>,

    /// Replicas for the direct estimator.
    #[arg(long)]
    replicas_direct: Option<u32>,

    /// Replicas for the tilted estimator.
    #[arg(long)]
    replicas_tilted: Option<u32>,

    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn tilted_model(spec: &ModelSpec, args: &ImportanceArgs, cfg: &Config) -> Result<JumpModel> {
    const SECTION: &str = "importance";
    match spec {
        ModelSpec::Const(_) => {
            let rate = resolve_required(&args.tilt_rate, cfg, SECTION, "tilt_rate")?;
            Ok(epild::constant_rate_1d(rate)?)
        }
        ModelSpec::Sirs(p) => {
            let beta = resolve(&args.tilt_beta, cfg, SECTION, "tilt_beta", p.beta)?;
            let gamma = resolve(&args.tilt_gamma, cfg, SECTION, "tilt_gamma", p.gamma)?;
            let nu = resolve(&args.tilt_nu, cfg, SECTION, "tilt_nu", p.nu)?;
            Ok(epild::sirs_model(&epild::SirsParams::new(beta, gamma, nu)?)?)
        }
        _ => bail!("importance sampling is wired for the const and sirs models"),
    }
}

pub fn run(args: &ImportanceArgs, margs: &ModelArgs, cfg: &Config) -> Result<()> {
    const SECTION: &str = "importance";
    let spec = ModelSpec::resolve(margs, cfg)?;
    let model_p = spec.build()?;
    let model_q = tilted_model(&spec, args, cfg)?;
    let n = resolve(&args.n, cfg, SECTION, "n", 50u64)?;
    let t = resolve(&args.t, cfg, SECTION, "t", 1.0f64)?;
    let x0_spec = resolve(
        &args.x0,
        cfg,
        SECTION,
        "x0",
        if spec.sirs_params().is_some() { "endemic".to_string() } else { "0".to_string() },
    )?;
    let event = resolve(&args.event, cfg, SECTION, "event", "jumps-ge".to_string())?;
    let threshold = resolve(&args.threshold, cfg, SECTION, "threshold", 70u64)?;
    let replicas_direct = resolve(&args.replicas_direct, cfg, SECTION, "replicas_direct", 100_000u32)?;
    let replicas_tilted = resolve(&args.replicas_tilted, cfg, SECTION, "replicas_tilted", 10_000u32)?;
    let seed = resolve_seed(args.seed, cfg, SECTION)?;
    let out = resolve(&args.out, cfg, SECTION, "out", PathBuf::from("epild-out"))?;

    let x0 = grid_snap(&model_p, &spec.initial_state(&x0_spec)?, n)?;
    let indicator: Box<dyn Fn(&Trajectory) -> f64 + Sync> = match event.as_str() {
        "jumps-ge" => Box::new(move |traj| f64::from(traj.n_jumps() as u64 >= threshold)),
        "extinct" => {
            let model = model_p.clone();
            Box::new(move |traj| f64::from(traj.final_state(&model)[0] <= 0.0))
        }
        other => bail!("unknown event `{other}` (expected jumps-ge or extinct)"),
    };

    super::ensure_out_dir(&out)?;
    let mut manifest = ManifestBuilder::new("importance", seed, &model_p);
    manifest
        .setting("n", n)
        .setting("t", t)
        .setting("x0", &x0_spec)
        .setting("event", &event)
        .setting("threshold", threshold)
        .setting("tilt_model", model_q.id())
        .setting("replicas_direct", replicas_direct)
        .setting("replicas_tilted", replicas_tilted)
        .setting("out", out.display());

    // Direct estimator.
    let cfg_direct = SimConfig { t_max: t, max_jumps: 10_000_000, seed, replicas: replicas_direct };
    let direct: Vec<f64> = simulate_ensemble(&model_p, n, &x0, &cfg_direct)?
        .iter()
        .map(&indicator)
        .collect();
    let direct_mean = epild::stats::mean(&direct);
    let direct_se = epild::stats::standard_error(&direct);

    // Tilted estimator: simulate under Q, weight by the inverse likelihood
    // ratio.
    let cfg_tilted = SimConfig {
        t_max: t,
        max_jumps: 10_000_000,
        seed: seed ^ 0x74696c74,
        replicas: replicas_tilted,
    };
    let weighted: Vec<f64> = tilted_ensemble(&model_p, &model_q, n, &x0, &cfg_tilted)?
        .iter()
        .map(|(traj, lw)| {
            let x = indicator(traj);
            if x == 0.0 {
                0.0
            } else {
                lw.log_ratio.exp() * x
            }
        })
        .collect();
    let tilted_mean = epild::stats::mean(&weighted);
    let tilted_se = epild::stats::standard_error(&weighted);

    let combined_se = (direct_se * direct_se + tilted_se * tilted_se).sqrt();
    let diff = (direct_mean - tilted_mean).abs();
    println!("direct:  mean = {direct_mean} (se {direct_se}, {replicas_direct} replicas)");
    println!("tilted:  mean = {tilted_mean} (se {tilted_se}, {replicas_tilted} replicas)");
    println!(
        "|diff| = {diff} = {:.2} combined se",
        if combined_se > 0.0 { diff / combined_se } else { 0.0 }
    );

    let mut csv = String::from("estimator,replicas,estimate,se\n");
    let _ = writeln!(csv, "direct,{replicas_direct},{direct_mean},{direct_se}");
    let _ = writeln!(csv, "tilted,{replicas_tilted},{tilted_mean},{tilted_se}");
    let csv_path = out.join("importance.csv");
    super::write_file(&csv_path, &csv)?;
    manifest.output(&csv_path);
    manifest.write(&out)?;
    Ok(())
}
