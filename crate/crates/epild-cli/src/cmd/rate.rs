use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use epild::{local_rate_dual, local_rate_primal, RateStatus};

use crate::config::{resolve_required, Config};
use crate::modelspec::{parse_vector, ModelArgs, ModelSpec};

#[derive(Debug, Args)]
pub struct RateArgs {
    /// State, comma-separated.
    #[arg(short = 'x', long)]
    x: Option<String>,

    /// Velocity, comma-separated.
    #[arg(short = 'y', long)]
    y: Option<String>,

    /// Optional CSV output file appended below the printed table.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn status_str(s: RateStatus) -> &'static str {
    match s {
        RateStatus::Finite => "finite",
        RateStatus::InfiniteOutsideCone => "infinite_outside_cone",
        RateStatus::InfiniteZeroRate => "infinite_zero_rate",
    }
}

pub fn run(args: &RateArgs, margs: &ModelArgs, cfg: &Config) -> Result<()> {
    const SECTION: &str = "rate";
    let spec = ModelSpec::resolve(margs, cfg)?;
    let model = spec.build()?;
    let x = parse_vector(&resolve_required(&args.x, cfg, SECTION, "x")?)?;
    let y = parse_vector(&resolve_required(&args.y, cfg, SECTION, "y")?)?;
    if x.len() != model.dim() || y.len() != model.dim() {
        bail!(
            "state/velocity must have dimension {} for model {}",
            model.dim(),
            model.id()
        );
    }

    let dual = local_rate_dual(&model, &x, &y)?;
    let value_str = if dual.value.is_finite() {
        format!("{}", dual.value)
    } else {
        "inf".to_string()
    };
    println!("model:    {}", model.id());
    println!("x:        {x:?}");
    println!("y:        {y:?}");
    println!("L(x,y):   {value_str}");
    println!("status:   {}", status_str(dual.status));
    match (&dual.theta_star, &dual.mu_star) {
        (Some(theta), Some(mu)) => {
            println!("theta*:   {theta:?}");
            println!("mu*:      {mu:?}");
        }
        _ => {
            println!("theta*:   -");
            println!("mu*:      -");
        }
    }
    if dual.value.is_finite() {
        let primal = local_rate_primal(&model, &x, &y)?;
        println!("dual gap: {:.3e}", (primal.value - dual.value).abs());
    } else {
        println!("dual gap: 0");
    }

    if let Some(out) = &args.out {
        let mut csv = String::new();
        for i in 1..=model.dim() {
            let _ = write!(csv, "x_{i},");
        }
        for i in 1..=model.dim() {
            let _ = write!(csv, "y_{i},");
        }
        csv.push_str("value,status,dual_gap\n");
        for v in &x {
            let _ = write!(csv, "{v},");
        }
        for v in &y {
            let _ = write!(csv, "{v},");
        }
        let _ = writeln!(csv, "{value_str},{},{}", status_str(dual.status), dual.dual_gap);
        super::write_file(out, &csv)?;
    }
    Ok(())
}
