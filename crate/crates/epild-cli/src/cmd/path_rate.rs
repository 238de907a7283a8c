use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use epild::{path_rate, PlPath, DEFAULT_QUAD_ORDER};

use crate::config::{resolve, Config};
use crate::modelspec::{ModelArgs, ModelSpec};

#[derive(Debug, Args)]
pub struct PathRateArgs {
    /// CSV file of path knots: header `t,y_1..y_d`, one knot per row.
    #[arg(long)]
    path: Option<PathBuf>,

    /// Gauss–Legendre order per segment.
    #[arg(long)]
    quad_order: Option<usize>,
}

/// Parse a knot CSV (`t,y_1..y_d` with a header row) into a path.
pub fn read_path_csv(text: &str) -> Result<PlPath> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().context("empty path file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        bail!("path CSV must start with a header `t,y_1..y_d`, got `{header}`");
    }
    let d = cols.len() - 1;
    let mut times = Vec::new();
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            bail!("row {}: expected {} fields, got {}", i + 2, d + 1, fields.len());
        }
        let t: f64 = fields[0]
            .parse()
            .with_context(|| format!("row {}: bad time `{}`", i + 2, fields[0]))?;
        let mut point = Vec::with_capacity(d);
        for f in &fields[1..] {
            point.push(
                f.parse::<f64>()
                    .with_context(|| format!("row {}: bad coordinate `{f}`", i + 2))?,
            );
        }
        times.push(t);
        points.push(point);
    }
    Ok(PlPath::new(times, points)?)
}

pub fn run(args: &PathRateArgs, margs: &ModelArgs, cfg: &Config) -> Result<()> {
    const SECTION: &str = "path-rate";
    let spec = ModelSpec::resolve(margs, cfg)?;
    let model = spec.build()?;
    let path_file = match &args.path {
        Some(p) => p.clone(),
        None => cfg
            .get::<PathBuf>(SECTION, "path")?
            .context("missing required setting `path`")?,
    };
    let quad_order = resolve(&args.quad_order, cfg, SECTION, "quad_order", DEFAULT_QUAD_ORDER)?;

    let text = std::fs::read_to_string(&path_file)
        .with_context(|| format!("cannot read {}", path_file.display()))?;
    let path = read_path_csv(&text)?;
    let value = path_rate(&model, &path, quad_order)?;
    println!("model:     {}", model.id());
    println!("knots:     {}", path.knot_times.len());
    println!("horizon:   {}", path.horizon());
    if value.is_finite() {
        println!("action:    {value}");
    } else {
        println!("action:    inf");
    }
    Ok(())
}
