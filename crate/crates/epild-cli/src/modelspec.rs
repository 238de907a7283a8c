//! Model selection shared by all subcommands: a named model plus its
//! parameters, resolvable from flags or the `[model]` config section.

use anyhow::{bail, Result};
use clap::Args;
use epild::{
    birth_death_1d, constant_rate_1d, endemic_equilibrium, linear_birth_1d, pure_death_1d,
    sirs_model, JumpModel, SirsParams,
};

use crate::config::{Config, UsageError};

macro_rules! usage_bail {
    ($($arg:tt)*) => {
        return Err(UsageError(format!($($arg)*)).into())
    };
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// Model name: sirs | oned | oned-death | const | birth-death.
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Shorthand for `--model oned` (linear birth, rate x, jump +1).
    #[arg(long, global = true, conflicts_with = "model")]
    pub oned: bool,

    /// SIRS infection rate.
    #[arg(long, global = true)]
    pub beta: Option<f64>,

    /// SIRS recovery rate.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,

    /// SIRS immunity-loss rate.
    #[arg(long, global = true)]
    pub nu: Option<f64>,

    /// Constant jump rate for `--model const`.
    #[arg(long, global = true)]
    pub rate: Option<f64>,

    /// Per-capita birth rate for `--model birth-death`.
    #[arg(long, global = true)]
    pub birth: Option<f64>,

    /// Per-capita death rate for `--model birth-death`.
    #[arg(long, global = true)]
    pub death: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum ModelSpec {
    Sirs(SirsParams),
    Oned,
    OnedDeath,
    Const(f64),
    BirthDeath { birth: f64, death: f64 },
}

impl ModelSpec {
    pub fn resolve(args: &ModelArgs, cfg: &Config) -> Result<Self> {
        let name = if args.oned {
            "oned".to_string()
        } else if let Some(m) = &args.model {
            m.clone()
        } else if let Some(m) = cfg.get::<String>("model", "name")? {
            m
        } else {
            usage_bail!("no model selected: pass --model (or --oned) or set [model] name")
        };
        let getf = |flag: &Option<f64>, key: &str| -> Result<Option<f64>> {
            if flag.is_some() {
                return Ok(*flag);
            }
            cfg.get::<f64>("model", key)
        };
        match name.as_str() {
            "sirs" => {
                let beta = getf(&args.beta, "beta")?;
                let gamma = getf(&args.gamma, "gamma")?;
                let nu = getf(&args.nu, "nu")?;
                let (Some(beta), Some(gamma), Some(nu)) = (beta, gamma, nu) else {
                    usage_bail!("model sirs needs --beta, --gamma and --nu")
                };
                Ok(ModelSpec::Sirs(SirsParams::new(beta, gamma, nu)?))
            }
            "oned" => Ok(ModelSpec::Oned),
            "oned-death" => Ok(ModelSpec::OnedDeath),
            "const" => {
                let Some(rate) = getf(&args.rate, "rate")? else {
                    usage_bail!("model const needs --rate")
                };
                Ok(ModelSpec::Const(rate))
            }
            "birth-death" => {
                let birth = getf(&args.birth, "birth")?;
                let death = getf(&args.death, "death")?;
                let (Some(birth), Some(death)) = (birth, death) else {
                    usage_bail!("model birth-death needs --birth and --death")
                };
                Ok(ModelSpec::BirthDeath { birth, death })
            }
            other => usage_bail!("unknown model `{other}` (expected sirs, oned, oned-death, const, birth-death)"),
        }
    }

    pub fn build(&self) -> Result<JumpModel> {
        Ok(match self {
            ModelSpec::Sirs(p) => sirs_model(p)?,
            ModelSpec::Oned => linear_birth_1d(),
            ModelSpec::OnedDeath => pure_death_1d(),
            ModelSpec::Const(rate) => constant_rate_1d(*rate)?,
            ModelSpec::BirthDeath { birth, death } => birth_death_1d(*birth, *death)?,
        })
    }

    pub fn sirs_params(&self) -> Option<&SirsParams> {
        match self {
            ModelSpec::Sirs(p) => Some(p),
            _ => None,
        }
    }

    /// Resolve an initial-state spec: `endemic` (SIRS only) or a
    /// comma-separated coordinate list.
    pub fn initial_state(&self, spec: &str) -> Result<Vec<f64>> {
        if spec == "endemic" {
            let Some(p) = self.sirs_params() else {
                bail!("--x0 endemic is only defined for the sirs model")
            };
            return Ok(endemic_equilibrium(p)?);
        }
        parse_vector(spec)
    }
}

/// Parse `a,b,c` into a vector of floats.
pub fn parse_vector(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| anyhow::anyhow!("bad number `{tok}`: {e}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_sirs_from_flags() {
        let args = ModelArgs {
            model: Some("sirs".into()),
            beta: Some(2.0),
            gamma: Some(1.0),
            nu: Some(1.0),
            ..Default::default()
        };
        let spec = ModelSpec::resolve(&args, &Config::default()).unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(spec.initial_state("endemic").unwrap(), vec![0.25, 0.25]);
    }

    #[test]
    fn resolves_from_config_fallback() {
        let cfg = Config::parse("[model]\nname = const\nrate = 1.5\n").unwrap();
        let spec = ModelSpec::resolve(&ModelArgs::default(), &cfg).unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.dim(), 1);
    }

    #[test]
    fn missing_model_is_an_error() {
        assert!(ModelSpec::resolve(&ModelArgs::default(), &Config::default()).is_err());
    }

    #[test]
    fn parses_vectors() {
        assert_eq!(parse_vector("0.25, 0.25").unwrap(), vec![0.25, 0.25]);
        assert!(parse_vector("0.1,oops").is_err());
    }
}
