use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cubature::{McConfig, ModelConfig, Payoff};

/// Expectations and Greeks of Stratonovich SDEs by cubature on Wiener space.
///
/// Every flag can also be set through an environment variable named
/// `CUBATURE_<FLAG>`, e.g. `CUBATURE_SEED=7`.
#[derive(Debug, Parser)]
#[command(name = "cubature", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Model file (JSON). Defaults to Black–Scholes with r = 0.05, σ = 0.3.
    #[arg(long, global = true, env = "CUBATURE_MODEL")]
    pub model: Option<PathBuf>,
    /// Number of Brownian motions.
    #[arg(long, global = true, env = "CUBATURE_D", value_parser = clap::value_parser!(u64).range(1..=9))]
    pub d: Option<u64>,
    /// Degree of the Greeks formula, or of the algebra for `verify`.
    #[arg(long, global = true, env = "CUBATURE_M", value_parser = clap::value_parser!(u64).range(1..=10))]
    pub m: Option<u64>,
    /// Degree of the expectation formulas.
    #[arg(long, global = true, env = "CUBATURE_MPRIME", default_value_t = 3,
          value_parser = clap::value_parser!(u64).range(1..=10))]
    pub mprime: u64,
    /// Time horizon.
    #[arg(long, global = true, env = "CUBATURE_T")]
    pub t: Option<f64>,
    /// Iterated scheme as `k,gamma`: k expectation steps after the Greek step.
    #[arg(long, global = true, env = "CUBATURE_PARTITION")]
    pub partition: Option<String>,
    /// Length of the Greek step for `--partition`. Defaults to t/10.
    #[arg(long, global = true, env = "CUBATURE_S0")]
    pub s0: Option<f64>,
    #[arg(long, global = true, env = "CUBATURE_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Monte Carlo paths.
    #[arg(long, global = true, env = "CUBATURE_PATHS", default_value_t = 100_000)]
    pub paths: usize,
    /// Monte Carlo time steps per path.
    #[arg(long, global = true, env = "CUBATURE_STEPS", default_value_t = 64)]
    pub steps: usize,
    /// Use antithetic Monte Carlo pairs.
    #[arg(long, global = true, env = "CUBATURE_ANTITHETIC")]
    pub antithetic: bool,
    /// Output file; stdout when absent.
    #[arg(long, global = true, env = "CUBATURE_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "CUBATURE_FORMAT", value_enum)]
    pub format: Option<Format>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "CUBATURE_THREADS")]
    pub threads: Option<usize>,
}

impl Global {
    pub fn model_config(&self) -> Result<ModelConfig> {
        match &self.model {
            None => Ok(ModelConfig::BlackScholes { r: 0.05, sigma: 0.3 }),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read model file {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("invalid model file {}", p.display()))
            }
        }
    }

    pub fn mc(&self) -> Result<McConfig> {
        let cfg = McConfig::new(self.paths, self.steps, self.seed).antithetic(self.antithetic);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn horizon(&self, default: f64) -> Result<f64> {
        let t = self.t.unwrap_or(default);
        if !(t.is_finite() && t > 0.0) {
            bail!("--t must be positive, got {t}");
        }
        Ok(t)
    }

    /// `(k, gamma)` from `--partition`.
    pub fn partition(&self) -> Result<Option<(usize, f64)>> {
        let Some(p) = &self.partition else {
            return Ok(None);
        };
        let (k, g) = p
            .split_once(',')
            .ok_or_else(|| anyhow!("--partition expects `k,gamma`, got `{p}`"))?;
        let k = k.trim().parse().map_err(|_| anyhow!("invalid k in --partition `{p}`"))?;
        let g = g.trim().parse().map_err(|_| anyhow!("invalid gamma in --partition `{p}`"))?;
        Ok(Some((k, g)))
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check algebra and signature identities for one (d, m).
    Verify(VerifyArgs),
    /// Compute a Greek by cubature.
    Greek(GreekArgs),
    /// Convergence study against Black–Scholes closed forms.
    Converge(ConvergeArgs),
    /// Monte Carlo diagnostics: covariance matrix, signature mean, delta oracles.
    Diagnostics(DiagnosticsArgs),
    /// Export or import cubature formulas.
    Cubature(CubatureArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {}

#[derive(Debug, Args)]
pub struct GreekArgs {
    /// Direction: a vector `1,0` or an expression such as `V1`, `[V1,V2]`, `0.5*V1 - V2`.
    #[arg(long, env = "CUBATURE_DIRECTION")]
    pub direction: String,
    /// Factor applied to the direction: `1`, `sqrt_t` or `t^<q>/2`.
    #[arg(long, env = "CUBATURE_SCALE", default_value = "1")]
    pub scale: String,
    /// Initial state, comma separated. Defaults to 1 for a scalar model, else 0.
    #[arg(long, env = "CUBATURE_Y")]
    pub y: Option<String>,
    /// `identity`, `coord:<i>`, `call:<K>` or `smoothed:<K>,<eps>`.
    #[arg(long, env = "CUBATURE_PAYOFF", default_value = "identity")]
    pub payoff: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    /// One-step expectation of degree m′ over the horizons.
    Expectation,
    /// One-step Greek of degree m over the horizons.
    Greek,
    /// Iterated Greek over the partition counts.
    Iterated,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_enum, env = "CUBATURE_STUDY", default_value = "greek")]
    pub study: Study,
    /// Horizons for the one-step studies.
    #[arg(long, env = "CUBATURE_TS", value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
    pub ts: Vec<f64>,
    /// Expectation step counts for the iterated study.
    #[arg(long, env = "CUBATURE_KS", value_delimiter = ',', default_value = "2,4,8")]
    pub ks: Vec<usize>,
    /// Grading exponent of the iterated partition.
    #[arg(long, env = "CUBATURE_GAMMA", default_value_t = 3.0)]
    pub gamma: f64,
    /// Greek direction for the one-step Greek study.
    #[arg(long, env = "CUBATURE_DIRECTION", default_value = "V1")]
    pub direction: String,
    #[arg(long, env = "CUBATURE_SCALE", default_value = "sqrt_t")]
    pub scale: String,
    #[arg(long, env = "CUBATURE_Y", default_value = "1")]
    pub y: String,
    #[arg(long, env = "CUBATURE_PAYOFF", default_value = "identity")]
    pub payoff: String,
}

#[derive(Debug, Args)]
pub struct DiagnosticsArgs {
    /// Payoff for the delta cross-check.
    #[arg(long, env = "CUBATURE_PAYOFF", default_value = "call:1")]
    pub payoff: String,
    /// Finite-difference step of the delta cross-check.
    #[arg(long, env = "CUBATURE_H", default_value_t = 1e-3)]
    pub h: f64,
}

#[derive(Debug, Args)]
pub struct CubatureArgs {
    #[command(subcommand)]
    pub action: FormulaAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Expectation,
    Greeks,
}

#[derive(Debug, Subcommand)]
pub enum FormulaAction {
    /// Build a formula and write it as JSON.
    Export {
        #[arg(long, value_enum, default_value = "expectation")]
        flavor: FlavorArg,
        /// Lie direction for a Greeks formula, e.g. `V1` or `[V1,V2]` (V<i> read as e_i).
        #[arg(long)]
        direction: Option<String>,
    },
    /// Read a formula, re-verify its moments and summarize it.
    Import {
        /// Formula JSON file.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

pub fn parse_state(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("invalid state entry `{p}` in `{s}`")))
        .collect()
}

pub fn parse_payoff(s: &str) -> Result<Payoff> {
    let s = s.trim();
    let (name, arg) = s.split_once(':').unwrap_or((s, ""));
    let num = |x: &str| -> Result<f64> {
        x.trim().parse::<f64>().map_err(|_| anyhow!("invalid number `{x}` in payoff `{s}`"))
    };
    Ok(match name {
        "identity" => Payoff::Identity,
        "coord" => Payoff::Coordinate(
            arg.trim().parse().map_err(|_| anyhow!("invalid coordinate in payoff `{s}`"))?,
        ),
        "call" => Payoff::Call { strike: num(arg)? },
        "smoothed" => {
            let (k, e) = arg
                .split_once(',')
                .ok_or_else(|| anyhow!("smoothed payoff expects `smoothed:<K>,<eps>`"))?;
            let eps = num(e)?;
            if eps.is_nan() || eps <= 0.0 {
                bail!("smoothing width must be positive, got {eps}");
            }
            Payoff::SmoothedCall { strike: num(k)?, eps }
        }
        _ => bail!("unknown payoff `{s}`; expected identity, coord:<i>, call:<K> or smoothed:<K>,<eps>"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoffs() {
        assert!(matches!(parse_payoff("call:1.1").unwrap(), Payoff::Call { strike } if strike == 1.1));
        assert!(matches!(parse_payoff("coord:1").unwrap(), Payoff::Coordinate(1)));
        assert!(matches!(
            parse_payoff("smoothed:1,0.05").unwrap(),
            Payoff::SmoothedCall { strike, eps } if strike == 1.0 && eps == 0.05
        ));
        assert!(parse_payoff("digital:1").is_err());
        assert!(parse_payoff("smoothed:1,0").is_err());
    }

    #[test]
    fn states() {
        assert_eq!(parse_state("0, 0.5").unwrap(), vec![0.0, 0.5]);
        assert!(parse_state("a").is_err());
    }
}
