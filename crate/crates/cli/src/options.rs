use crate::CliError;
use clap::Args;
use flipwalk::distribution::DenseDistribution;
use flipwalk::hypercube::SpinVector;
use flipwalk::math::log_space;
use flipwalk::prior::Prior;
use flipwalk::sampler::SamplerKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Every knob of every subcommand. Command-line values override those read
/// from `--config`; whatever is still unset takes the subcommand default.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// JSON file with the same fields as the flags (snake_case).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Subcommand the config file was written for.
    #[arg(skip)]
    pub command: Option<String>,

    /// Prior family: mixture, independent, uniform, dirac or tabular.
    #[arg(long)]
    pub prior: Option<String>,
    /// Atom of the dirac prior as a +/- string (default all +).
    #[arg(long)]
    pub vertex: Option<String>,
    /// `index,prob` file backing the tabular prior.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Step sizes; default 1/alpha.
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Independent walk-jump runs per grid point.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kernel: one, two (sweeps also accept both).
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Training examples drawn from the prior when no dataset is given.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dataset file: +/- lines or CSV of ±1.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model checkpoint used as the score.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Where to write the per-epoch training loss.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
    /// logistic or least-squares.
    #[arg(long)]
    pub objective: Option<String>,
    /// linear or tanh.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub m_train: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl Options {
    /// Loads `--config` if given and lays the command-line values over it.
    pub fn resolve(&self, command: &str) -> Result<Options, CliError> {
        let mut base = match &self.config {
            Some(path) => read_config(path)?,
            None => Options::default(),
        };
        if let Some(c) = &base.command {
            if c != command {
                return Err(CliError::Invalid(format!(
                    "config was written for `{c}`, not `{command}`"
                )));
            }
        }
        let top = self;
        overlay!(base, top; prior, vertex, table, beta, alpha, eta, d, m, steps, burn_in, thin, chains, runs,
            seed, sampler, out, n, data, model, loss_out, objective, arch, hidden, epochs, lr, m_train);
        base.command = Some(command.to_string());
        Ok(base)
    }

    pub fn prior_name(&self, default: &str) -> Result<String, CliError> {
        let name = self.prior.clone().unwrap_or_else(|| default.to_string());
        match name.as_str() {
            "mixture" | "independent" | "uniform" | "dirac" | "tabular" => Ok(name),
            other => Err(CliError::Invalid(format!("unknown prior {other:?}"))),
        }
    }

    /// β grid; priors without a β get the single placeholder 0.
    pub fn betas(&self, prior: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        if matches!(prior, "uniform" | "dirac" | "tabular") {
            return Ok(vec![0.0]);
        }
        let v = self.beta.clone().unwrap_or_else(|| default.to_vec());
        nonempty("beta", &v)?;
        if v.iter().any(|b| !b.is_finite()) {
            return Err(CliError::Invalid("beta must be finite".into()));
        }
        Ok(v)
    }

    pub fn alphas(&self, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
        let v = self.alpha.clone().unwrap_or(default);
        nonempty("alpha", &v)?;
        if v.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(CliError::Invalid("alpha values must be positive".into()));
        }
        Ok(v)
    }

    pub fn dims(&self, default: &[usize]) -> Result<Vec<usize>, CliError> {
        let v = self.d.clone().unwrap_or_else(|| default.to_vec());
        nonempty("d", &v)?;
        if v.contains(&0) {
            return Err(CliError::Invalid("d must be positive".into()));
        }
        Ok(v)
    }

    pub fn ms(&self, default: &[usize]) -> Result<Vec<usize>, CliError> {
        let v = self.m.clone().unwrap_or_else(|| default.to_vec());
        nonempty("m", &v)?;
        if v.contains(&0) {
            return Err(CliError::Invalid("m must be at least 1".into()));
        }
        Ok(v)
    }

    /// Absolute step sizes if given.
    pub fn etas(&self) -> Result<Option<Vec<f64>>, CliError> {
        match &self.eta {
            None => Ok(None),
            Some(v) => {
                nonempty("eta", v)?;
                if v.iter().any(|e| !(*e > 0.0)) {
                    return Err(CliError::Invalid("eta values must be positive".into()));
                }
                Ok(Some(v.clone()))
            }
        }
    }

    pub fn samplers(&self, default: &[SamplerKind]) -> Result<Vec<SamplerKind>, CliError> {
        match self.sampler.as_deref() {
            None => Ok(default.to_vec()),
            Some("both") => Ok(vec![SamplerKind::OneStage, SamplerKind::TwoStage]),
            Some(s) => Ok(vec![s.parse().map_err(|e: flipwalk::Error| CliError::Invalid(e.to_string()))?]),
        }
    }

    pub fn sampler_kind(&self, default: SamplerKind) -> Result<SamplerKind, CliError> {
        match self.samplers(&[default])?.as_slice() {
            [k] => Ok(*k),
            _ => Err(CliError::Invalid("this command runs a single sampler".into())),
        }
    }

    pub fn single<T: Copy>(name: &str, v: &[T]) -> Result<T, CliError> {
        match v {
            [x] => Ok(*x),
            _ => Err(CliError::Invalid(format!("{name} takes a single value here"))),
        }
    }

    pub fn build_prior(&self, name: &str, d: usize, beta: f64) -> Result<Prior, CliError> {
        let prior = match name {
            "mixture" => Prior::mixture(d, beta)?,
            "independent" => Prior::independent(vec![beta; d])?,
            "uniform" => Prior::uniform(d),
            "dirac" => match &self.vertex {
                Some(s) => {
                    let v = SpinVector::parse_plus_minus(s)?;
                    if v.dim() != d {
                        return Err(CliError::Invalid(format!("vertex has {} coordinates, d = {d}", v.dim())));
                    }
                    Prior::Dirac(v)
                }
                None => Prior::Dirac(SpinVector::ones(d)),
            },
            "tabular" => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| CliError::Invalid("the tabular prior needs --table".into()))?;
                let file = std::fs::File::open(path)?;
                let table = DenseDistribution::read_csv(std::io::BufReader::new(file))?;
                if table.dim() != d {
                    return Err(CliError::Invalid(format!("table has dimension {}, d = {d}", table.dim())));
                }
                Prior::Tabular(table)
            }
            other => return Err(CliError::Invalid(format!("unknown prior {other:?}"))),
        };
        Ok(prior)
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Invalid(format!("{name} grid is empty")));
    }
    Ok(())
}

fn read_config(path: &Path) -> Result<Options, CliError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// 20 log-spaced noise levels in `[0.01, 4]`.
pub fn default_alpha_grid() -> Vec<f64> {
    log_space(0.01, 4.0, 20)
}

pub const DEFAULT_BETAS: [f64; 3] = [0.25, 1.0, 4.0];
