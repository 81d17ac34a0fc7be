use crate::options::{default_alpha_grid, Options, DEFAULT_BETAS};
use crate::{CliError, Command};
use flipwalk::distribution::DenseDistribution;
use flipwalk::learning::{self, Architecture, DenoiserModel, Objective, TrainConfig, TrainingData};
use flipwalk::oracle::{
    check_contraction, check_denoising_bound, check_stationary_bound, denoise_distribution, denoiser_law,
    denoiser_pushforward, mixing_time_from_modulus, second_eigenvalue_modulus, stationary, transition_matrix,
    wasserstein_hamming, BoundReport, REPORT_HEADER,
};
use flipwalk::sampler::{self, SamplerConfig, SamplerKind};
use flipwalk::{noisy_pmf, vertex_index, NoiseLevel, ScoreOracle};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

type Out<'a> = &'a mut Vec<u8>;

pub fn dispatch(command: &Command, opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    match command {
        Command::DenoiseSweep(_) => denoise_sweep(opts, out),
        Command::MultiSweep(_) => multi_sweep(opts, out),
        Command::MixingSweep(_) => mixing_sweep(opts, out),
        Command::StationaryDenoise(_) => stationary_denoise(opts, out),
        Command::Sample(_) => sample(opts, out),
        Command::Learn(_) => learn(opts, out),
        Command::CheckBounds(_) => check_bounds(opts, out),
        Command::SeqSample(_) => seq_sample(opts, out),
    }
}

/// `d·e^{−2α}` for one measurement, `d·e^{−mα}` otherwise.
pub fn denoising_bound(d: usize, alpha: f64, m: usize) -> f64 {
    let rate = if m == 1 { 2.0 } else { m as f64 };
    d as f64 * (-rate * alpha).exp()
}

fn level(alpha: f64) -> Result<NoiseLevel, CliError> {
    Ok(NoiseLevel::new(alpha)?)
}

/// Evaluates `f` on every grid point in parallel, keeping grid order.
fn par_rows<P: Sync, R: Send>(
    points: &[P],
    f: impl Fn(&P) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    points.par_iter().map(f).collect()
}

fn denoise_sweep(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let prior_name = opts.prior_name("mixture")?;
    let dims = opts.dims(&[8])?;
    let betas = opts.betas(&prior_name, &DEFAULT_BETAS)?;
    let alphas = opts.alphas(default_alpha_grid())?;
    let mut points = Vec::new();
    for &d in &dims {
        for &beta in &betas {
            points.push((d, beta, opts.build_prior(&prior_name, d, beta)?));
        }
    }
    let grid: Vec<_> = points
        .iter()
        .flat_map(|p| alphas.iter().map(move |&a| (p, a)))
        .collect();
    let rows = par_rows(&grid, |&((d, beta, prior), a)| {
        let law = denoiser_law(prior, level(a)?, 1)?;
        let w = wasserstein_hamming(&prior.enumerate()?, &law.output)?;
        Ok(format!("{d},{beta},{a},{w},{},{}", law.risk, denoising_bound(*d, a, 1)))
    })?;
    writeln!(out, "d,beta,alpha,wasserstein,mse,bound")?;
    rows.iter().try_for_each(|r| writeln!(out, "{r}"))?;
    Ok(())
}

fn multi_sweep(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let prior_name = opts.prior_name("mixture")?;
    let dims = opts.dims(&[6])?;
    let betas = opts.betas(&prior_name, &DEFAULT_BETAS)?;
    let alphas = opts.alphas(default_alpha_grid())?;
    let ms = opts.ms(&[1, 3, 5])?;
    let mut grid = Vec::new();
    for &d in &dims {
        for &beta in &betas {
            let prior = Arc::new(opts.build_prior(&prior_name, d, beta)?);
            for &a in &alphas {
                for &m in &ms {
                    grid.push((d, beta, prior.clone(), a, m));
                }
            }
        }
    }
    let rows = par_rows(&grid, |(d, beta, prior, a, m)| {
        let law = denoiser_law(prior, level(*a)?, *m)?;
        let w = wasserstein_hamming(&prior.enumerate()?, &law.output)?;
        Ok(format!("{d},{beta},{a},{m},{w},{},{}", law.risk, denoising_bound(*d, *a, *m)))
    })?;
    writeln!(out, "d,beta,alpha,m,wasserstein,mse,bound")?;
    rows.iter().try_for_each(|r| writeln!(out, "{r}"))?;
    Ok(())
}

fn mixing_sweep(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let prior_name = opts.prior_name("mixture")?;
    let dims = opts.dims(&[6])?;
    let betas = opts.betas(&prior_name, &DEFAULT_BETAS)?;
    let alphas = opts.alphas(default_alpha_grid())?;
    let kinds = opts.samplers(&[SamplerKind::OneStage, SamplerKind::TwoStage])?;
    let etas = opts.etas()?;
    let mut grid = Vec::new();
    for &d in &dims {
        for &beta in &betas {
            let prior = Arc::new(opts.build_prior(&prior_name, d, beta)?);
            for &a in &alphas {
                for &kind in &kinds {
                    let steps = match &etas {
                        Some(v) => v.clone(),
                        None => (-4..=2).map(|k| 2f64.powi(k) / a).collect(),
                    };
                    for eta in steps {
                        grid.push((d, beta, prior.clone(), a, kind, eta));
                    }
                }
            }
        }
    }
    let rows = par_rows(&grid, |(d, beta, prior, a, kind, eta)| {
        let alpha = level(*a)?;
        let score = ScoreOracle::for_prior(prior, alpha)?;
        let t = transition_matrix(*kind, &score, *eta, *d)?;
        let pi = stationary(&t)?;
        let tau = mixing_time_from_modulus(second_eigenvalue_modulus(&t, &pi.distribution)?);
        let w = wasserstein_hamming(&pi.distribution, &noisy_pmf(prior, alpha)?)?;
        Ok(format!("{d},{beta},{kind},{eta},{a},{tau},{w}"))
    })?;
    writeln!(out, "d,beta,kind,eta,alpha,mixing_time,stationary_W")?;
    rows.iter().try_for_each(|r| writeln!(out, "{r}"))?;
    Ok(())
}

fn stationary_denoise(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let prior_name = opts.prior_name("mixture")?;
    let dims = opts.dims(&[8])?;
    let betas = opts.betas(&prior_name, &DEFAULT_BETAS)?;
    let alphas = opts.alphas(default_alpha_grid())?;
    let kinds = opts.samplers(&[SamplerKind::OneStage, SamplerKind::TwoStage])?;
    let eta = match opts.etas()? {
        Some(v) => Some(Options::single("eta", &v)?),
        None => None,
    };
    let mut grid = Vec::new();
    for &d in &dims {
        for &beta in &betas {
            let prior = Arc::new(opts.build_prior(&prior_name, d, beta)?);
            for &kind in &kinds {
                for &a in &alphas {
                    grid.push((d, beta, prior.clone(), kind, a));
                }
            }
        }
    }
    let rows = par_rows(&grid, |(d, beta, prior, kind, a)| {
        let alpha = level(*a)?;
        let score = ScoreOracle::for_prior(prior, alpha)?;
        let t = transition_matrix(*kind, &score, eta.unwrap_or(1.0 / a), *d)?;
        let pi = stationary(&t)?.distribution;
        let stationary_w = wasserstein_hamming(&pi, &noisy_pmf(prior, alpha)?)?;
        let denoised_w = wasserstein_hamming(&prior.enumerate()?, &denoise_distribution(&score, &pi)?)?;
        Ok(format!("{d},{beta},{kind},{a},{stationary_w},{denoised_w}"))
    })?;
    writeln!(out, "d,beta,kind,alpha,stationary_W,denoised_W")?;
    rows.iter().try_for_each(|r| writeln!(out, "{r}"))?;
    Ok(())
}

fn sampler_config(opts: &Options, kind: SamplerKind, steps: usize) -> Result<SamplerConfig, CliError> {
    let eta = match opts.etas()? {
        Some(v) => Some(Options::single("eta", &v)?),
        None => None,
    };
    let config = SamplerConfig {
        kind,
        eta,
        steps: opts.steps.unwrap_or(steps),
        burn_in: opts.burn_in.unwrap_or(0),
        thin: opts.thin.unwrap_or(1),
        seed: opts.seed.unwrap_or(0),
        chains: opts.chains.unwrap_or(1),
        init: None,
    };
    config.validate()?;
    Ok(config)
}

fn sample(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let kind = opts.sampler_kind(SamplerKind::OneStage)?;
    let config = sampler_config(opts, kind, 1000)?;
    let score = match &opts.model {
        Some(path) => {
            let model = DenoiserModel::read_json(std::io::BufReader::new(std::fs::File::open(path)?))?;
            ScoreOracle::learned(Arc::new(model), config.seed)?
        }
        None => {
            let prior_name = opts.prior_name("mixture")?;
            let d = Options::single("d", &opts.dims(&[6])?)?;
            let beta = Options::single("beta", &opts.betas(&prior_name, &[1.0])?)?;
            let a = Options::single("alpha", &opts.alphas(vec![0.25])?)?;
            ScoreOracle::for_prior(&opts.build_prior(&prior_name, d, beta)?, level(a)?)?
        }
    };
    let trajectories = sampler::run_chains(&config, &score)?;
    sampler::write_trajectory_csv(&mut *out, &trajectories)?;
    Ok(())
}

fn architecture(opts: &Options) -> Result<Architecture, CliError> {
    match opts.arch.as_deref().unwrap_or("linear") {
        "linear" => Ok(Architecture::Linear),
        "tanh" | "shallow" | "shallow-tanh" => Ok(Architecture::ShallowTanh {
            hidden: opts.hidden.unwrap_or(32),
        }),
        other => Err(CliError::Invalid(format!("unknown architecture {other:?}"))),
    }
}

fn objective(opts: &Options) -> Result<Objective, CliError> {
    match opts.objective.as_deref().unwrap_or("logistic") {
        "logistic" => Ok(Objective::Logistic),
        "least-squares" | "least_squares" | "ls" => Ok(Objective::LeastSquares),
        other => Err(CliError::Invalid(format!("unknown objective {other:?}"))),
    }
}

fn learn(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        architecture: architecture(opts)?,
        learning_rate: opts.lr.unwrap_or(defaults.learning_rate),
        epochs: opts.epochs.unwrap_or(defaults.epochs),
        m_train: opts.m_train.unwrap_or(defaults.m_train),
        objective: objective(opts)?,
        seed: opts.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let a = Options::single("alpha", &opts.alphas(vec![0.5])?)?;
    let outcome = match &opts.data {
        Some(path) => {
            let data = learning::read_dataset(std::io::BufReader::new(std::fs::File::open(path)?))?;
            learning::train(TrainingData::Dataset(&data), level(a)?, &config)?
        }
        None => {
            let prior_name = opts.prior_name("independent")?;
            let d = Options::single("d", &opts.dims(&[6])?)?;
            let beta = Options::single("beta", &opts.betas(&prior_name, &[0.5])?)?;
            let prior = opts.build_prior(&prior_name, d, beta)?;
            let n = opts.n.unwrap_or(10_000);
            learning::train(TrainingData::Prior { prior: &prior, n }, level(a)?, &config)?
        }
    };
    if let Some(path) = &opts.loss_out {
        let mut text = String::from("epoch,loss\n");
        for (e, l) in outcome.loss_curve.iter().enumerate() {
            text.push_str(&format!("{e},{l}\n"));
        }
        std::fs::write(path, text)?;
    }
    outcome.model.write_json(&mut *out)?;
    writeln!(out)?;
    Ok(())
}

/// Default suite: uniform and mixture priors, `d ∈ {2,4,6}`,
/// `α ∈ {0.05, 0.1, 0.125, 0.25}`. Kernels at `η ∈ {1/α, 2/α}`, the two-stage
/// stationary bound also at `2/(2α + ln d)`, denoising at `m ∈ {1,3,5}`.
fn check_bounds(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let dims = opts.dims(&[2, 4, 6])?;
    let alphas = opts.alphas(vec![0.05, 0.1, 0.125, 0.25])?;
    let ms = opts.ms(&[1, 3, 5])?;
    let etas = opts.etas()?;
    let mut priors: Vec<(String, f64)> = Vec::new();
    match &opts.prior {
        Some(_) => {
            let name = opts.prior_name("mixture")?;
            for b in opts.betas(&name, &[0.5, 1.0, 2.0])? {
                priors.push((name.clone(), b));
            }
        }
        None => {
            priors.push(("uniform".into(), 0.0));
            for b in opts.betas("mixture", &[0.5, 1.0, 2.0])? {
                priors.push(("mixture".into(), b));
            }
        }
    }

    #[derive(Clone, Copy)]
    enum Check {
        Contraction(SamplerKind, f64),
        Stationary(SamplerKind, f64),
        Denoise(usize),
    }
    let mut grid = Vec::new();
    for &d in &dims {
        for (name, beta) in &priors {
            let prior = Arc::new(opts.build_prior(name, d, *beta)?);
            for &a in &alphas {
                let kernel_etas = etas.clone().unwrap_or_else(|| vec![1.0 / a, 2.0 / a]);
                let mut checks = Vec::new();
                for kind in [SamplerKind::OneStage, SamplerKind::TwoStage] {
                    for &eta in &kernel_etas {
                        checks.push(Check::Contraction(kind, eta));
                    }
                }
                for kind in [SamplerKind::OneStage, SamplerKind::TwoStage] {
                    for &eta in &kernel_etas {
                        checks.push(Check::Stationary(kind, eta));
                    }
                }
                if etas.is_none() {
                    let tuned = 2.0 / (2.0 * a + (d as f64).ln());
                    checks.push(Check::Stationary(SamplerKind::TwoStage, tuned));
                }
                checks.extend(ms.iter().map(|&m| Check::Denoise(m)));
                for c in checks {
                    grid.push((name.clone(), *beta, prior.clone(), a, c));
                }
            }
        }
    }
    let reports: Vec<(String, f64, BoundReport)> = par_rows(&grid, |(name, beta, prior, a, check)| {
        let alpha = level(*a)?;
        let report = match *check {
            Check::Contraction(kind, eta) => check_contraction(kind, &ScoreOracle::for_prior(prior, alpha)?, eta)?,
            Check::Stationary(kind, eta) => check_stationary_bound(kind, prior, alpha, eta)?,
            Check::Denoise(m) => check_denoising_bound(prior, alpha, m)?,
        };
        Ok((name.clone(), *beta, report))
    })?;
    writeln!(out, "prior,beta,{REPORT_HEADER}")?;
    for (name, beta, r) in &reports {
        writeln!(out, "{name},{beta},{}", r.csv_row())?;
    }
    let failures = reports.iter().filter(|(_, _, r)| !r.pass).count();
    if failures > 0 {
        return Err(CliError::BoundFailure(failures));
    }
    Ok(())
}

const BATCHES: usize = 10;

fn seq_sample(opts: &Options, out: Out<'_>) -> Result<(), CliError> {
    let prior_name = opts.prior_name("mixture")?;
    let dims = opts.dims(&[6])?;
    let betas = opts.betas(&prior_name, &[1.0])?;
    let alphas = opts.alphas(vec![0.3])?;
    let ms = opts.ms(&[1, 3, 5])?;
    let kind = opts.sampler_kind(SamplerKind::TwoStage)?;
    let config = sampler_config(opts, kind, 50)?;
    let runs = opts.runs.unwrap_or(10_000);
    if runs < BATCHES {
        return Err(CliError::Invalid(format!("runs must be at least {BATCHES}")));
    }
    writeln!(out, "d,beta,alpha,m,kind,runs,wasserstein,std_error,exact_wasserstein,bound")?;
    for &d in &dims {
        for &beta in &betas {
            let prior = opts.build_prior(&prior_name, d, beta)?;
            let target = prior.enumerate()?;
            for &a in &alphas {
                let alpha = level(a)?;
                for &m in &ms {
                    let outputs: Vec<usize> = (0..runs)
                        .into_par_iter()
                        .map(|r| {
                            let (_, clean) = sampler::sequential_wjs(&config, &prior, alpha, m, r)?;
                            Ok(vertex_index(&clean)?)
                        })
                        .collect::<Result<_, CliError>>()?;
                    let w = wasserstein_hamming(&target, &DenseDistribution::empirical(d, outputs.iter().copied())?)?;
                    let se = batch_standard_error(&target, d, &outputs)?;
                    let exact = wasserstein_hamming(&target, &denoiser_pushforward(&prior, alpha, m)?)?;
                    writeln!(
                        out,
                        "{d},{beta},{a},{m},{kind},{runs},{w},{se},{exact},{}",
                        denoising_bound(d, a, m)
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// Standard error of the Monte Carlo distance from the spread of
/// [`BATCHES`] contiguous batch estimates.
fn batch_standard_error(target: &DenseDistribution, d: usize, outputs: &[usize]) -> Result<f64, CliError> {
    let size = outputs.len() / BATCHES;
    let ws = (0..BATCHES)
        .map(|b| {
            let chunk = &outputs[b * size..(b + 1) * size];
            Ok(wasserstein_hamming(target, &DenseDistribution::empirical(d, chunk.iter().copied())?)?)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let mean = ws.iter().sum::<f64>() / BATCHES as f64;
    let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    // batches hold 1/BATCHES of the runs, so the full estimate's spread is √BATCHES smaller
    Ok((var / BATCHES as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_rates() {
        assert!((denoising_bound(6, 0.5, 1) - 6.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((denoising_bound(6, 0.5, 3) - 6.0 * (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn batch_error_of_identical_batches_is_zero() {
        let target = DenseDistribution::uniform(2).unwrap();
        let outputs: Vec<usize> = (0..40).map(|i| i % 4).collect();
        assert_eq!(batch_standard_error(&target, 2, &outputs).unwrap(), 0.0);
    }
}
