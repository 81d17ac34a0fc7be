//! Discrete Langevin kernels on the hypercube, chain execution and walk-jump
//! sampling.
//!
//! The one-stage kernel draws `y'` from `t(y'|y) ∝ exp((s(y)/2 + y/η)ᵀ y')`.
//! The two-stage kernel is a Gibbs sweep on the joint `q(y) e^{yᵀz/η}`: flip
//! each coordinate of `y` to get `z`, then flip back with a score tilt.

use crate::error::{ensure_dim, Error, Result};
use crate::hypercube::{vertex_index, SpinVector, ENUMERATION_CAP};
use crate::math::sigmoid;
use crate::noise::{MeasurementSet, NoiseLevel};
use crate::prior::Prior;
use crate::rng::{stream_id, Purpose, RandomStream};
use crate::score::{multi_posterior_mean, optimal_denoise, sign_with_ties, ConditionalScore, ScoreFunction, ScoreOracle};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    OneStage,
    TwoStage,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "one-stage" | "one_stage" => Ok(Self::OneStage),
            "two" | "two-stage" | "two_stage" => Ok(Self::TwoStage),
            other => Err(Error::Parse(format!("unknown sampler {other:?}, expected one or two"))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::OneStage => "one",
            Self::TwoStage => "two",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Step size; `None` means `1/α` of the score in use.
    pub eta: Option<f64>,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    /// Starting vertex; uniform random when absent.
    pub init: Option<SpinVector>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::OneStage,
            eta: None,
            steps: 1000,
            burn_in: 0,
            thin: 1,
            seed: 0,
            chains: 1,
            init: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(eta) = self.eta {
            check_eta(eta)?;
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        if self.burn_in > self.steps {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} exceeds steps {}",
                self.burn_in, self.steps
            )));
        }
        if self.chains == 0 {
            return Err(Error::InvalidArgument("chains must be at least 1".into()));
        }
        Ok(())
    }

    /// The configured step size, or `1/α`.
    pub fn eta_for(&self, alpha: f64) -> Result<f64> {
        match self.eta {
            Some(eta) => check_eta(eta).map(|_| eta),
            None if alpha > 0.0 => Ok(1.0 / alpha),
            None => Err(Error::InvalidArgument(
                "step size must be given explicitly for a score without noise level".into(),
            )),
        }
    }

    /// `floor((steps - burn_in) / thin)`.
    pub fn record_count(&self) -> usize {
        (self.steps - self.burn_in) / self.thin
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")))
    }
}

/// Recorded states of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrajectory {
    pub chain: usize,
    /// Step number (1-based) of every record.
    pub steps: Vec<usize>,
    pub states: Vec<SpinVector>,
    pub denoised: Option<Vec<SpinVector>>,
}

/// Scratch space so a chain evaluates the score without allocating.
struct Workspace {
    point: Vec<f64>,
    score: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            point: vec![0.0; d],
            score: vec![0.0; d],
        }
    }
}

fn check_score(s: &[f64]) -> Result<()> {
    if s.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("score output"))
    }
}

fn one_stage_into<S: ScoreFunction + ?Sized>(
    score: &S,
    eta: f64,
    y: &mut SpinVector,
    ws: &mut Workspace,
    rng: &mut RandomStream,
) -> Result<()> {
    y.write_f64(&mut ws.point);
    score.eval_into(&ws.point, &mut ws.score)?;
    check_score(&ws.score)?;
    let inv = 2.0 / eta;
    for i in 0..y.dim() {
        let p = sigmoid(ws.score[i] + inv * ws.point[i]);
        y.set(i, rng.bernoulli(p));
    }
    Ok(())
}

fn two_stage_into<S: ScoreFunction + ?Sized>(
    score: &S,
    eta: f64,
    y: &mut SpinVector,
    ws: &mut Workspace,
    rng: &mut RandomStream,
) -> Result<()> {
    let inv = 2.0 / eta;
    let keep = sigmoid(inv);
    for i in 0..y.dim() {
        if !rng.bernoulli(keep) {
            y.flip(i);
        }
    }
    y.write_f64(&mut ws.point);
    score.eval_into(&ws.point, &mut ws.score)?;
    check_score(&ws.score)?;
    for i in 0..y.dim() {
        let z = ws.point[i];
        if !rng.bernoulli(sigmoid(inv + 2.0 * z * ws.score[i])) {
            y.flip(i);
        }
    }
    Ok(())
}

fn step_into<S: ScoreFunction + ?Sized>(
    kind: SamplerKind,
    score: &S,
    eta: f64,
    y: &mut SpinVector,
    ws: &mut Workspace,
    rng: &mut RandomStream,
) -> Result<()> {
    match kind {
        SamplerKind::OneStage => one_stage_into(score, eta, y, ws, rng),
        SamplerKind::TwoStage => two_stage_into(score, eta, y, ws, rng),
    }
}

/// One draw from the one-stage kernel: `P(y'_i = 1) = σ(s(y)_i + 2y_i/η)`.
pub fn one_stage_step<S: ScoreFunction + ?Sized>(
    score: &S,
    eta: f64,
    y: &SpinVector,
    rng: &mut RandomStream,
) -> Result<SpinVector> {
    check_eta(eta)?;
    ensure_dim(score.dim(), y.dim())?;
    let mut next = y.clone();
    one_stage_into(score, eta, &mut next, &mut Workspace::new(y.dim()), rng)?;
    Ok(next)
}

/// One draw from the two-stage kernel. Stage one keeps each coordinate with
/// probability `σ(2/η)`; stage two keeps `z_i` with probability
/// `σ(2/η + 2 z_i s(z)_i)`.
pub fn two_stage_step<S: ScoreFunction + ?Sized>(
    score: &S,
    eta: f64,
    y: &SpinVector,
    rng: &mut RandomStream,
) -> Result<SpinVector> {
    check_eta(eta)?;
    ensure_dim(score.dim(), y.dim())?;
    let mut next = y.clone();
    two_stage_into(score, eta, &mut next, &mut Workspace::new(y.dim()), rng)?;
    Ok(next)
}

pub fn kernel_step<S: ScoreFunction + ?Sized>(
    kind: SamplerKind,
    score: &S,
    eta: f64,
    y: &SpinVector,
    rng: &mut RandomStream,
) -> Result<SpinVector> {
    match kind {
        SamplerKind::OneStage => one_stage_step(score, eta, y, rng),
        SamplerKind::TwoStage => two_stage_step(score, eta, y, rng),
    }
}

/// Uniform random vertex.
pub fn random_vertex(dim: usize, rng: &mut RandomStream) -> SpinVector {
    SpinVector::from_fn(dim, |_| rng.bernoulli(0.5))
}

fn initial_state(config: &SamplerConfig, dim: usize, chain: u64) -> Result<SpinVector> {
    match &config.init {
        Some(v) => {
            ensure_dim(dim, v.dim())?;
            Ok(v.clone())
        }
        None => Ok(random_vertex(
            dim,
            &mut RandomStream::fork(config.seed, stream_id(chain, Purpose::Init)),
        )),
    }
}

/// Runs `config.steps` kernel steps of chain `chain`, calling `visit(step,
/// state)` after every step (1-based). Returns the final state.
pub fn run_chain_with<S: ScoreFunction + ?Sized>(
    config: &SamplerConfig,
    score: &S,
    eta: f64,
    chain: usize,
    mut visit: impl FnMut(usize, &SpinVector),
) -> Result<SpinVector> {
    config.validate()?;
    check_eta(eta)?;
    let d = score.dim();
    let mut y = initial_state(config, d, chain as u64)?;
    let mut rng = RandomStream::fork(config.seed, stream_id(chain as u64, Purpose::Kernel));
    let mut ws = Workspace::new(d);
    for t in 1..=config.steps {
        step_into(config.kind, score, eta, &mut y, &mut ws, &mut rng)?;
        visit(t, &y);
    }
    Ok(y)
}

/// Runs one chain and records post-burn-in states every `thin` steps.
pub fn run_chain(config: &SamplerConfig, score: &ScoreOracle, chain: usize) -> Result<ChainTrajectory> {
    let eta = config.eta_for(score.alpha())?;
    let mut steps = Vec::with_capacity(config.record_count());
    let mut states = Vec::with_capacity(config.record_count());
    run_chain_with(config, score, eta, chain, |t, y| {
        if t > config.burn_in && (t - config.burn_in) % config.thin == 0 {
            steps.push(t);
            states.push(y.clone());
        }
    })?;
    Ok(ChainTrajectory {
        chain,
        steps,
        states,
        denoised: None,
    })
}

/// Runs `config.chains` chains in parallel, returned in chain order.
pub fn run_chains(config: &SamplerConfig, score: &ScoreOracle) -> Result<Vec<ChainTrajectory>> {
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(config, score, c))
        .collect()
}

/// Adds the optimal denoiser output of every recorded state.
pub fn denoise_trajectory(traj: &mut ChainTrajectory, score: &ScoreOracle, seed: u64) -> Result<()> {
    let mut rng = RandomStream::fork(seed, stream_id(traj.chain as u64, Purpose::Denoise));
    let denoised = traj
        .states
        .iter()
        .map(|y| optimal_denoise(score, &y.to_f64(), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    traj.denoised = Some(denoised);
    Ok(())
}

/// Walk-jump sampling: run the chain, then denoise its final state.
pub fn walk_jump(config: &SamplerConfig, score: &ScoreOracle, chain: usize) -> Result<(SpinVector, SpinVector)> {
    if !(score.alpha() > 0.0) {
        return Err(Error::ZeroNoise);
    }
    let eta = config.eta_for(score.alpha())?;
    let y = run_chain_with(config, score, eta, chain, |_, _| {})?;
    let mut rng = RandomStream::fork(config.seed, stream_id(chain as u64, Purpose::Denoise));
    let clean = optimal_denoise(score, &y.to_f64(), &mut rng)?;
    Ok((y, clean))
}

/// Sequential walk-jump sampling: draw `y_1..y_m` one at a time, each by a chain on the score of
/// `y_k` given the earlier measurements, then denoise from all of them.
///
/// Stage `k` starts from the final state of stage `k-1` and runs
/// `config.steps` steps at the step size of level `α`. With `m = 1` the
/// output is bit-identical to [`walk_jump`] on the same chain index.
pub fn sequential_wjs(
    config: &SamplerConfig,
    prior: &Prior,
    alpha: NoiseLevel,
    m: usize,
    chain: usize,
) -> Result<(MeasurementSet, SpinVector)> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if alpha.alpha() == 0.0 {
        return Err(Error::ZeroNoise);
    }
    config.validate()?;
    let eta = config.eta_for(alpha.alpha())?;
    let d = prior.dim();
    let base = ScoreOracle::for_prior(prior, alpha)?;
    let mut y = initial_state(config, d, chain as u64)?;
    let mut rng = RandomStream::fork(config.seed, stream_id(chain as u64, Purpose::Kernel));
    let mut ws = Workspace::new(d);
    let mut set = MeasurementSet::new(alpha, d);
    for k in 1..=m {
        let cond = ConditionalScore::new(&base, alpha, k, set.sum().to_vec())?;
        for _ in 0..config.steps {
            step_into(config.kind, &cond, eta, &mut y, &mut ws, &mut rng)?;
        }
        set.push(y.clone())?;
    }
    let mean = multi_posterior_mean(prior, alpha, m, &set)?;
    let mut rng = RandomStream::fork(config.seed, stream_id(chain as u64, Purpose::Denoise));
    let clean = sign_with_ties(mean.as_slice(), &mut rng);
    Ok((set, clean))
}

/// Writes `step,chain,state_index` rows. Above the enumeration cap the state
/// column holds one `+`/`-` character per coordinate instead.
pub fn write_trajectory_csv<W: Write>(mut out: W, trajectories: &[ChainTrajectory]) -> Result<()> {
    writeln!(out, "step,chain,state_index")?;
    for traj in trajectories {
        for (t, y) in traj.steps.iter().zip(&traj.states) {
            if y.dim() <= ENUMERATION_CAP {
                writeln!(out, "{t},{},{}", traj.chain, vertex_index(y)?)?;
            } else {
                writeln!(out, "{t},{},{}", traj.chain, y.to_plus_minus())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::vertex_of;

    fn zero_score(d: usize) -> ScoreOracle {
        ScoreOracle::constant(vec![0.0; d]).unwrap()
    }

    #[test]
    fn one_stage_single_coordinate_probability() {
        // y = +1, s = 0.5, η = 1: P(y' = +1) = σ(2.5)
        let score = ScoreOracle::constant(vec![0.5]).unwrap();
        let y = SpinVector::ones(1);
        let mut rng = RandomStream::fork(3, 0);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| one_stage_step(&score, 1.0, &y, &mut rng).unwrap().is_positive(0))
            .count();
        let p = sigmoid(2.5);
        assert!((p - 0.924_141_8).abs() < 1e-6);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 5.0 * se);
    }

    #[test]
    fn two_stage_zero_score_keeps_with_composed_probability() {
        let score = zero_score(1);
        let y = SpinVector::ones(1);
        let mut rng = RandomStream::fork(4, 0);
        let n = 200_000;
        let kept = (0..n)
            .filter(|_| two_stage_step(&score, 1.0, &y, &mut rng).unwrap().is_positive(0))
            .count();
        let p = sigmoid(2.0).powi(2) + sigmoid(-2.0).powi(2);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((kept as f64 / n as f64 - p).abs() < 5.0 * se);
    }

    #[test]
    fn tiny_step_freezes_chain() {
        let score = ScoreOracle::mixture(5, 1.0, NoiseLevel::new(0.5).unwrap()).unwrap();
        let y = vertex_of(13, 5).unwrap();
        let mut rng = RandomStream::fork(5, 0);
        for kind in [SamplerKind::OneStage, SamplerKind::TwoStage] {
            for _ in 0..100 {
                assert_eq!(kernel_step(kind, &score, 1e-3, &y, &mut rng).unwrap(), y);
            }
        }
    }

    #[test]
    fn rejects_bad_step_size() {
        let score = zero_score(2);
        let y = SpinVector::ones(2);
        let mut rng = RandomStream::fork(0, 0);
        assert!(one_stage_step(&score, 0.0, &y, &mut rng).is_err());
        assert!(two_stage_step(&score, -1.0, &y, &mut rng).is_err());
    }

    #[test]
    fn record_count_and_empty_record() {
        let score = zero_score(3);
        let cfg = SamplerConfig {
            eta: Some(1.0),
            steps: 10,
            burn_in: 3,
            thin: 2,
            ..SamplerConfig::default()
        };
        let t = run_chain(&cfg, &score, 0).unwrap();
        assert_eq!(t.states.len(), 3);
        assert_eq!(t.steps, vec![5, 7, 9]);
        let cfg = SamplerConfig { burn_in: 10, ..cfg };
        assert!(run_chain(&cfg, &score, 0).unwrap().states.is_empty());
    }

    #[test]
    fn config_validation() {
        let bad = SamplerConfig {
            thin: 0,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            burn_in: 5,
            steps: 4,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(SamplerConfig::default().eta_for(0.0).is_err());
        assert_eq!(SamplerConfig::default().eta_for(0.25).unwrap(), 4.0);
    }

    #[test]
    fn parallel_chains_match_sequential_runs() {
        let score = ScoreOracle::mixture(6, 1.0, NoiseLevel::new(0.25).unwrap()).unwrap();
        let cfg = SamplerConfig {
            kind: SamplerKind::TwoStage,
            steps: 200,
            chains: 8,
            seed: 11,
            ..SamplerConfig::default()
        };
        let par = run_chains(&cfg, &score).unwrap();
        for (c, t) in par.iter().enumerate() {
            assert_eq!(*t, run_chain(&cfg, &score, c).unwrap());
        }
    }

    #[test]
    fn dirac_prior_walk_jump_returns_the_atom() {
        let v = SpinVector::from_signs(&[1, -1, -1, 1]).unwrap();
        let prior = Prior::Dirac(v.clone());
        let score = ScoreOracle::for_prior(&prior, NoiseLevel::new(0.4).unwrap()).unwrap();
        let cfg = SamplerConfig {
            steps: 20,
            ..SamplerConfig::default()
        };
        for c in 0..50 {
            assert_eq!(walk_jump(&cfg, &score, c).unwrap().1, v);
        }
    }

    #[test]
    fn single_measurement_sequential_matches_walk_jump() {
        let prior = Prior::mixture(6, 1.0).unwrap();
        let alpha = NoiseLevel::new(0.3).unwrap();
        let score = ScoreOracle::for_prior(&prior, alpha).unwrap();
        let cfg = SamplerConfig {
            kind: SamplerKind::TwoStage,
            steps: 30,
            seed: 9,
            ..SamplerConfig::default()
        };
        for c in 0..100 {
            let (y, clean) = walk_jump(&cfg, &score, c).unwrap();
            let (set, clean_seq) = sequential_wjs(&cfg, &prior, alpha, 1, c).unwrap();
            assert_eq!(set.measurements()[0], y);
            assert_eq!(clean_seq, clean);
        }
    }

    #[test]
    fn sequential_rejects_zero_measurements() {
        let prior = Prior::mixture(3, 1.0).unwrap();
        let cfg = SamplerConfig::default();
        assert!(sequential_wjs(&cfg, &prior, NoiseLevel::new(0.3).unwrap(), 0, 0).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let t = ChainTrajectory {
            chain: 2,
            steps: vec![1, 2],
            states: vec![vertex_of(5, 3).unwrap(), vertex_of(0, 3).unwrap()],
            denoised: None,
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[t]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,chain,state_index\n1,2,5\n2,2,0\n");
    }
}
