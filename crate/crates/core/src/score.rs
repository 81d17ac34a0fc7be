//! Score functions `s(y) = ∇ log q_α(y)` on all of `R^d`, the denoisers built
//! from them, and the score bounds `β₁ ≥ ‖s‖_∞`, `β₂ ≥ Lip_{1→∞}(s)`.
//!
//! The binary Tweedie–Miyasawa identity `E[x|y] = s(y)/α` ties the score to
//! the posterior mean, so every denoiser here is a thin wrapper over a
//! [`ScoreOracle`].

use crate::error::{ensure_cap, ensure_dim, Error, Result};
use crate::hypercube::{index_sign, RelaxedVector, SpinVector, ENUMERATION_CAP};
use crate::learning::DenoiserModel;
use crate::math::{log_cosh, log_sum_exp, sigmoid, TIE_TOLERANCE};
use crate::noise::{MeasurementSet, NoiseLevel};
use crate::prior::Prior;
use crate::rng::RandomStream;
use std::sync::Arc;

/// Anything that evaluates a score vector at a real point.
pub trait ScoreFunction: Sync {
    fn dim(&self) -> usize;

    /// Writes `s(y)` into `out`. Both slices have length [`dim`](Self::dim).
    fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<()>;

    fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(y, &mut out)?;
        Ok(out)
    }
}

/// Exact score of `q_α` by summing over the prior support.
#[derive(Clone, Debug)]
pub struct EnumeratedScore {
    prior: Prior,
    alpha: f64,
    dim: usize,
    log_p: Vec<f64>,
    signs: Vec<f64>,
}

impl EnumeratedScore {
    pub fn new(prior: Prior, alpha: NoiseLevel) -> Result<Self> {
        let dim = prior.dim();
        ensure_cap("score enumeration", dim, ENUMERATION_CAP)?;
        let table = prior.log_table()?;
        let mut log_p = Vec::new();
        let mut signs = Vec::new();
        for (idx, lp) in table.into_iter().enumerate() {
            if lp.is_finite() {
                log_p.push(lp);
                signs.extend((0..dim).map(|i| index_sign(idx, i)));
            }
        }
        Ok(Self {
            prior,
            alpha: alpha.alpha(),
            dim,
            log_p,
            signs,
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    /// Posterior mean `E[x | tilt y]` with weights `p(x) e^{α xᵀy}`.
    fn posterior_mean_into(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let terms: Vec<f64> = self
            .log_p
            .iter()
            .zip(self.signs.chunks_exact(d))
            .map(|(lp, x)| lp + self.alpha * dot(x, y))
            .collect();
        let lse = log_sum_exp(&terms);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (t, x) in terms.iter().zip(self.signs.chunks_exact(d)) {
            let w = (t - lse).exp();
            for (o, xi) in out.iter_mut().zip(x) {
                *o += w * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Which closed form or table backs a [`ScoreOracle`].
#[derive(Clone, Debug)]
pub enum ScoreKind {
    Enumerated(EnumeratedScore),
    AnalyticIndependent { beta: Vec<f64> },
    AnalyticMixture { dim: usize, beta: f64 },
    Constant { gamma: Vec<f64> },
    Learned { model: Arc<DenoiserModel> },
}

/// A score function together with its noise level and regularity bounds.
#[derive(Clone, Debug)]
pub struct ScoreOracle {
    kind: ScoreKind,
    alpha: f64,
    beta1: f64,
    beta2: f64,
}

impl ScoreOracle {
    pub fn enumerated(prior: &Prior, alpha: NoiseLevel) -> Result<Self> {
        let a = alpha.alpha();
        Ok(Self {
            kind: ScoreKind::Enumerated(EnumeratedScore::new(prior.clone(), alpha)?),
            alpha: a,
            beta1: a,
            beta2: a * a,
        })
    }

    pub fn independent(beta: Vec<f64>, alpha: NoiseLevel) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidArgument("empty beta".into()));
        }
        let a = alpha.alpha();
        Ok(Self {
            kind: ScoreKind::AnalyticIndependent { beta },
            alpha: a,
            beta1: a,
            beta2: a * a,
        })
    }

    pub fn mixture(dim: usize, beta: f64, alpha: NoiseLevel) -> Result<Self> {
        Prior::mixture(dim, beta)?;
        let a = alpha.alpha();
        Ok(Self {
            kind: ScoreKind::AnalyticMixture { dim, beta },
            alpha: a,
            beta1: a,
            beta2: a * a,
        })
    }

    /// `s ≡ γ`; bounds `(‖γ‖_∞, 0)`. Carries no noise level.
    pub fn constant(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidArgument("empty gamma".into()));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gamma"));
        }
        let beta1 = gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        Ok(Self {
            kind: ScoreKind::Constant { gamma },
            alpha: 0.0,
            beta1,
            beta2: 0.0,
        })
    }

    /// Score of a trained denoiser. `β₂` is estimated by a sampled audit of
    /// 10^4 random pairs and carries no guarantee.
    pub fn learned(model: Arc<DenoiserModel>, audit_seed: u64) -> Result<Self> {
        let level = model.effective_alpha();
        let mut oracle = Self {
            kind: ScoreKind::Learned { model },
            alpha: level,
            beta1: level,
            beta2: f64::NAN,
        };
        let mut rng = RandomStream::fork(audit_seed, 0);
        oracle.beta2 = estimate_lipschitz(&oracle, LIPSCHITZ_AUDIT_PAIRS, &mut rng)?;
        Ok(oracle)
    }

    /// Closed form when one exists, otherwise enumeration.
    pub fn for_prior(prior: &Prior, alpha: NoiseLevel) -> Result<Self> {
        match prior {
            Prior::Independent { beta } => Self::independent(beta.clone(), alpha),
            Prior::MixtureTwoSymmetric { dim, beta } => Self::mixture(*dim, *beta, alpha),
            _ => Self::enumerated(prior, alpha),
        }
    }

    /// The same prior's score at another noise level. Only available for
    /// prior-backed variants.
    pub fn at_level(&self, alpha: NoiseLevel) -> Result<Self> {
        match &self.kind {
            ScoreKind::Enumerated(e) => Self::enumerated(e.prior(), alpha),
            ScoreKind::AnalyticIndependent { beta } => Self::independent(beta.clone(), alpha),
            ScoreKind::AnalyticMixture { dim, beta } => Self::mixture(*dim, *beta, alpha),
            ScoreKind::Constant { .. } | ScoreKind::Learned { .. } => Err(Error::InvalidArgument(
                "only prior-backed scores can be re-evaluated at another noise level".into(),
            )),
        }
    }

    pub fn kind(&self) -> &ScoreKind {
        &self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(β₁, β₂)`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.beta1, self.beta2)
    }

    /// Prior mean, the `α → 0` limit of the posterior mean, when the prior is
    /// known.
    pub fn prior_mean(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ScoreKind::Enumerated(e) => e.prior().mean().ok(),
            ScoreKind::AnalyticIndependent { beta } => Some(beta.iter().map(|b| b.tanh()).collect()),
            ScoreKind::AnalyticMixture { dim, .. } => Some(vec![0.0; *dim]),
            _ => None,
        }
    }
}

impl ScoreFunction for ScoreOracle {
    fn dim(&self) -> usize {
        match &self.kind {
            ScoreKind::Enumerated(e) => e.dim,
            ScoreKind::AnalyticIndependent { beta } => beta.len(),
            ScoreKind::AnalyticMixture { dim, .. } => *dim,
            ScoreKind::Constant { gamma } => gamma.len(),
            ScoreKind::Learned { model } => model.dim(),
        }
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        ensure_dim(d, y.len())?;
        ensure_dim(d, out.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score input"));
        }
        let a = self.alpha;
        match &self.kind {
            ScoreKind::Enumerated(e) => {
                e.posterior_mean_into(y, out);
                out.iter_mut().for_each(|o| *o *= a);
            }
            ScoreKind::AnalyticIndependent { beta } => {
                for ((o, b), yi) in out.iter_mut().zip(beta).zip(y) {
                    *o = a * (b + a * yi).tanh();
                }
            }
            ScoreKind::AnalyticMixture { beta, .. } => mixture_into(*beta, a, y, out),
            ScoreKind::Constant { gamma } => out.copy_from_slice(gamma),
            ScoreKind::Learned { model } => {
                model.posterior_mean_into(y, out)?;
                out.iter_mut().for_each(|o| *o *= a);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score output"));
        }
        Ok(())
    }
}

fn mixture_into(beta: f64, alpha: f64, y: &[f64], out: &mut [f64]) {
    // W± = Π cosh(β ± α y_i), weights compared in log space.
    let log_plus: f64 = y.iter().map(|yi| log_cosh(beta + alpha * yi)).sum();
    let log_minus: f64 = y.iter().map(|yi| log_cosh(beta - alpha * yi)).sum();
    let w_plus = sigmoid(log_plus - log_minus);
    let w_minus = sigmoid(log_minus - log_plus);
    for (o, yi) in out.iter_mut().zip(y) {
        *o = alpha * (w_plus * (beta + alpha * yi).tanh() - w_minus * (beta - alpha * yi).tanh());
    }
}

/// `∇ log q_α(y)` by enumeration over the prior support.
pub fn score_enumerated(prior: &Prior, alpha: NoiseLevel, y: &[f64]) -> Result<Vec<f64>> {
    ScoreOracle::enumerated(prior, alpha)?.eval(y)
}

/// Closed form for `p(x) ∝ e^{βᵀx}`: `s(y)_i = α tanh(β_i + α y_i)`.
pub fn score_independent(beta: &[f64], alpha: NoiseLevel, y: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(beta.len(), y.len())?;
    let a = alpha.alpha();
    Ok(beta.iter().zip(y).map(|(b, yi)| a * (b + a * yi).tanh()).collect())
}

/// Closed form for the symmetric two-component mixture, valid on all of `R^d`.
pub fn score_mixture(beta: f64, alpha: NoiseLevel, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    mixture_into(beta, alpha.alpha(), y, &mut out);
    out
}

/// `E[x|y] = s(y)/α`. Fails with [`Error::ZeroNoise`] at `α = 0`, where the
/// posterior mean is the prior mean ([`ScoreOracle::prior_mean`]).
pub fn posterior_mean(score: &ScoreOracle, y: &[f64]) -> Result<RelaxedVector> {
    if score.alpha() == 0.0 {
        return Err(Error::ZeroNoise);
    }
    let mut s = score.eval(y)?;
    let a = score.alpha();
    s.iter_mut().for_each(|v| *v = (*v / a).clamp(-1.0, 1.0));
    RelaxedVector::new(s)
}

/// Coordinatewise sign; coordinates within [`TIE_TOLERANCE`] of zero take a
/// fair coin, one draw per tied coordinate.
pub fn sign_with_ties(mean: &[f64], rng: &mut RandomStream) -> SpinVector {
    SpinVector::from_fn(mean.len(), |i| {
        let m = mean[i];
        if m > TIE_TOLERANCE {
            true
        } else if m < -TIE_TOLERANCE {
            false
        } else {
            rng.bernoulli(0.5)
        }
    })
}

/// Hamming-optimal denoiser `sign(E[x|y])`.
pub fn optimal_denoise(score: &ScoreOracle, y: &[f64], rng: &mut RandomStream) -> Result<SpinVector> {
    let mean = posterior_mean(score, y)?;
    Ok(sign_with_ties(mean.as_slice(), rng))
}

/// `E[x | y_1..y_m] = ∇ log q_{mα}(ȳ) / (mα)`.
pub fn multi_posterior_mean(
    prior: &Prior,
    alpha: NoiseLevel,
    m: usize,
    ys: &MeasurementSet,
) -> Result<RelaxedVector> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if ys.len() != m {
        return Err(Error::InvalidArgument(format!(
            "expected {m} measurements, found {}",
            ys.len()
        )));
    }
    ensure_dim(prior.dim(), ys.dim())?;
    let oracle = ScoreOracle::for_prior(prior, alpha.scaled(m))?;
    posterior_mean(&oracle, ys.running_mean()?.as_slice())
}

/// Score of `y_k` given `y_1..y_{k-1}`:
/// `∇_{y_k} log p(y_1..y_k) = (1/k) ∇ log q_{kα}(ȳ_{1:k})`.
///
/// Wraps an oracle already at level `kα` and the fixed sum of earlier
/// measurements.
#[derive(Clone, Debug)]
pub struct ConditionalScore {
    level_score: ScoreOracle,
    k: usize,
    previous_sum: Vec<f64>,
}

impl ConditionalScore {
    pub fn new(base: &ScoreOracle, base_alpha: NoiseLevel, k: usize, previous_sum: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("stage index k must be at least 1".into()));
        }
        ensure_dim(base.dim(), previous_sum.len())?;
        Ok(Self {
            level_score: base.at_level(base_alpha.scaled(k))?,
            k,
            previous_sum,
        })
    }

    pub fn stage(&self) -> usize {
        self.k
    }
}

impl ScoreFunction for ConditionalScore {
    fn dim(&self) -> usize {
        self.previous_sum.len()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        ensure_dim(self.dim(), y.len())?;
        let k = self.k as f64;
        let mean: Vec<f64> = self
            .previous_sum
            .iter()
            .zip(y)
            .map(|(s, yi)| (s + yi) / k)
            .collect();
        self.level_score.eval_into(&mean, out)?;
        out.iter_mut().for_each(|o| *o /= k);
        Ok(())
    }
}

/// One-shot form of [`ConditionalScore`]: `partial_sum` is `y_1 + ... + y_k`
/// with the candidate `y_k` already included.
pub fn sequential_conditional_score(
    prior: &Prior,
    alpha: NoiseLevel,
    k: usize,
    partial_sum: &[f64],
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("stage index k must be at least 1".into()));
    }
    ensure_dim(prior.dim(), partial_sum.len())?;
    let oracle = ScoreOracle::for_prior(prior, alpha.scaled(k))?;
    let kf = k as f64;
    let mean: Vec<f64> = partial_sum.iter().map(|s| s / kf).collect();
    let mut s = oracle.eval(&mean)?;
    s.iter_mut().for_each(|v| *v /= kf);
    Ok(s)
}

/// `(β₁, β₂)` carried by the oracle.
pub fn score_bounds(score: &ScoreOracle) -> (f64, f64) {
    score.bounds()
}

/// Number of random pairs used by the Lipschitz audit.
pub const LIPSCHITZ_AUDIT_PAIRS: usize = 10_000;

/// Largest sampled ratio `‖s(y) - s(y')‖_∞ / ‖y - y'‖_1` over random pairs in
/// `[-1,1]^d`. Half of the pairs are nearby points, which probe the local
/// slope where the maximum is attained.
pub fn estimate_lipschitz(score: &dyn ScoreFunction, pairs: usize, rng: &mut RandomStream) -> Result<f64> {
    let d = score.dim();
    let mut y = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut sy = vec![0.0; d];
    let mut sz = vec![0.0; d];
    let mut best = 0.0f64;
    for p in 0..pairs {
        for v in y.iter_mut() {
            *v = 2.0 * rng.uniform() - 1.0;
        }
        if p % 2 == 0 {
            for v in z.iter_mut() {
                *v = 2.0 * rng.uniform() - 1.0;
            }
        } else {
            for (zi, yi) in z.iter_mut().zip(&y) {
                *zi = (yi + 0.02 * (2.0 * rng.uniform() - 1.0)).clamp(-1.0, 1.0);
            }
        }
        let dist: f64 = y.iter().zip(&z).map(|(a, b)| (a - b).abs()).sum();
        if dist == 0.0 {
            continue;
        }
        score.eval_into(&y, &mut sy)?;
        score.eval_into(&z, &mut sz)?;
        let diff = sy.iter().zip(&sz).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        best = best.max(diff / dist);
    }
    Ok(best)
}
