//! The Bernoulli sign-flip channel, the smoothed law `q_α`, multi-measurement
//! bookkeeping and the Gaussian comparison channel.

use crate::distribution::DenseDistribution;
use crate::error::{ensure_cap, ensure_dim, Error, Result};
use crate::hypercube::{index_distance, RelaxedVector, SpinVector, ENUMERATION_CAP};
use crate::math::{log_sum_exp, log_two_cosh, sigmoid};
use crate::prior::Prior;
use crate::rng::RandomStream;
use serde::{Deserialize, Serialize};

/// Noise parameter `α ≥ 0`: each coordinate is kept with probability `σ(2α)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise level must be finite and nonnegative, got {alpha}"
            )));
        }
        Ok(Self(alpha))
    }

    #[inline]
    pub fn alpha(self) -> f64 {
        self.0
    }

    /// Probability that a coordinate is flipped, `σ(-2α)`.
    #[inline]
    pub fn flip_probability(self) -> f64 {
        sigmoid(-2.0 * self.0)
    }

    /// The level reached by averaging `m` measurements, `mα`.
    pub fn scaled(self, m: usize) -> Self {
        Self(self.0 * m as f64)
    }
}

/// `y = x ∘ ε` with independent `P(ε_i = 1) = σ(2α)`.
pub fn bernoulli_corrupt(x: &SpinVector, alpha: NoiseLevel, rng: &mut RandomStream) -> SpinVector {
    let flip = alpha.flip_probability();
    let mut y = x.clone();
    for i in 0..x.dim() {
        if rng.bernoulli(flip) {
            y.flip(i);
        }
    }
    y
}

/// `y = x + N(0, I/α)`.
pub fn gaussian_corrupt(x: &SpinVector, alpha: NoiseLevel, rng: &mut RandomStream) -> Result<Vec<f64>> {
    if alpha.alpha() == 0.0 {
        return Err(Error::ZeroNoise);
    }
    let sd = alpha.alpha().recip().sqrt();
    Ok(x.signs().map(|s| s + sd * rng.standard_normal()).collect())
}

/// Exact law of the corrupted vertex:
/// `q_α(y) = (2 cosh α)^{-d} Σ_x p(x) e^{α xᵀy}`, in log space.
pub fn noisy_pmf(prior: &Prior, alpha: NoiseLevel) -> Result<DenseDistribution> {
    let d = prior.dim();
    ensure_cap("noisy law enumeration", d, ENUMERATION_CAP)?;
    let a = alpha.alpha();
    let log_p = prior.log_table()?;
    let support: Vec<(usize, f64)> = log_p
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .map(|(i, &l)| (i, l))
        .collect();
    let norm = d as f64 * log_two_cosh(a);
    let n = 1usize << d;
    let mut terms = vec![0.0; support.len()];
    let probs = (0..n)
        .map(|y| {
            for (t, &(x, lp)) in terms.iter_mut().zip(&support) {
                // xᵀy = d - 2 ℓ(x, y)
                let dot = d as f64 - 2.0 * index_distance(x, y) as f64;
                *t = lp + a * dot;
            }
            (log_sum_exp(&terms) - norm).exp()
        })
        .collect();
    DenseDistribution::new(d, probs)
}

/// `m` measurements of the same clean vector at a common noise level.
#[derive(Clone, Debug)]
pub struct MeasurementSet {
    alpha: NoiseLevel,
    dim: usize,
    measurements: Vec<SpinVector>,
    sum: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(alpha: NoiseLevel, dim: usize) -> Self {
        Self {
            alpha,
            dim,
            measurements: Vec::new(),
            sum: vec![0.0; dim],
        }
    }

    pub fn from_measurements(alpha: NoiseLevel, measurements: Vec<SpinVector>) -> Result<Self> {
        let first = measurements
            .first()
            .ok_or_else(|| Error::InvalidArgument("no measurements".into()))?;
        let mut set = Self::new(alpha, first.dim());
        for y in measurements {
            set.push(y)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, y: SpinVector) -> Result<()> {
        ensure_dim(self.dim, y.dim())?;
        for (s, v) in self.sum.iter_mut().zip(y.signs()) {
            *s += v;
        }
        self.measurements.push(y);
        Ok(())
    }

    pub fn alpha(&self) -> NoiseLevel {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn measurements(&self) -> &[SpinVector] {
        &self.measurements
    }

    /// Coordinate sums `y_1 + ... + y_m` (exact small integers).
    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    /// Running mean `ȳ_{1:m}`.
    pub fn running_mean(&self) -> Result<RelaxedVector> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("no measurements".into()));
        }
        let m = self.len() as f64;
        RelaxedVector::new(self.sum.iter().map(|s| s / m).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::{hamming_loss, vertex_of};

    #[test]
    fn flip_probabilities() {
        assert_eq!(NoiseLevel::new(0.0).unwrap().flip_probability(), 0.5);
        let p = NoiseLevel::new(1.0).unwrap().flip_probability();
        assert!((p - 0.119_202_922_022_117_57).abs() < 1e-15);
        assert!(NoiseLevel::new(-0.1).is_err());
        assert!(NoiseLevel::new(f64::NAN).is_err());
    }

    #[test]
    fn high_alpha_rarely_flips() {
        let alpha = NoiseLevel::new(10.0).unwrap();
        let x = SpinVector::ones(16);
        let mut r = RandomStream::fork(1, 2);
        let flips: usize = (0..10_000)
            .map(|_| hamming_loss(&x, &bernoulli_corrupt(&x, alpha, &mut r)).unwrap())
            .sum();
        assert!(flips as f64 / 160_000.0 <= 1e-3);
    }

    #[test]
    fn zero_alpha_flips_half() {
        let alpha = NoiseLevel::new(0.0).unwrap();
        let x = SpinVector::ones(10);
        let mut r = RandomStream::fork(2, 2);
        let n = 20_000;
        let flips: usize = (0..n)
            .map(|_| hamming_loss(&x, &bernoulli_corrupt(&x, alpha, &mut r)).unwrap())
            .sum();
        let rate = flips as f64 / (10 * n) as f64;
        assert!((rate - 0.5).abs() < 4.0 * (0.25 / (10 * n) as f64).sqrt());
    }

    #[test]
    fn single_coordinate_channel() {
        let prior = Prior::Dirac(SpinVector::ones(1));
        let q = noisy_pmf(&prior, NoiseLevel::new(1.0).unwrap()).unwrap();
        assert!((q.prob(1) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!((q.prob(0) - 0.119_202_922_022_117_57).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_gives_uniform() {
        let prior = Prior::mixture(5, 2.0).unwrap();
        let q = noisy_pmf(&prior, NoiseLevel::new(0.0).unwrap()).unwrap();
        assert!(q.probs().iter().all(|p| (p - 1.0 / 32.0).abs() < 1e-15));
    }

    #[test]
    fn large_alpha_recovers_prior() {
        let prior = Prior::mixture(6, 0.7).unwrap();
        let q = noisy_pmf(&prior, NoiseLevel::new(12.0).unwrap()).unwrap();
        let p = prior.enumerate().unwrap();
        assert!(q.total_variation(&p).unwrap() <= 1e-4);
    }

    /// Channel route: apply the 2x2 flip kernel along every coordinate axis
    /// of the dense prior. Independent of the tilted-sum form.
    fn noisy_by_channel(prior: &Prior, alpha: f64) -> Vec<f64> {
        let d = prior.dim();
        let mut v = prior.enumerate().unwrap().probs().to_vec();
        let keep = sigmoid(2.0 * alpha);
        let flip = sigmoid(-2.0 * alpha);
        for i in 0..d {
            let bit = 1 << i;
            for r in 0..1usize << d {
                if r & bit == 0 {
                    let (a, b) = (v[r], v[r | bit]);
                    v[r] = keep * a + flip * b;
                    v[r | bit] = flip * a + keep * b;
                }
            }
        }
        v
    }

    #[test]
    fn tilted_sum_matches_channel_composition() {
        let priors = [
            Prior::mixture(6, 1.0).unwrap(),
            Prior::independent(vec![0.2, -0.4, 1.0, 0.0]).unwrap(),
            Prior::Dirac(vertex_of(11, 5).unwrap()),
        ];
        for prior in &priors {
            for alpha in [0.0, 0.25, 1.0, 4.0] {
                let q = noisy_pmf(prior, NoiseLevel::new(alpha).unwrap()).unwrap();
                assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (a, b) in q.probs().iter().zip(noisy_by_channel(prior, alpha)) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn independent_prior_noisy_law_is_independent_with_gamma() {
        // tanh γ_i = tanh α · tanh β_i
        let beta = vec![0.5, -1.0, 2.0];
        let alpha = 0.7f64;
        let prior = Prior::independent(beta.clone()).unwrap();
        let q = noisy_pmf(&prior, NoiseLevel::new(alpha).unwrap()).unwrap();
        let gamma: Vec<f64> = beta.iter().map(|b| (alpha.tanh() * b.tanh()).atanh()).collect();
        let induced = Prior::independent(gamma).unwrap().enumerate().unwrap();
        for (a, b) in q.probs().iter().zip(induced.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_variance() {
        let alpha = NoiseLevel::new(1.0).unwrap();
        let x = SpinVector::minus_ones(1);
        let mut r = RandomStream::fork(4, 0);
        let n = 100_000;
        let ys: Vec<f64> = (0..n).map(|_| gaussian_corrupt(&x, alpha, &mut r).unwrap()[0]).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() <= 0.05);
        assert!(gaussian_corrupt(&x, NoiseLevel::new(0.0).unwrap(), &mut r).is_err());
    }

    #[test]
    fn gaussian_low_noise_limit() {
        let alpha = NoiseLevel::new(1e6).unwrap();
        let x = SpinVector::from_signs(&[1, -1, 1, 1]).unwrap();
        let mut r = RandomStream::fork(5, 0);
        let close = (0..1000)
            .filter(|_| {
                let y = gaussian_corrupt(&x, alpha, &mut r).unwrap();
                y.iter().zip(x.signs()).all(|(a, b)| (a - b).abs() < 0.01)
            })
            .count();
        assert!(close >= 990);
    }

    #[test]
    fn measurement_set_mean() {
        let alpha = NoiseLevel::new(0.5).unwrap();
        let ys = vec![
            SpinVector::from_signs(&[1, 1]).unwrap(),
            SpinVector::from_signs(&[1, -1]).unwrap(),
            SpinVector::from_signs(&[-1, -1]).unwrap(),
        ];
        let set = MeasurementSet::from_measurements(alpha, ys).unwrap();
        assert_eq!(set.sum(), &[1.0, -1.0]);
        let mean = set.running_mean().unwrap();
        assert!((mean.as_slice()[0] - 1.0 / 3.0).abs() < 1e-15);
        let mut set = set;
        assert!(set.push(SpinVector::ones(3)).is_err());
    }
}
