//! Probability mass functions on the hypercube: exact evaluation,
//! enumeration and exact sampling.

use crate::distribution::DenseDistribution;
use crate::error::{ensure_cap, ensure_dim, Error, Result};
use crate::hypercube::{vertex_index, vertex_of, SpinVector, ENUMERATION_CAP};
use crate::math::{log_cosh, log_two_cosh, sigmoid};
use crate::rng::RandomStream;

/// A prior `p(x)` on `{-1,1}^d`.
#[derive(Clone, Debug, PartialEq)]
pub enum Prior {
    /// `p(x) ∝ exp(βᵀx)`.
    Independent { beta: Vec<f64> },
    /// Equal mixture of the tilts `exp(±β 1ᵀx)`, symmetric under `x -> -x`.
    MixtureTwoSymmetric { dim: usize, beta: f64 },
    /// Arbitrary law given as a dense table.
    Tabular(DenseDistribution),
    /// Point mass.
    Dirac(SpinVector),
}

impl Prior {
    pub fn uniform(dim: usize) -> Self {
        Prior::Independent {
            beta: vec![0.0; dim],
        }
    }

    pub fn independent(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidArgument("empty beta".into()));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("beta"));
        }
        Ok(Prior::Independent { beta })
    }

    pub fn mixture(dim: usize, beta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mixture beta must be finite and nonnegative, got {beta}"
            )));
        }
        Ok(Prior::MixtureTwoSymmetric { dim, beta })
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::Independent { beta } => beta.len(),
            Prior::MixtureTwoSymmetric { dim, .. } => *dim,
            Prior::Tabular(t) => t.dim(),
            Prior::Dirac(v) => v.dim(),
        }
    }

    /// `log p(x)`; `-inf` off the support.
    pub fn log_pmf(&self, x: &SpinVector) -> Result<f64> {
        ensure_dim(self.dim(), x.dim())?;
        Ok(match self {
            Prior::Independent { beta } => beta
                .iter()
                .zip(x.signs())
                .map(|(b, s)| b * s - log_two_cosh(*b))
                .sum(),
            Prior::MixtureTwoSymmetric { dim, beta } => {
                let total: f64 = x.signs().sum();
                // ½e^{βS} + ½e^{-βS} = cosh(βS)
                log_cosh(beta * total) - *dim as f64 * log_two_cosh(*beta)
            }
            Prior::Tabular(t) => t.prob(vertex_index(x)?).ln(),
            Prior::Dirac(v) => {
                if v == x {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        })
    }

    /// Exact `p(x)`.
    pub fn pmf(&self, x: &SpinVector) -> Result<f64> {
        Ok(self.log_pmf(x)?.exp())
    }

    /// `log p` at every vertex, in index order.
    pub fn log_table(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        ensure_cap("prior enumeration", d, ENUMERATION_CAP)?;
        match self {
            Prior::Tabular(t) => Ok(t.probs().iter().map(|p| p.ln()).collect()),
            Prior::Dirac(v) => {
                let mut out = vec![f64::NEG_INFINITY; 1 << d];
                out[vertex_index(v)?] = 0.0;
                Ok(out)
            }
            _ => (0..1usize << d)
                .map(|i| self.log_pmf(&vertex_of(i, d)?))
                .collect(),
        }
    }

    /// The prior as a dense table over all `2^d` vertices.
    pub fn enumerate(&self) -> Result<DenseDistribution> {
        let d = self.dim();
        ensure_cap("prior enumeration", d, ENUMERATION_CAP)?;
        match self {
            Prior::Tabular(t) => Ok(t.clone()),
            Prior::Dirac(v) => DenseDistribution::one_hot(d, vertex_index(v)?),
            Prior::MixtureTwoSymmetric { beta, .. } if *beta == 0.0 => DenseDistribution::uniform(d),
            Prior::Independent { beta } if beta.iter().all(|&b| b == 0.0) => DenseDistribution::uniform(d),
            _ => {
                let probs = self.log_table()?.into_iter().map(f64::exp).collect();
                DenseDistribution::new(d, probs)
            }
        }
    }

    /// Draws an exact sample.
    pub fn sample(&self, rng: &mut RandomStream) -> SpinVector {
        match self {
            Prior::Independent { beta } => {
                SpinVector::from_fn(beta.len(), |i| rng.bernoulli(sigmoid(2.0 * beta[i])))
            }
            Prior::MixtureTwoSymmetric { dim, beta } => {
                let plus_component = rng.bernoulli(0.5);
                let p_agree = sigmoid(2.0 * beta);
                SpinVector::from_fn(*dim, |_| rng.bernoulli(p_agree) == plus_component)
            }
            Prior::Tabular(t) => {
                let cdf = t.cdf();
                let idx = t.sample_index(&cdf, rng.uniform());
                vertex_of(idx, t.dim()).expect("tabular dimension is within the cap")
            }
            Prior::Dirac(v) => v.clone(),
        }
    }

    /// A sampler that amortizes the CDF of tabular priors over many draws.
    pub fn sampler(&self) -> PriorSampler<'_> {
        let cdf = match self {
            Prior::Tabular(t) => Some(t.cdf()),
            _ => None,
        };
        PriorSampler { prior: self, cdf }
    }

    /// Prior mean `E[x]`.
    pub fn mean(&self) -> Result<Vec<f64>> {
        match self {
            Prior::Independent { beta } => Ok(beta.iter().map(|b| b.tanh()).collect()),
            Prior::MixtureTwoSymmetric { dim, .. } => Ok(vec![0.0; *dim]),
            Prior::Dirac(v) => Ok(v.to_f64()),
            Prior::Tabular(t) => {
                let d = t.dim();
                let mut mean = vec![0.0; d];
                for (idx, p) in t.probs().iter().enumerate() {
                    for (i, m) in mean.iter_mut().enumerate() {
                        *m += p * crate::hypercube::index_sign(idx, i);
                    }
                }
                Ok(mean)
            }
        }
    }
}

/// See [`Prior::sampler`].
pub struct PriorSampler<'a> {
    prior: &'a Prior,
    cdf: Option<Vec<f64>>,
}

impl PriorSampler<'_> {
    pub fn sample(&self, rng: &mut RandomStream) -> SpinVector {
        match (self.prior, &self.cdf) {
            (Prior::Tabular(t), Some(cdf)) => {
                let idx = t.sample_index(cdf, rng.uniform());
                vertex_of(idx, t.dim()).expect("tabular dimension is within the cap")
            }
            (p, _) => p.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn uniform_independent_pmf() {
        let p = Prior::uniform(3);
        for i in 0..8 {
            assert!((p.pmf(&vertex_of(i, 3).unwrap()).unwrap() - 0.125).abs() < 1e-15);
        }
        let e = Prior::uniform(2).enumerate().unwrap();
        assert_eq!(e.probs(), &[0.25; 4]);
    }

    #[test]
    fn mixture_pmf_matches_brute_force_normalization() {
        // Unnormalized ½e^{β1ᵀx} + ½e^{-β1ᵀx}, normalized by enumeration.
        let (d, beta) = (2, 1.0);
        let weight = |x: &SpinVector| {
            let s: f64 = x.signs().sum();
            0.5 * (beta * s).exp() + 0.5 * (-beta * s).exp()
        };
        let z: f64 = (0..4).map(|i| weight(&vertex_of(i, d).unwrap())).sum();
        let p = Prior::mixture(d, beta).unwrap();
        let x = SpinVector::ones(2);
        assert!((p.pmf(&x).unwrap() - weight(&x) / z).abs() < 1e-15);
    }

    #[test]
    fn mixture_is_sign_symmetric_and_normalized() {
        for d in 1..=8 {
            for beta in [0.0, 0.5, 1.0, 2.0] {
                let p = Prior::mixture(d, beta).unwrap();
                let e = p.enumerate().unwrap();
                assert!((e.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let mask = (1 << d) - 1;
                for i in 0..1 << d {
                    assert!((e.prob(i) - e.prob(i ^ mask)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn mixture_with_zero_beta_is_uniform() {
        let e = Prior::mixture(5, 0.0).unwrap().enumerate().unwrap();
        let u = 1.0 / 32.0;
        assert!(e.probs().iter().all(|&p| p == u));
    }

    #[test]
    fn independent_normalizer() {
        let beta = vec![0.3, -1.2, 2.0];
        let p = Prior::independent(beta.clone()).unwrap();
        let z: f64 = beta.iter().map(|b| 2.0 * b.cosh()).product();
        for i in 0..8 {
            let x = vertex_of(i, 3).unwrap();
            let dot: f64 = beta.iter().zip(x.signs()).map(|(b, s)| b * s).sum();
            assert!((p.pmf(&x).unwrap() - dot.exp() / z).abs() < 1e-15);
        }
    }

    #[test]
    fn dirac_enumerates_and_samples_one_hot() {
        let v = SpinVector::from_signs(&[1, -1, 1]).unwrap();
        let p = Prior::Dirac(v.clone());
        let e = p.enumerate().unwrap();
        assert_eq!(e.prob(5), 1.0);
        let mut r = RandomStream::fork(0, 0);
        for _ in 0..100 {
            assert_eq!(p.sample(&mut r), v);
        }
    }

    #[test]
    fn pmf_dimension_mismatch() {
        let p = Prior::uniform(3);
        assert!(p.pmf(&SpinVector::ones(4)).is_err());
    }

    #[test]
    fn uniform_samples_are_centered() {
        let p = Prior::uniform(4);
        let mut r = RandomStream::fork(5, 0);
        let n = 100_000;
        let mut sums = [0.0; 4];
        for _ in 0..n {
            let x = p.sample(&mut r);
            for (i, s) in sums.iter_mut().enumerate() {
                *s += x.sign(i);
            }
        }
        let tol = 4.0 / (n as f64).sqrt();
        assert!(sums.iter().all(|s| (s / n as f64).abs() <= tol));
    }

    #[test]
    fn tabular_mean() {
        let t = DenseDistribution::new(1, vec![0.25, 0.75]).unwrap();
        assert_eq!(Prior::Tabular(t).mean().unwrap(), vec![0.5]);
    }
}
