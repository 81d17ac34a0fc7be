use crate::distribution::DenseDistribution;
use crate::error::{ensure_cap, ensure_dim, Error, Result};
use crate::hypercube::{index_sign, product_law_pairs};
use crate::math::{log_sum_exp, log_two_cosh, TIE_TOLERANCE};
use crate::noise::NoiseLevel;
use crate::prior::Prior;
use crate::score::{ScoreFunction, ScoreOracle};
use rayon::prelude::*;

use super::transport::TRANSPORT_CAP;

/// Largest number of sum vectors `(m+1)^d` enumerated.
pub const SUM_GRID_CAP: usize = 1 << 24;
const BLOCK: usize = 4096;
const MASS_TOLERANCE: f64 = 1e-10;

/// Exact law of a denoiser's output together with its expected Hamming loss.
#[derive(Clone, Debug)]
pub struct DenoiserLaw {
    pub output: DenseDistribution,
    /// `E[ℓ(x, output)]` under the joint law of clean data and measurements.
    pub risk: f64,
}

fn ln_choose(m: usize, k: usize) -> f64 {
    (1..=k).map(|t| (((m - k + t) as f64) / t as f64).ln()).sum()
}

struct Partial {
    law: Vec<f64>,
    risk: f64,
    mass: f64,
}

/// Enumerates every coordinate-sum vector `σ = y_1 + ... + y_m` and the
/// clean vectors in the prior's support. The posterior over `x` given `σ` is
/// `∝ p(x) e^{α xᵀσ}`; the output is `sign(estimate(σ/m))` with an exact
/// 50/50 split of tied coordinates.
fn enumerate_law(
    prior: &Prior,
    alpha: NoiseLevel,
    m: usize,
    estimate: Option<&(dyn Fn(&[f64], &mut [f64]) -> Result<()> + Sync)>,
) -> Result<DenoiserLaw> {
    let d = prior.dim();
    ensure_cap("denoiser pushforward", d, TRANSPORT_CAP)?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let grid = (m + 1)
        .checked_pow(d as u32)
        .filter(|&g| g <= SUM_GRID_CAP)
        .ok_or(Error::CapExceeded {
            what: "measurement-sum grid",
            dim: d,
            cap: TRANSPORT_CAP,
        })?;
    let a = alpha.alpha();
    let log_p = prior.log_table()?;
    let support: Vec<usize> = (0..log_p.len()).filter(|&x| log_p[x].is_finite()).collect();
    let signs: Vec<Vec<f64>> = support
        .iter()
        .map(|&x| (0..d).map(|i| index_sign(x, i)).collect())
        .collect();
    let ln_binom: Vec<f64> = (0..=m).map(|k| ln_choose(m, k)).collect();
    let log_norm = (m * d) as f64 * log_two_cosh(a);
    let n_out = 1usize << d;

    let partials: Vec<Partial> = (0..grid.div_ceil(BLOCK))
        .into_par_iter()
        .map(|block| -> Result<Partial> {
            let mut part = Partial {
                law: vec![0.0; n_out],
                risk: 0.0,
                mass: 0.0,
            };
            let mut sigma = vec![0.0; d];
            let mut mean = vec![0.0; d];
            let mut est = vec![0.0; d];
            let mut w = vec![0.0; support.len()];
            for g in block * BLOCK..((block + 1) * BLOCK).min(grid) {
                let mut rest = g;
                let mut log_mult = -log_norm;
                for s in sigma.iter_mut() {
                    let k = rest % (m + 1);
                    rest /= m + 1;
                    *s = (2 * k) as f64 - m as f64;
                    log_mult += ln_binom[k];
                }
                for (wx, (&x, xs)) in w.iter_mut().zip(support.iter().zip(&signs)) {
                    let dot: f64 = xs.iter().zip(&sigma).map(|(u, v)| u * v).sum();
                    *wx = log_p[x] + a * dot;
                }
                let lse = log_sum_exp(&w);
                let prob = (log_mult + lse).exp();
                part.mass += prob;
                mean.iter_mut().for_each(|v| *v = 0.0);
                for (wx, xs) in w.iter().zip(&signs) {
                    let post = (wx - lse).exp();
                    mean.iter_mut().zip(xs).for_each(|(mv, xi)| *mv += post * xi);
                }
                let decision: &[f64] = match estimate {
                    None => &mean,
                    Some(f) => {
                        let ybar: Vec<f64> = sigma.iter().map(|s| s / m as f64).collect();
                        f(&ybar, &mut est)?;
                        &est
                    }
                };
                let mut base = 0usize;
                let mut ties = Vec::new();
                for i in 0..d {
                    let v = decision[i];
                    if v > TIE_TOLERANCE {
                        base |= 1 << i;
                        part.risk += prob * (1.0 - mean[i]) / 2.0;
                    } else if v < -TIE_TOLERANCE {
                        part.risk += prob * (1.0 + mean[i]) / 2.0;
                    } else {
                        ties.push(i);
                        part.risk += prob * 0.5;
                    }
                }
                let share = prob / (1usize << ties.len()) as f64;
                for pattern in 0..(1usize << ties.len()) {
                    let mut idx = base;
                    for (t, &i) in ties.iter().enumerate() {
                        if (pattern >> t) & 1 == 1 {
                            idx |= 1 << i;
                        }
                    }
                    part.law[idx] += share;
                }
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;

    let mut law = vec![0.0; n_out];
    let mut risk = 0.0;
    let mut mass = 0.0;
    for p in partials {
        law.iter_mut().zip(&p.law).for_each(|(a, b)| *a += b);
        risk += p.risk;
        mass += p.mass;
    }
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "measurement-sum law has total mass {mass}"
        )));
    }
    Ok(DenoiserLaw {
        output: DenseDistribution::from_weights(d, law)?,
        risk: risk / mass,
    })
}

/// Law and risk of the optimal denoiser `sign(E[x | y_1..y_m])`.
pub fn denoiser_law(prior: &Prior, alpha: NoiseLevel, m: usize) -> Result<DenoiserLaw> {
    enumerate_law(prior, alpha, m, None)
}

/// Exact law of `sign(E[x | y_1..y_m])` under `m` independent flip channels.
pub fn denoiser_pushforward(prior: &Prior, alpha: NoiseLevel, m: usize) -> Result<DenseDistribution> {
    Ok(denoiser_law(prior, alpha, m)?.output)
}

/// Expected Hamming loss of the optimal single-measurement denoiser.
pub fn denoiser_mse(prior: &Prior, alpha: NoiseLevel) -> Result<f64> {
    Ok(denoiser_law(prior, alpha, 1)?.risk)
}

/// Law and risk of `sign(s(ȳ)/α_s)` for an arbitrary score, for instance a
/// learned one, against the exact posterior.
pub fn plugin_denoiser_law(prior: &Prior, alpha: NoiseLevel, m: usize, score: &ScoreOracle) -> Result<DenoiserLaw> {
    ensure_dim(prior.dim(), score.dim())?;
    let level = score.alpha();
    if !(level > 0.0) {
        return Err(Error::ZeroNoise);
    }
    let f = move |y: &[f64], out: &mut [f64]| -> Result<()> {
        score.eval_into(y, out)?;
        out.iter_mut().for_each(|v| *v /= level);
        Ok(())
    };
    enumerate_law(prior, alpha, m, Some(&f))
}

/// Exact law of `sign(s(y)/α_s)` when `y` follows `noisy`, tied coordinates
/// split evenly.
pub fn denoise_distribution(score: &ScoreOracle, noisy: &DenseDistribution) -> Result<DenseDistribution> {
    let d = noisy.dim();
    ensure_dim(d, score.dim())?;
    ensure_cap("denoised law", d, TRANSPORT_CAP)?;
    let level = score.alpha();
    if !(level > 0.0) {
        return Err(Error::ZeroNoise);
    }
    let mut law = vec![0.0; 1 << d];
    let mut s = vec![0.0; d];
    let mut pair = vec![(0.0, 0.0); d];
    let mut split = vec![0.0; 1 << d];
    for (y, &p) in noisy.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let point: Vec<f64> = (0..d).map(|i| index_sign(y, i)).collect();
        score.eval_into(&point, &mut s)?;
        for (pr, v) in pair.iter_mut().zip(&s) {
            let mean = v / level;
            *pr = if mean > TIE_TOLERANCE {
                (0.0, 1.0)
            } else if mean < -TIE_TOLERANCE {
                (1.0, 0.0)
            } else {
                (0.5, 0.5)
            };
        }
        product_law_pairs(&pair, &mut split);
        law.iter_mut().zip(&split).for_each(|(l, q)| *l += p * q);
    }
    DenseDistribution::from_weights(d, law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::{vertex_index, SpinVector};
    use crate::math::sigmoid;

    fn level(a: f64) -> NoiseLevel {
        NoiseLevel::new(a).unwrap()
    }

    #[test]
    fn dirac_is_recovered_exactly() {
        let v = SpinVector::from_signs(&[1, -1, 1, 1, -1]).unwrap();
        let idx = vertex_index(&v).unwrap();
        for m in [1, 3] {
            let law = denoiser_law(&Prior::Dirac(v.clone()), level(0.3), m).unwrap();
            assert!((law.output.prob(idx) - 1.0).abs() < 1e-12);
            assert!(law.risk.abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_prior_risk_is_flip_rate() {
        for a in [0.1, 0.5, 1.5] {
            let r = denoiser_mse(&Prior::uniform(4), level(a)).unwrap();
            assert!((r - 4.0 * sigmoid(-2.0 * a)).abs() < 1e-12, "alpha {a}");
        }
    }

    #[test]
    fn low_noise_output_matches_prior() {
        let prior = Prior::mixture(5, 1.0).unwrap();
        let out = denoiser_pushforward(&prior, level(8.0), 1).unwrap();
        assert!(out.total_variation(&prior.enumerate().unwrap()).unwrap() < 1e-6);
    }

    #[test]
    fn uniform_prior_even_m_splits_ties() {
        // with m = 2 a zero sum ties; the output stays uniform by symmetry
        let out = denoiser_pushforward(&Prior::uniform(3), level(0.4), 2).unwrap();
        assert!(out.probs().iter().all(|p| (p - 0.125).abs() < 1e-14));
    }

    #[test]
    fn plugin_with_exact_score_reproduces_optimal_law() {
        let prior = Prior::mixture(4, 1.0).unwrap();
        let alpha = level(0.5);
        let exact = denoiser_law(&prior, alpha, 1).unwrap();
        let score = ScoreOracle::for_prior(&prior, alpha).unwrap();
        let plug = plugin_denoiser_law(&prior, alpha, 1, &score).unwrap();
        assert!(exact.output.total_variation(&plug.output).unwrap() < 1e-12);
        assert!((exact.risk - plug.risk).abs() < 1e-12);
    }

    #[test]
    fn denoising_the_noisy_law_reproduces_the_pushforward() {
        let prior = Prior::mixture(5, 2.0).unwrap();
        let alpha = level(0.4);
        let q = crate::noise::noisy_pmf(&prior, alpha).unwrap();
        let score = ScoreOracle::for_prior(&prior, alpha).unwrap();
        let via_noisy = denoise_distribution(&score, &q).unwrap();
        let direct = denoiser_pushforward(&prior, alpha, 1).unwrap();
        assert!(via_noisy.total_variation(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn grid_cap_is_enforced() {
        assert!(matches!(
            denoiser_law(&Prior::uniform(8), level(0.5), 10_000),
            Err(Error::CapExceeded { .. })
        ));
        assert!(denoiser_law(&Prior::uniform(9), level(0.5), 1).is_err());
    }
}
