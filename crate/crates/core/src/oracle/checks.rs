use super::denoise::denoiser_pushforward;
use super::stationary::stationary;
use super::transition::transition_matrix;
use super::transport::wasserstein_hamming;
use crate::distribution::DenseDistribution;
use crate::error::{ensure_cap, Result};
use crate::hypercube::index_distance;
use crate::noise::{noisy_pmf, NoiseLevel};
use crate::prior::Prior;
use crate::sampler::SamplerKind;
use crate::score::{ScoreFunction, ScoreOracle};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Slack added to every bound before comparing.
pub const BOUND_SLACK: f64 = 1e-9;
const CONTRACTION_CAP: usize = 6;

/// One measured quantity against a theoretical bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub check: String,
    pub d: usize,
    pub alpha: f64,
    pub eta: Option<f64>,
    pub m: Option<usize>,
    pub precondition_ok: bool,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    /// The bound exceeds the hypercube diameter `d`, so it holds trivially.
    pub vacuous: bool,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        check: &str,
        d: usize,
        alpha: f64,
        eta: Option<f64>,
        m: Option<usize>,
        precondition_ok: bool,
        measured: f64,
        bound: f64,
    ) -> Self {
        Self {
            check: check.to_string(),
            d,
            alpha,
            eta,
            m,
            precondition_ok,
            measured,
            bound,
            pass: !precondition_ok || measured <= bound + BOUND_SLACK,
            vacuous: bound > d as f64,
        }
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.check,
            self.d,
            self.alpha,
            opt(self.eta.map(|e| e.to_string())),
            opt(self.m.map(|m| m.to_string())),
            self.precondition_ok,
            self.measured,
            self.bound,
            self.pass,
            self.vacuous
        )
    }
}

pub const REPORT_HEADER: &str = "check,d,alpha,eta,m,precondition_ok,measured,bound,pass,vacuous";

pub fn write_reports_csv<W: Write>(mut out: W, reports: &[BoundReport]) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Largest `W(t(·|y), t(·|z)) / ℓ(y, z)` over all ordered pairs of distinct
/// vertices.
pub fn contraction_ratio<S: ScoreFunction + ?Sized>(kind: SamplerKind, score: &S, eta: f64) -> Result<f64> {
    let d = score.dim();
    ensure_cap("contraction check", d, CONTRACTION_CAP)?;
    let t = transition_matrix(kind, score, eta, d)?;
    let n = t.size();
    let rows: Vec<DenseDistribution> = (0..n)
        .map(|i| DenseDistribution::from_weights(d, t.row(i).to_vec()))
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = (0..n * n)
        .into_par_iter()
        .filter(|k| k / n != k % n)
        .map(|k| {
            let (y, z) = (k / n, k % n);
            Ok(wasserstein_hamming(&rows[y], &rows[z])? / index_distance(y, z) as f64)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Contraction of a kernel against its rate: `1 − ½e^{−2/η−β₁}` under
/// `4β₂de^{2β₁} ≤ 1` for one stage, `1 − ½e^{−2/η−2β₁}` under
/// `8dβ₂e^{4β₁} ≤ 1` for two stages.
pub fn check_contraction(kind: SamplerKind, score: &ScoreOracle, eta: f64) -> Result<BoundReport> {
    let d = score.dim();
    let (b1, b2) = score.bounds();
    let df = d as f64;
    let (name, rate, pre) = match kind {
        SamplerKind::OneStage => (
            "contraction_one",
            1.0 - 0.5 * (-2.0 / eta - b1).exp(),
            4.0 * b2 * df * (2.0 * b1).exp() <= 1.0,
        ),
        SamplerKind::TwoStage => (
            "contraction_two",
            1.0 - 0.5 * (-2.0 / eta - 2.0 * b1).exp(),
            8.0 * df * b2 * (4.0 * b1).exp() <= 1.0,
        ),
    };
    let measured = contraction_ratio(kind, score, eta)?;
    Ok(BoundReport::new(name, d, score.alpha(), Some(eta), None, pre, measured, rate))
}

/// `W(π, target)` for the stationary law `π` of a kernel driven by `score`.
pub fn stationary_distance<S: ScoreFunction + ?Sized>(
    kind: SamplerKind,
    score: &S,
    eta: f64,
    target: &DenseDistribution,
) -> Result<f64> {
    let t = transition_matrix(kind, score, eta, target.dim())?;
    let pi = stationary(&t)?;
    wasserstein_hamming(&pi.distribution, target)
}

/// Distance from the kernel's stationary law to `q_α`.
///
/// One stage: `2d(2dβ₁e^{2β₁} + sqrt(dβ₁e^{2β₁}))` under `4β₂de^{2β₁} ≤ 1`.
/// Two stages: `12d·sqrt(β₂d)` under `8β₂de^{4β₁} ≤ 1` and
/// `e^{−2/η+2β₁} ≤ 1/d`.
pub fn check_stationary_bound(kind: SamplerKind, prior: &Prior, alpha: NoiseLevel, eta: f64) -> Result<BoundReport> {
    let d = prior.dim();
    let score = ScoreOracle::for_prior(prior, alpha)?;
    let (b1, b2) = score.bounds();
    let df = d as f64;
    let (name, bound, pre) = match kind {
        SamplerKind::OneStage => {
            let e = df * b1 * (2.0 * b1).exp();
            (
                "stationary_one",
                2.0 * df * (2.0 * e + e.sqrt()),
                4.0 * b2 * df * (2.0 * b1).exp() <= 1.0,
            )
        }
        SamplerKind::TwoStage => (
            "stationary_two",
            12.0 * df * (b2 * df).sqrt(),
            8.0 * b2 * df * (4.0 * b1).exp() <= 1.0 && (-2.0 / eta + 2.0 * b1).exp() <= 1.0 / df,
        ),
    };
    let q = noisy_pmf(prior, alpha)?;
    let measured = stationary_distance(kind, &score, eta, &q)?;
    Ok(BoundReport::new(name, d, alpha.alpha(), Some(eta), None, pre, measured, bound))
}

/// `W(prior, law of the optimal denoiser output)` against `d·e^{−2α}` for a
/// single measurement and `d·e^{−mα}` for `m > 1`.
pub fn check_denoising_bound(prior: &Prior, alpha: NoiseLevel, m: usize) -> Result<BoundReport> {
    let d = prior.dim();
    let a = alpha.alpha();
    let (name, bound) = if m == 1 {
        ("denoise_single", d as f64 * (-2.0 * a).exp())
    } else {
        ("denoise_multi", d as f64 * (-(m as f64) * a).exp())
    };
    let measured = wasserstein_hamming(&prior.enumerate()?, &denoiser_pushforward(prior, alpha, m)?)?;
    Ok(BoundReport::new(name, d, a, None, Some(m), true, measured, bound))
}
