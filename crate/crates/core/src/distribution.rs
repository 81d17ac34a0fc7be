//! Dense probability vectors over all `2^d` vertices and the `index,prob`
//! CSV file format.

use crate::error::{ensure_cap, ensure_dim, Error, Result};
use crate::hypercube::ENUMERATION_CAP;
use std::io::{BufRead, Write};

/// Normalization slack accepted by [`DenseDistribution::new`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A probability vector indexed by [`vertex_index`](crate::vertex_index).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDistribution {
    dim: usize,
    probs: Vec<f64>,
}

impl DenseDistribution {
    /// Validates nonnegativity and normalization within `1e-12`.
    pub fn new(dim: usize, probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(dim, probs, NORMALIZATION_TOLERANCE)
    }

    fn with_tolerance(dim: usize, probs: Vec<f64>, tol: f64) -> Result<Self> {
        ensure_cap("dense distribution", dim, ENUMERATION_CAP)?;
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        ensure_dim(1 << dim, probs.len())?;
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("probabilities"));
        }
        if let Some(p) = probs.iter().find(|&&p| p < 0.0) {
            return Err(Error::InvalidArgument(format!("negative probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { dim, probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(dim: usize, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidArgument("weights must have a positive finite sum".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(dim, weights)
    }

    /// Normalizes log-weights with a max shift.
    pub fn from_log_weights(dim: usize, log_weights: &[f64]) -> Result<Self> {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::InvalidArgument("log-weights have no finite maximum".into()));
        }
        Self::from_weights(dim, log_weights.iter().map(|l| (l - max).exp()).collect())
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        ensure_cap("dense distribution", dim, ENUMERATION_CAP)?;
        let n = 1usize << dim;
        Self::new(dim, vec![1.0 / n as f64; n])
    }

    /// Point mass at `index`.
    pub fn one_hot(dim: usize, index: usize) -> Result<Self> {
        ensure_cap("dense distribution", dim, ENUMERATION_CAP)?;
        let n = 1usize << dim;
        if index >= n {
            return Err(Error::InvalidArgument(format!("index {index} out of range")));
        }
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self::new(dim, probs)
    }

    /// Empirical law of a list of vertex indices.
    pub fn empirical(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        ensure_cap("dense distribution", dim, ENUMERATION_CAP)?;
        let mut counts = vec![0.0; 1 << dim];
        for i in indices {
            *counts.get_mut(i).ok_or_else(|| {
                Error::InvalidArgument(format!("index {i} out of range"))
            })? += 1.0;
        }
        Self::from_weights(dim, counts)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total variation distance `½ Σ |p - q|`.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        ensure_dim(self.dim, other.dim)?;
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// Law of `-x` when `x` follows this distribution.
    pub fn negated(&self) -> Self {
        let mask = self.probs.len() - 1;
        let probs = (0..self.probs.len()).map(|i| self.probs[i ^ mask]).collect();
        Self {
            dim: self.dim,
            probs,
        }
    }

    /// Inverse-CDF lookup for a uniform draw `u` in `[0,1)`.
    pub fn sample_index(&self, cdf: &[f64], u: f64) -> usize {
        debug_assert_eq!(cdf.len(), self.probs.len());
        let target = u * cdf[cdf.len() - 1];
        cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }

    /// Writes the `index,prob` CSV format.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,prob")?;
        for (i, p) in self.probs.iter().enumerate() {
            writeln!(out, "{i},{p:.17e}")?;
        }
        Ok(())
    }

    /// Reads the `index,prob` CSV format. Every index in `0..2^d` must appear
    /// exactly once; the dimension is inferred from the row count.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty distribution file".into()))??;
        if header.trim() != "index,prob" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (idx, prob) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected two fields", lineno + 2)))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            let prob: f64 = prob
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            rows.push((idx, prob));
        }
        let n = rows.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Parse(format!("{n} rows is not 2^d for d >= 1")));
        }
        let dim = n.trailing_zeros() as usize;
        let mut probs = vec![f64::NAN; n];
        for (idx, p) in rows {
            let slot = probs
                .get_mut(idx)
                .ok_or_else(|| Error::Parse(format!("index {idx} out of range")))?;
            if !slot.is_nan() {
                return Err(Error::Parse(format!("duplicate index {idx}")));
            }
            *slot = p;
        }
        Self::new(dim, probs)
    }
}
