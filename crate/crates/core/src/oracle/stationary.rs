use super::transition::TransitionMatrix;
use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, RowDVector};
use std::collections::VecDeque;

const STEP_TOLERANCE: f64 = 1e-14;
const RESIDUAL_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;
/// Squaring the iteration matrix costs `n³`; above this size plain power
/// iteration is used.
const SQUARING_SIZE_CAP: usize = 1024;
const SQUARE_EVERY: usize = 32;
const MAX_SQUARINGS: usize = 48;

/// `λ₂` within this distance of 1 is reported as an infinite mixing time.
pub const MIXING_SENTINEL_GAP: f64 = 1e-12;
const SPECTRAL_TOLERANCE: f64 = 1e-10;
const MAX_SPECTRAL_SQUARINGS: usize = 64;

/// A left fixed point `π T = π`.
#[derive(Clone, Debug)]
pub struct Stationary {
    pub distribution: DenseDistribution,
    /// `‖π T − π‖₁`.
    pub residual: f64,
    /// False when some state cannot reach the heaviest state, in which case
    /// the chain has several closed classes and `π` depends on the start.
    pub unique: bool,
    pub iterations: usize,
}

fn l1_diff(a: &RowDVector<f64>, b: &RowDVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}

fn normalized(mut v: RowDVector<f64>) -> RowDVector<f64> {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    let s = v.sum();
    v / s
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
}

/// Power iteration from the uniform law. The iteration matrix is squared
/// every few steps, so slowly mixing chains converge in a logarithmic number
/// of rounds; the result is then polished with plain steps of `T`.
pub fn stationary(t: &TransitionMatrix) -> Result<Stationary> {
    let n = t.size();
    let tm = t.to_matrix();
    let mut pi = RowDVector::from_element(n, 1.0 / n as f64);
    let mut m = tm.clone();
    let mut squarings = 0;
    let mut iterations = 0;
    loop {
        let next = normalized(&pi * &m);
        let step = l1_diff(&next, &pi);
        pi = next;
        iterations += 1;
        if step <= STEP_TOLERANCE {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NotConverged {
                what: "stationary distribution",
                iterations,
            });
        }
        if n <= SQUARING_SIZE_CAP && iterations % SQUARE_EVERY == 0 && squarings < MAX_SQUARINGS {
            m = &m * &m;
            normalize_rows(&mut m);
            squarings += 1;
        }
    }
    if squarings > 0 {
        for _ in 0..SQUARE_EVERY {
            let next = normalized(&pi * &tm);
            let step = l1_diff(&next, &pi);
            pi = next;
            iterations += 1;
            if step <= STEP_TOLERANCE {
                break;
            }
        }
    }
    let residual = l1_diff(&(&pi * &tm), &pi);
    if residual > RESIDUAL_TOLERANCE {
        return Err(Error::NotConverged {
            what: "stationary distribution",
            iterations,
        });
    }
    let heaviest = (0..n).max_by(|&a, &b| pi[a].total_cmp(&pi[b])).unwrap_or(0);
    let unique = reaches_everywhere(t, heaviest);
    Ok(Stationary {
        distribution: DenseDistribution::from_weights(t.dim(), pi.iter().copied().collect())?,
        residual,
        unique,
        iterations,
    })
}

/// Whether every state has a path of positive transitions into `target`.
fn reaches_everywhere(t: &TransitionMatrix, target: usize) -> bool {
    let n = t.size();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([target]);
    seen[target] = true;
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && t.get(i, j) > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Modulus of the largest eigenvalue of `T` once the pair `(1, π)` is
/// removed.
///
/// `A = T − 1π` has the spectrum of `T` with the unit eigenvalue replaced by
/// 0. Its spectral radius is `lim ‖A^N‖^{1/N}`, evaluated along `N = 2^k` by
/// repeated normalized squaring so that complex pairs need no special care.
pub fn second_eigenvalue_modulus(t: &TransitionMatrix, pi: &DenseDistribution) -> Result<f64> {
    let n = t.size();
    let mut a = t.to_matrix();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] -= pi.prob(j);
        }
    }
    let norm = a.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut b = a / norm;
    let mut log_rate = norm.ln();
    let mut previous = norm;
    let mut scale = 1.0;
    for _ in 0..MAX_SPECTRAL_SQUARINGS {
        let c = &b * &b;
        let c_norm = c.norm();
        if c_norm == 0.0 {
            return Ok(0.0);
        }
        scale *= 0.5;
        log_rate += scale * c_norm.ln();
        b = c / c_norm;
        let estimate = log_rate.exp();
        if (estimate - previous).abs() <= SPECTRAL_TOLERANCE {
            return Ok(estimate);
        }
        previous = estimate;
    }
    Err(Error::NotConverged {
        what: "spectral radius",
        iterations: MAX_SPECTRAL_SQUARINGS,
    })
}

/// `1/(1 − |λ₂|)`, or `+∞` when `|λ₂| ≥ 1 − 1e-12`.
pub fn mixing_time_from_modulus(lambda2: f64) -> f64 {
    if lambda2 >= 1.0 - MIXING_SENTINEL_GAP {
        f64::INFINITY
    } else {
        1.0 / (1.0 - lambda2)
    }
}

/// Mixing time `1/(1 − |λ₂|)` of a kernel matrix.
pub fn mixing_time(t: &TransitionMatrix) -> Result<f64> {
    let pi = stationary(t)?;
    Ok(mixing_time_from_modulus(second_eigenvalue_modulus(t, &pi.distribution)?))
}
