use crate::error::{ensure_cap, ensure_dim, Error, Result};
use crate::hypercube::{index_sign, product_law};
use crate::math::sigmoid;
use crate::sampler::SamplerKind;
use crate::score::ScoreFunction;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Largest dimension for a dense `2^d x 2^d` matrix.
pub const MATRIX_CAP: usize = 12;

/// Row-stochastic matrix of a kernel; row = current state, column = next
/// state, both by vertex index.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_rows(dim: usize, entries: Vec<f64>) -> Result<Self> {
        ensure_cap("transition matrix", dim, MATRIX_CAP)?;
        let n = 1usize << dim;
        ensure_dim(n * n, entries.len())?;
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("transition entries must be finite and nonnegative".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let n = 1usize << dim;
        let mut e = vec![0.0; n * n];
        (0..n).for_each(|i| e[i * n + i] = 1.0);
        Self::from_rows(dim, e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of states `2^d`.
    pub fn size(&self) -> usize {
        1 << self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.size();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.size() + to]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Largest `|row sum - 1|`.
    pub fn max_row_defect(&self) -> f64 {
        let n = self.size();
        self.entries
            .chunks_exact(n)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_row_slice(n, n, &self.entries)
    }
}

/// Fills `rows` with the product kernel `P(y'_i = +1) = σ(tilt·s(y)_i + 2y_i/η)`.
fn product_kernel<S: ScoreFunction + ?Sized>(score: &S, eta: f64, tilt: f64, d: usize, rows: &mut [f64]) -> Result<()> {
    let n = 1usize << d;
    rows.par_chunks_mut(n).enumerate().try_for_each(|(idx, row)| {
        let y: Vec<f64> = (0..d).map(|i| index_sign(idx, i)).collect();
        let s = score.eval(&y)?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score output"));
        }
        let p: Vec<f64> = (0..d).map(|i| sigmoid(tilt * s[i] + 2.0 * y[i] / eta)).collect();
        product_law(&p, row);
        Ok(())
    })
}

/// Exact kernel matrix.
///
/// One-stage rows are product laws. For the two-stage kernel the
/// intermediate `z` is summed out exactly: the second stage `V` is a product
/// kernel in `z`, and the first stage is the tensor power of the symmetric
/// channel `[[a, b], [b, a]]` with `a = σ(2/η)`, so `T = U V` is formed by
/// applying that channel along each bit of the row index.
pub fn transition_matrix<S: ScoreFunction + ?Sized>(
    kind: SamplerKind,
    score: &S,
    eta: f64,
    d: usize,
) -> Result<TransitionMatrix> {
    ensure_cap("transition matrix", d, MATRIX_CAP)?;
    ensure_dim(score.dim(), d)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")));
    }
    let n = 1usize << d;
    let mut rows = vec![0.0; n * n];
    match kind {
        SamplerKind::OneStage => product_kernel(score, eta, 1.0, d, &mut rows)?,
        SamplerKind::TwoStage => {
            // second stage: P(y'_i = +1 | z) = σ(2z_i/η + 2s(z)_i)
            product_kernel(score, eta, 2.0, d, &mut rows)?;
            let keep = sigmoid(2.0 / eta);
            let flip = sigmoid(-2.0 / eta);
            for bit in 0..d {
                let half = 1usize << bit;
                // pair rows r and r | half for every r with the bit clear
                let block = 2 * half * n;
                rows.par_chunks_mut(block).for_each(|chunk| {
                    let (lo, hi) = chunk.split_at_mut(half * n);
                    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (x, y) = (*a, *b);
                        *a = keep * x + flip * y;
                        *b = flip * x + keep * y;
                    }
                });
            }
        }
    }
    TransitionMatrix::from_rows(d, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::index_distance;
    use crate::noise::NoiseLevel;
    use crate::score::ScoreOracle;

    /// Two-stage matrix by the explicit sum over every intermediate `z`.
    fn two_stage_by_z_sum(score: &ScoreOracle, eta: f64, d: usize) -> Vec<f64> {
        let n = 1usize << d;
        let keep = sigmoid(2.0 / eta);
        let mut t = vec![0.0; n * n];
        for y in 0..n {
            for z in 0..n {
                let flips = index_distance(y, z) as i32;
                let u = keep.powi(d as i32 - flips) * (1.0 - keep).powi(flips);
                let zs: Vec<f64> = (0..d).map(|i| index_sign(z, i)).collect();
                let s = score.eval(&zs).unwrap();
                for yp in 0..n {
                    let mut v = 1.0;
                    for i in 0..d {
                        let same = index_sign(yp, i) == zs[i];
                        let p = sigmoid(2.0 / eta + 2.0 * zs[i] * s[i]);
                        v *= if same { p } else { 1.0 - p };
                    }
                    t[y * n + yp] += u * v;
                }
            }
        }
        t
    }

    #[test]
    fn two_stage_matches_explicit_z_sum() {
        for (beta, alpha, eta) in [(1.0, 0.5, 2.0), (2.0, 0.25, 4.0), (0.5, 1.0, 0.7)] {
            let score = ScoreOracle::mixture(4, beta, NoiseLevel::new(alpha).unwrap()).unwrap();
            let fast = transition_matrix(SamplerKind::TwoStage, &score, eta, 4).unwrap();
            let slow = two_stage_by_z_sum(&score, eta, 4);
            for (a, b) in fast.entries().iter().zip(&slow) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let score = ScoreOracle::mixture(2, 1.0, NoiseLevel::new(0.5).unwrap()).unwrap();
        for kind in [SamplerKind::OneStage, SamplerKind::TwoStage] {
            let t = transition_matrix(kind, &score, 2.0, 2).unwrap();
            assert!(t.max_row_defect() < 1e-14);
        }
    }

    #[test]
    fn zero_score_large_step_is_uniform() {
        let score = ScoreOracle::constant(vec![0.0; 3]).unwrap();
        let t = transition_matrix(SamplerKind::OneStage, &score, f64::INFINITY, 3).unwrap();
        assert!(t.entries().iter().all(|v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn tiny_step_is_identity() {
        let score = ScoreOracle::mixture(3, 1.0, NoiseLevel::new(0.5).unwrap()).unwrap();
        for kind in [SamplerKind::OneStage, SamplerKind::TwoStage] {
            let t = transition_matrix(kind, &score, 1e-3, 3).unwrap();
            assert_eq!(t, TransitionMatrix::identity(3).unwrap());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let score = ScoreOracle::constant(vec![0.0; 13]).unwrap();
        assert!(matches!(
            transition_matrix(SamplerKind::OneStage, &score, 1.0, 13),
            Err(Error::CapExceeded { .. })
        ));
    }
}
