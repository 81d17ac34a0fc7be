//! Points of the hypercube `{-1,1}^d`, relaxed points of `[-1,1]^d`, the
//! Hamming loss and the vertex/index bijection used by every dense array.

use crate::error::{ensure_cap, ensure_dim, Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest dimension for which vertices may be enumerated.
pub const ENUMERATION_CAP: usize = 25;

const WORD: usize = 64;

/// A sign vector in `{-1,1}^d`, one bit per coordinate (set = `+1`).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinVector {
    dim: usize,
    bits: Vec<u64>,
}

impl SpinVector {
    /// All coordinates equal to `-1`.
    pub fn minus_ones(dim: usize) -> Self {
        assert!(dim >= 1, "a spin vector has at least one coordinate");
        Self {
            dim,
            bits: vec![0; dim.div_ceil(WORD)],
        }
    }

    /// All coordinates equal to `+1`.
    pub fn ones(dim: usize) -> Self {
        let mut v = Self::minus_ones(dim);
        for i in 0..dim {
            v.set(i, true);
        }
        v
    }

    /// Builds a vector from `+1`/`-1` entries. Any other value is rejected.
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidArgument("empty spin vector".into()));
        }
        let mut v = Self::minus_ones(signs.len());
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => v.set(i, true),
                -1 => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "coordinate {i} is {other}, expected +1 or -1"
                    )))
                }
            }
        }
        Ok(v)
    }

    /// Builds a vector from a predicate on coordinates (`true` = `+1`).
    pub fn from_fn(dim: usize, mut positive: impl FnMut(usize) -> bool) -> Self {
        let mut v = Self::minus_ones(dim);
        for i in 0..dim {
            if positive(i) {
                v.set(i, true);
            }
        }
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `true` when coordinate `i` is `+1`.
    #[inline]
    pub fn is_positive(&self, i: usize) -> bool {
        debug_assert!(i < self.dim);
        (self.bits[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        if self.is_positive(i) {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, positive: bool) {
        debug_assert!(i < self.dim);
        let mask = 1u64 << (i % WORD);
        if positive {
            self.bits[i / WORD] |= mask;
        } else {
            self.bits[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.dim);
        self.bits[i / WORD] ^= 1u64 << (i % WORD);
    }

    /// The antipodal vertex `-v`.
    pub fn negated(&self) -> Self {
        Self::from_fn(self.dim, |i| !self.is_positive(i))
    }

    pub fn signs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(|i| self.sign(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.signs().collect()
    }

    /// Writes the `±1` coordinates into `out`, which must have length `dim`.
    pub fn write_f64(&self, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.sign(i);
        }
    }

    /// One `+`/`-` character per coordinate.
    pub fn to_plus_minus(&self) -> String {
        (0..self.dim)
            .map(|i| if self.is_positive(i) { '+' } else { '-' })
            .collect()
    }

    pub fn parse_plus_minus(s: &str) -> Result<Self> {
        let signs = s
            .trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::from_signs(&signs)
    }
}

impl fmt::Debug for SpinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinVector({})", self.to_plus_minus())
    }
}

/// A point of `R^d`, usually of `[-1,1]^d` (measurement averages, posterior
/// means).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxedVector {
    values: Vec<f64>,
}

impl RelaxedVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty relaxed vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("relaxed vector"));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `true` when every entry lies in `[-1, 1]` up to `tol`.
    pub fn in_unit_cube(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.abs() <= 1.0 + tol)
    }
}

impl From<&SpinVector> for RelaxedVector {
    fn from(v: &SpinVector) -> Self {
        Self { values: v.to_f64() }
    }
}

/// Number of coordinates where `a` and `b` differ.
pub fn hamming_loss(a: &SpinVector, b: &SpinVector) -> Result<usize> {
    ensure_dim(a.dim, b.dim)?;
    Ok(a
        .bits
        .iter()
        .zip(&b.bits)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Index of a vertex: bit `i` of the index is set iff coordinate `i` is `+1`.
pub fn vertex_index(v: &SpinVector) -> Result<usize> {
    ensure_cap("vertex enumeration", v.dim, ENUMERATION_CAP)?;
    let mask = (1u64 << v.dim) - 1;
    Ok((v.bits[0] & mask) as usize)
}

/// Inverse of [`vertex_index`].
pub fn vertex_of(index: usize, dim: usize) -> Result<SpinVector> {
    ensure_cap("vertex enumeration", dim, ENUMERATION_CAP)?;
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if index >> dim != 0 {
        return Err(Error::InvalidArgument(format!(
            "index {index} out of range for d = {dim}"
        )));
    }
    let mut v = SpinVector::minus_ones(dim);
    v.bits[0] = index as u64;
    Ok(v)
}

/// Hamming distance between two vertex indices.
#[inline]
pub fn index_distance(a: usize, b: usize) -> u32 {
    (a ^ b).count_ones()
}

/// Sign of coordinate `i` of the vertex with index `index`.
#[inline]
pub fn index_sign(index: usize, i: usize) -> f64 {
    if (index >> i) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Row-major `2^d x d` table of vertex coordinates, in index order.
pub fn sign_table(dim: usize) -> Result<Vec<f64>> {
    ensure_cap("vertex enumeration", dim, ENUMERATION_CAP)?;
    let n = 1usize << dim;
    let mut table = Vec::with_capacity(n * dim);
    for idx in 0..n {
        table.extend((0..dim).map(|i| index_sign(idx, i)));
    }
    Ok(table)
}

/// Expands independent per-coordinate probabilities `P(coordinate i = +1)`
/// into the product law over all `2^d` vertices.
pub fn product_law(p_plus: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), 1 << p_plus.len());
    out[0] = 1.0;
    for (i, &p) in p_plus.iter().enumerate() {
        let half = 1usize << i;
        for idx in 0..half {
            let base = out[idx];
            out[idx | half] = base * p;
            out[idx] = base * (1.0 - p);
        }
    }
}

/// Same as [`product_law`] but takes `(P(-1), P(+1))` pairs, so both tails
/// can be computed without cancellation.
pub fn product_law_pairs(probs: &[(f64, f64)], out: &mut [f64]) {
    debug_assert_eq!(out.len(), 1 << probs.len());
    out[0] = 1.0;
    for (i, &(minus, plus)) in probs.iter().enumerate() {
        let half = 1usize << i;
        for idx in 0..half {
            let base = out[idx];
            out[idx | half] = base * plus;
            out[idx] = base * minus;
        }
    }
}
