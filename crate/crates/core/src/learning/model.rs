use crate::error::{ensure_dim, Error, Result};
use crate::rng::RandomStream;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Parameterization of the logit map `f_θ : R^d -> R^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// `f(y) = W y + b`.
    Linear,
    /// `f(y) = W₂ tanh(W₁ y + b₁) + b₂`.
    ShallowTanh { hidden: usize },
}

/// A denoiser `E[x|y] = tanh(f_θ(y)/2)`.
///
/// Parameters live in one flat vector: `[W, b]` for the linear model and
/// `[W₁, b₁, W₂, b₂]` for the shallow network, matrices row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserModel {
    arch: Architecture,
    dim: usize,
    alpha: f64,
    m_train: usize,
    params: Vec<f64>,
}

impl DenoiserModel {
    pub fn zeros(arch: Architecture, dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if let Architecture::ShallowTanh { hidden: 0 } = arch {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("training noise level must be positive, got {alpha}")));
        }
        Ok(Self {
            arch,
            dim,
            alpha,
            m_train: 1,
            params: vec![0.0; param_count(arch, dim)],
        })
    }

    /// Linear model with explicit `W` (row-major `d x d`) and `b`.
    pub fn linear(weights: Vec<f64>, bias: Vec<f64>, alpha: f64) -> Result<Self> {
        let d = bias.len();
        ensure_dim(d * d, weights.len())?;
        let mut m = Self::zeros(Architecture::Linear, d, alpha)?;
        m.params[..d * d].copy_from_slice(&weights);
        m.params[d * d..].copy_from_slice(&bias);
        m.check_finite()?;
        Ok(m)
    }

    /// Shallow network with small random first-layer weights and zero output
    /// layer, so training starts from the zero score.
    pub fn shallow(dim: usize, hidden: usize, alpha: f64, rng: &mut RandomStream) -> Result<Self> {
        let mut m = Self::zeros(Architecture::ShallowTanh { hidden }, dim, alpha)?;
        let scale = (dim as f64).recip().sqrt();
        for w in &mut m.params[..hidden * dim] {
            *w = scale * rng.standard_normal();
        }
        Ok(m)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Noise level of each individual training corruption.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of averaged corruptions per training input.
    pub fn m_train(&self) -> usize {
        self.m_train
    }

    pub fn trained_multi(&self) -> bool {
        self.m_train > 1
    }

    /// Level `m_train · α` whose score this model represents.
    pub fn effective_alpha(&self) -> f64 {
        self.alpha * self.m_train as f64
    }

    pub(crate) fn set_m_train(&mut self, m: usize) {
        self.m_train = m;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(W, b)` of a linear model.
    pub fn linear_parts(&self) -> Option<(&[f64], &[f64])> {
        match self.arch {
            Architecture::Linear => Some(self.params.split_at(self.dim * self.dim)),
            Architecture::ShallowTanh { .. } => None,
        }
    }

    fn check_finite(&self) -> Result<()> {
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(())
    }

    /// Logits `f_θ(y)`; `hidden` receives the hidden activations of the
    /// shallow network and is ignored by the linear model.
    pub(crate) fn logits_with_hidden(&self, y: &[f64], out: &mut [f64], hidden: &mut [f64]) {
        let d = self.dim;
        match self.arch {
            Architecture::Linear => {
                let (w, b) = self.params.split_at(d * d);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = b[j] + dot(&w[j * d..(j + 1) * d], y);
                }
            }
            Architecture::ShallowTanh { hidden: h } => {
                let (w1, rest) = self.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(d * h);
                for (k, a) in hidden.iter_mut().enumerate() {
                    *a = (b1[k] + dot(&w1[k * d..(k + 1) * d], y)).tanh();
                }
                for (j, o) in out.iter_mut().enumerate() {
                    *o = b2[j] + dot(&w2[j * h..(j + 1) * h], hidden);
                }
            }
        }
    }

    pub(crate) fn hidden_width(&self) -> usize {
        match self.arch {
            Architecture::Linear => 0,
            Architecture::ShallowTanh { hidden } => hidden,
        }
    }

    pub fn logits(&self, y: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim, y.len())?;
        let mut out = vec![0.0; self.dim];
        let mut hidden = vec![0.0; self.hidden_width()];
        self.logits_with_hidden(y, &mut out, &mut hidden);
        Ok(out)
    }

    /// `E[x|y] ≈ tanh(f_θ(y)/2)`, strictly inside `(-1, 1)` for finite logits.
    pub fn posterior_mean_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        ensure_dim(self.dim, y.len())?;
        ensure_dim(self.dim, out.len())?;
        let mut hidden = vec![0.0; self.hidden_width()];
        self.logits_with_hidden(y, out, &mut hidden);
        out.iter_mut().for_each(|o| *o = (*o / 2.0).tanh());
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &Checkpoint::from(self))?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let c: Checkpoint = serde_json::from_reader(input)?;
        c.try_into()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn param_count(arch: Architecture, d: usize) -> usize {
    match arch {
        Architecture::Linear => d * d + d,
        Architecture::ShallowTanh { hidden: h } => h * d + h + d * h + d,
    }
}

/// Score of a trained model: `s(y) = α_eff · tanh(f_θ(y)/2)`.
pub fn learned_score(model: &DenoiserModel, y: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.dim()];
    model.posterior_mean_into(y, &mut out)?;
    let a = model.effective_alpha();
    out.iter_mut().for_each(|o| *o *= a);
    Ok(out)
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks_exact(width).map(<[f64]>::to_vec).collect()
}

/// On-disk checkpoint: variant tag, noise level, shapes and row-major
/// parameter arrays.
#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum Checkpoint {
    Linear {
        alpha: f64,
        m_train: usize,
        dim: usize,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    ShallowTanh {
        alpha: f64,
        m_train: usize,
        dim: usize,
        hidden: usize,
        w1: Vec<Vec<f64>>,
        b1: Vec<f64>,
        w2: Vec<Vec<f64>>,
        b2: Vec<f64>,
    },
}

impl From<&DenoiserModel> for Checkpoint {
    fn from(m: &DenoiserModel) -> Self {
        let d = m.dim;
        match m.arch {
            Architecture::Linear => {
                let (w, b) = m.params.split_at(d * d);
                Checkpoint::Linear {
                    alpha: m.alpha,
                    m_train: m.m_train,
                    dim: d,
                    weights: rows(w, d),
                    bias: b.to_vec(),
                }
            }
            Architecture::ShallowTanh { hidden: h } => {
                let (w1, rest) = m.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(d * h);
                Checkpoint::ShallowTanh {
                    alpha: m.alpha,
                    m_train: m.m_train,
                    dim: d,
                    hidden: h,
                    w1: rows(w1, d),
                    b1: b1.to_vec(),
                    w2: rows(w2, h),
                    b2: b2.to_vec(),
                }
            }
        }
    }
}

fn flatten(rows: &[Vec<f64>], n_rows: usize, width: usize, name: &str) -> Result<Vec<f64>> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Parse(format!("{name} must be {n_rows} x {width}")));
    }
    Ok(rows.concat())
}

fn check_len(v: &[f64], n: usize, name: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::Parse(format!("{name} must have length {n}")));
    }
    Ok(())
}

impl TryFrom<Checkpoint> for DenoiserModel {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        let (arch, dim, alpha, m_train, params) = match c {
            Checkpoint::Linear {
                alpha,
                m_train,
                dim,
                weights,
                bias,
            } => {
                let mut p = flatten(&weights, dim, dim, "weights")?;
                check_len(&bias, dim, "bias")?;
                p.extend(bias);
                (Architecture::Linear, dim, alpha, m_train, p)
            }
            Checkpoint::ShallowTanh {
                alpha,
                m_train,
                dim,
                hidden,
                w1,
                b1,
                w2,
                b2,
            } => {
                let mut p = flatten(&w1, hidden, dim, "w1")?;
                check_len(&b1, hidden, "b1")?;
                p.extend(b1);
                p.extend(flatten(&w2, dim, hidden, "w2")?);
                check_len(&b2, dim, "b2")?;
                p.extend(b2);
                (Architecture::ShallowTanh { hidden }, dim, alpha, m_train, p)
            }
        };
        if m_train == 0 {
            return Err(Error::Parse("m_train must be at least 1".into()));
        }
        let mut m = DenoiserModel::zeros(arch, dim, alpha)?;
        m.m_train = m_train;
        m.params = params;
        m.check_finite()?;
        Ok(m)
    }
}
