use super::model::{Architecture, DenoiserModel};
use crate::error::{ensure_dim, Error, Result};
use crate::hypercube::SpinVector;
use crate::math::{sigmoid, softplus};
use crate::noise::NoiseLevel;
use crate::prior::Prior;
use crate::rng::{stream_id, Purpose, RandomStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `Σ_j log(1 + exp(-x_j f_j))`.
    Logistic,
    /// `Σ_j (x_j - tanh(f_j/2))²`.
    LeastSquares,
}

/// Clean targets and (possibly averaged) noisy inputs, row-major `n x d`.
#[derive(Clone, Debug)]
pub struct Batch {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Batch {
    pub fn new(xs: &[SpinVector], ys: &[Vec<f64>]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        ensure_dim(xs.len(), ys.len())?;
        let dim = xs[0].dim();
        let mut x = Vec::with_capacity(xs.len() * dim);
        let mut y = Vec::with_capacity(xs.len() * dim);
        for (xi, yi) in xs.iter().zip(ys) {
            ensure_dim(dim, xi.dim())?;
            ensure_dim(dim, yi.len())?;
            x.extend(xi.signs());
            y.extend_from_slice(yi);
        }
        Self::from_flat(dim, x, y)
    }

    pub fn from_flat(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if dim == 0 || x.is_empty() || x.len() % dim != 0 {
            return Err(Error::InvalidArgument("batch must hold a positive number of rows".into()));
        }
        ensure_dim(x.len(), y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("batch inputs"));
        }
        Ok(Self { dim, x, y })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn rows(&self, range: std::ops::Range<usize>) -> (&[f64], &[f64]) {
        let d = self.dim;
        (&self.x[range.start * d..range.end * d], &self.y[range.start * d..range.end * d])
    }
}

/// Per-coordinate loss and its derivative with respect to the logit.
#[inline]
fn coordinate_loss(objective: Objective, x: f64, f: f64) -> (f64, f64) {
    match objective {
        Objective::Logistic => (softplus(-x * f), -x * sigmoid(-x * f)),
        Objective::LeastSquares => {
            let g = (f / 2.0).tanh();
            let r = x - g;
            (r * r, -r * (1.0 - g * g))
        }
    }
}

/// Summed loss and gradient over a contiguous block of rows.
fn block_loss_gradient(
    model: &DenoiserModel,
    x: &[f64],
    y: &[f64],
    objective: Objective,
    want_grad: bool,
) -> (f64, Vec<f64>) {
    let d = model.dim();
    let h = model.hidden_width();
    let params = model.params();
    let mut grad = if want_grad { vec![0.0; params.len()] } else { Vec::new() };
    let mut f = vec![0.0; d];
    let mut act = vec![0.0; h];
    let mut gf = vec![0.0; d];
    let mut ga = vec![0.0; h];
    let mut loss = 0.0;
    for (xr, yr) in x.chunks_exact(d).zip(y.chunks_exact(d)) {
        model.logits_with_hidden(yr, &mut f, &mut act);
        for j in 0..d {
            let (l, g) = coordinate_loss(objective, xr[j], f[j]);
            loss += l;
            gf[j] = g;
        }
        if !want_grad {
            continue;
        }
        match model.architecture() {
            Architecture::Linear => {
                let (gw, gb) = grad.split_at_mut(d * d);
                for j in 0..d {
                    let row = &mut gw[j * d..(j + 1) * d];
                    row.iter_mut().zip(yr).for_each(|(g, yk)| *g += gf[j] * yk);
                    gb[j] += gf[j];
                }
            }
            Architecture::ShallowTanh { .. } => {
                let w2 = &params[h * d + h..h * d + h + d * h];
                let (gw1, rest) = grad.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(d * h);
                ga.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..d {
                    let wrow = &w2[j * h..(j + 1) * h];
                    let grow = &mut gw2[j * h..(j + 1) * h];
                    for k in 0..h {
                        grow[k] += gf[j] * act[k];
                        ga[k] += gf[j] * wrow[k];
                    }
                    gb2[j] += gf[j];
                }
                for k in 0..h {
                    let gak = ga[k] * (1.0 - act[k] * act[k]);
                    let row = &mut gw1[k * d..(k + 1) * d];
                    row.iter_mut().zip(yr).for_each(|(g, yi)| *g += gak * yi);
                    gb1[k] += gak;
                }
            }
        }
    }
    (loss, grad)
}

fn mean_loss_gradient(model: &DenoiserModel, batch: &Batch, objective: Objective, want_grad: bool) -> Result<(f64, Vec<f64>)> {
    ensure_dim(model.dim(), batch.dim())?;
    let n = batch.len();
    let blocks: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let (x, y) = batch.rows(c * CHUNK..((c + 1) * CHUNK).min(n));
            block_loss_gradient(model, x, y, objective, want_grad)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = if want_grad { vec![0.0; model.params().len()] } else { Vec::new() };
    for (l, g) in blocks {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let scale = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// `(1/n) Σ_i Σ_j log(1 + exp(-x_ij f(y_i)_j))`.
pub fn logistic_loss(model: &DenoiserModel, batch: &Batch) -> Result<f64> {
    Ok(mean_loss_gradient(model, batch, Objective::Logistic, false)?.0)
}

/// `(1/n) Σ_i Σ_j (x_ij - tanh(f(y_i)_j / 2))²`.
pub fn least_squares_loss(model: &DenoiserModel, batch: &Batch) -> Result<f64> {
    Ok(mean_loss_gradient(model, batch, Objective::LeastSquares, false)?.0)
}

/// Gradient of the selected objective in the model's flat parameter layout.
pub fn loss_gradient(model: &DenoiserModel, batch: &Batch, objective: Objective) -> Result<Vec<f64>> {
    Ok(mean_loss_gradient(model, batch, objective, true)?.1)
}

pub fn loss_and_gradient(model: &DenoiserModel, batch: &Batch, objective: Objective) -> Result<(f64, Vec<f64>)> {
    mean_loss_gradient(model, batch, objective, true)
}

/// Upper bound on the gradient's Lipschitz constant for inputs in `[-1,1]^d`.
/// Only available for the linear model, where the loss is convex.
pub fn smoothness_bound(arch: Architecture, objective: Objective, dim: usize) -> Option<f64> {
    // second derivative of the per-coordinate loss in the logit
    let curvature = match objective {
        Objective::Logistic => 0.25,
        Objective::LeastSquares => 1.125,
    };
    match arch {
        Architecture::Linear => Some(curvature * (dim as f64 + 1.0)),
        Architecture::ShallowTanh { .. } => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Full-batch descent when true, otherwise shuffled minibatches.
    pub full_batch: bool,
    pub batch_size: usize,
    /// Number of averaged corruptions per input.
    pub m_train: usize,
    pub objective: Objective,
    pub seed: u64,
    /// Corrupt once and reuse the same inputs every epoch.
    pub freeze_noise: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Linear,
            learning_rate: 0.1,
            epochs: 2000,
            full_batch: true,
            batch_size: 1024,
            m_train: 1,
            objective: Objective::Logistic,
            seed: 0,
            freeze_noise: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.m_train == 0 {
            return Err(Error::InvalidArgument("m_train must be at least 1".into()));
        }
        if !self.full_batch && self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Source of clean training examples.
#[derive(Clone, Copy, Debug)]
pub enum TrainingData<'a> {
    /// Draw `n` examples from a prior.
    Prior { prior: &'a Prior, n: usize },
    Dataset(&'a [SpinVector]),
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: DenoiserModel,
    /// Loss at the start of every epoch, averaged over that epoch's batches.
    pub loss_curve: Vec<f64>,
}

fn clean_targets(data: TrainingData<'_>, seed: u64) -> Result<(usize, Vec<f64>)> {
    match data {
        TrainingData::Dataset(xs) => {
            let first = xs.first().ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
            let d = first.dim();
            let mut x = Vec::with_capacity(xs.len() * d);
            for v in xs {
                ensure_dim(d, v.dim())?;
                x.extend(v.signs());
            }
            Ok((d, x))
        }
        TrainingData::Prior { prior, n } => {
            if n == 0 {
                return Err(Error::InvalidArgument("need at least one training example".into()));
            }
            let d = prior.dim();
            let sampler = prior.sampler();
            let mut x = vec![0.0; n * d];
            x.par_chunks_mut(CHUNK * d).enumerate().for_each(|(c, block)| {
                let mut rng = RandomStream::fork(seed, stream_id(c as u64, Purpose::Data));
                for row in block.chunks_exact_mut(d) {
                    sampler.sample(&mut rng).write_f64(row);
                }
            });
            Ok((d, x))
        }
    }
}

/// Averages of `m` independent flip corruptions of every row, one stream per
/// (round, block).
fn corrupt_rows(x: &[f64], d: usize, alpha: NoiseLevel, m: usize, seed: u64, round: usize) -> Vec<f64> {
    let flip = alpha.flip_probability();
    let blocks = x.len().div_ceil(CHUNK * d);
    let mut y = vec![0.0; x.len()];
    y.par_chunks_mut(CHUNK * d)
        .zip(x.par_chunks(CHUNK * d))
        .enumerate()
        .for_each(|(c, (yb, xb))| {
            let mut rng = RandomStream::fork(seed, stream_id((round * blocks + c) as u64, Purpose::Noise));
            for (yi, xi) in yb.iter_mut().zip(xb) {
                let mut s = 0.0;
                for _ in 0..m {
                    s += if rng.bernoulli(flip) { -xi } else { *xi };
                }
                *yi = s / m as f64;
            }
        });
    y
}

/// Gradient descent on the denoising objective. Inputs are freshly corrupted
/// at every epoch unless `freeze_noise` is set.
pub fn train(data: TrainingData<'_>, alpha: NoiseLevel, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (d, x) = clean_targets(data, config.seed)?;
    let n = x.len() / d;
    let mut model = match config.architecture {
        Architecture::Linear => DenoiserModel::zeros(Architecture::Linear, d, alpha.alpha())?,
        Architecture::ShallowTanh { hidden } => {
            let mut rng = RandomStream::fork(config.seed, stream_id(0, Purpose::Init));
            DenoiserModel::shallow(d, hidden, alpha.alpha(), &mut rng)?
        }
    };
    model.set_m_train(config.m_train);

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut batch: Option<Batch> = None;
    for epoch in 0..config.epochs {
        if batch.is_none() || !config.freeze_noise {
            let y = corrupt_rows(&x, d, alpha, config.m_train, config.seed, epoch);
            batch = Some(Batch::from_flat(d, x.clone(), y)?);
        }
        let full = batch.as_ref().expect("batch initialized above");
        let epoch_loss = if config.full_batch {
            let (loss, grad) = loss_and_gradient(&model, full, config.objective)?;
            step(&mut model, &grad, config.learning_rate, loss, epoch)?;
            loss
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = RandomStream::fork(config.seed, stream_id(epoch as u64, Purpose::Shuffle));
            for i in (1..n).rev() {
                order.swap(i, rng.below(i + 1));
            }
            let mut total = 0.0;
            for idx in order.chunks(config.batch_size) {
                let mut bx = Vec::with_capacity(idx.len() * d);
                let mut by = Vec::with_capacity(idx.len() * d);
                for &i in idx {
                    let (xr, yr) = full.rows(i..i + 1);
                    bx.extend_from_slice(xr);
                    by.extend_from_slice(yr);
                }
                let mini = Batch::from_flat(d, bx, by)?;
                let (loss, grad) = loss_and_gradient(&model, &mini, config.objective)?;
                step(&mut model, &grad, config.learning_rate, loss, epoch)?;
                total += loss * idx.len() as f64;
            }
            total / n as f64
        };
        loss_curve.push(epoch_loss);
    }
    Ok(TrainOutcome { model, loss_curve })
}

fn step(model: &mut DenoiserModel, grad: &[f64], lr: f64, loss: f64, epoch: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Divergence { epoch });
    }
    for (p, g) in model.params_mut().iter_mut().zip(grad) {
        *p -= lr * g;
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence { epoch });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch_1d(x: &[f64], y: &[f64]) -> Batch {
        Batch::from_flat(1, x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn zero_model_losses() {
        let m = DenoiserModel::zeros(Architecture::Linear, 3, 0.5).unwrap();
        let b = Batch::from_flat(3, vec![1.0, -1.0, 1.0, -1.0, -1.0, 1.0], vec![0.2; 6]).unwrap();
        assert!((logistic_loss(&m, &b).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-15);
        assert!((least_squares_loss(&m, &b).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_example_values() {
        let m = DenoiserModel::linear(vec![0.0], vec![2.0], 0.5).unwrap();
        let b = batch_1d(&[1.0], &[0.3]);
        assert!((logistic_loss(&m, &b).unwrap() - 0.126_928_011_042_972_6).abs() < 1e-12);
        // g = 0.5 when f = 2 atanh(0.5)
        let m = DenoiserModel::linear(vec![0.0], vec![2.0 * 0.5f64.atanh()], 0.5).unwrap();
        assert!((least_squares_loss(&m, &b).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn logistic_gradient_two_examples_by_hand() {
        // f(y) = w y + b with w = 0.5, b = -0.25
        let m = DenoiserModel::linear(vec![0.5], vec![-0.25], 0.5).unwrap();
        let b = batch_1d(&[1.0, -1.0], &[1.0, -0.5]);
        let g = loss_gradient(&m, &b, Objective::Logistic).unwrap();
        let f1 = 0.5 - 0.25;
        let f2 = -0.25 - 0.25;
        let r1 = -sigmoid(-f1);
        let r2 = sigmoid(f2);
        assert!((g[0] - (r1 * 1.0 + r2 * -0.5) / 2.0).abs() < 1e-15);
        assert!((g[1] - (r1 + r2) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn smoothness_bound_is_linear_only() {
        assert_eq!(smoothness_bound(Architecture::Linear, Objective::Logistic, 3), Some(1.0));
        assert!(smoothness_bound(Architecture::ShallowTanh { hidden: 4 }, Objective::Logistic, 3).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let data = vec![SpinVector::ones(2), SpinVector::minus_ones(2)];
        let cfg = TrainConfig {
            learning_rate: 1e308,
            epochs: 5,
            ..TrainConfig::default()
        };
        match train(TrainingData::Dataset(&data), NoiseLevel::new(0.5).unwrap(), &cfg) {
            Err(Error::Divergence { epoch }) => assert!(epoch < 5),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn overfits_single_example() {
        let data = vec![SpinVector::from_signs(&[1, -1, 1]).unwrap()];
        let cfg = TrainConfig {
            learning_rate: 0.5,
            epochs: 400,
            ..TrainConfig::default()
        };
        let out = train(TrainingData::Dataset(&data), NoiseLevel::new(1.0).unwrap(), &cfg).unwrap();
        assert!(*out.loss_curve.last().unwrap() < 0.05);
        assert!(out.loss_curve[0] > 2.0);
    }
}
