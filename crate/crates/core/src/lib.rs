//! Sampling binary data through Bernoulli smoothing.
//!
//! Clean vectors on the hypercube `{-1,1}^d` are corrupted by independent sign
//! flips. The score of the smoothed law gives the optimal denoiser, and two
//! discrete Langevin kernels sample the smoothed law itself. Small dimensions
//! can be checked exactly through the [`oracle`] module.

mod error;

pub mod distribution;
pub mod hypercube;
pub mod learning;
pub mod math;
pub mod noise;
pub mod oracle;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod score;

pub use distribution::DenseDistribution;
pub use error::{Error, Result};
pub use hypercube::{hamming_loss, vertex_index, vertex_of, RelaxedVector, SpinVector};
pub use noise::{bernoulli_corrupt, gaussian_corrupt, noisy_pmf, MeasurementSet, NoiseLevel};
pub use prior::Prior;
pub use rng::RandomStream;
pub use score::{ScoreFunction, ScoreKind, ScoreOracle};
