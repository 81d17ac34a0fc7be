//! Exact computations for small dimensions: transition matrices, stationary
//! laws, spectral gaps, Hamming optimal transport, denoiser output laws and
//! the bound checks built on them.

mod checks;
mod denoise;
mod stationary;
mod transition;
mod transport;

pub use checks::{
    check_contraction, check_denoising_bound, check_stationary_bound, contraction_ratio, stationary_distance,
    write_reports_csv, BoundReport, BOUND_SLACK, REPORT_HEADER,
};
pub use denoise::{denoise_distribution, denoiser_law, denoiser_mse, denoiser_pushforward, plugin_denoiser_law, DenoiserLaw, SUM_GRID_CAP};
pub use stationary::{
    mixing_time, mixing_time_from_modulus, second_eigenvalue_modulus, stationary, Stationary, MIXING_SENTINEL_GAP,
};
pub use transition::{transition_matrix, TransitionMatrix, MATRIX_CAP};
pub use transport::{transport_simplex, wasserstein_hamming, TransportPlan, TRANSPORT_CAP};
