//! Frequency-domain features and analytic spectral oracles.

mod design;
mod dft;
mod psd;

pub use design::{build_design, SpectralDesign};
pub use dft::{default_frequency, dft_coefficient, DftBatch, Twiddles};
pub use psd::{
    analytic_autocorr, analytic_autocorr_auto, analytic_psd, expected_finite_psd,
    solve_discrete_lyapunov, stationary_covariance, AugmentedSystem, AutocorrSequence,
    SpectralKind, SpectralMatrix, LAG_CUTOFF, MAX_LAGS,
};
