//! Fractional Gaussian noise, two-sided fBM and stationary fractional
//! Ornstein-Uhlenbeck paths, together with the fOU autocorrelation and the
//! moving-average kernels of its Wiener representation.

mod correlation;
mod fgn;
mod fou;
mod grid;
mod kernel;

pub use correlation::{
    correlation_integral, correlation_integral_signed, correlation_tail_terms, fou_correlation, fou_sigma,
    fou_tail_constant, integral_rho_power, integral_rho_power_to, power_integral, TAIL_FROM,
};
pub use fgn::{
    cholesky_with_jitter, cumulate, fbm_generator, fbm_sample, fbm_sample_with, fgn_autocov, fgn_cholesky_factor,
    fgn_sample, FgnGenerator, CHOLESKY_MAX, EMBEDDING_TOL,
};
pub use fou::{fou_sample, FouConfig, FouMode, FouSampler, DEFAULT_BURN_IN, DEFAULT_STEPS_PER_EPS};
pub use grid::{GridPath, Model, PathMeta};
pub use kernel::{conditional_cov_decay, g0, kernel_h_eps, kernel_l2_gap, mvn_c1, ou_kernel_g, OuKernel};
