//! Limiting and finite-sample null distributions of the test statistic.
//!
//! Under independence the statistic converges to `sum_k lambda_k (xi_k^2 - 1)`
//! where the weights are products of the eigenvalues of the centered
//! distance kernels of the two uniform balls. [`spectrum`] discretizes a
//! kernel on a ball grid, [`product_spectrum`] combines two of them,
//! [`WeightedChiSquare`] evaluates the resulting law, and
//! [`CriticalValues`] caches quantiles. [`monte_carlo_null`] simulates the
//! exact finite-`n` law instead.

mod cache;
mod imhof;
mod montecarlo;
mod products;
mod spectrum;

pub use cache::{CacheRecord, CriticalValueRequest, CriticalValues, GENERATOR_VERSION, SPECTRUM_SEED};
pub use imhof::{CdfValue, WeightedChiSquare, CDF_TOLERANCE, QUANTILE_TOLERANCE, TAYLOR_CUTOFF};
pub use montecarlo::{monte_carlo_null, MonteCarloNull};
pub use products::{product_spectrum, ProductSpectrum, DEFAULT_TRUNCATION, TAIL_POWERS};
pub use spectrum::{spectrum, spectrum_direction_mode, spectrum_of_grid, Spectrum};

/// Default radii and direction counts of the spectrum grids.
pub const DEFAULT_GRID_FACTOR: usize = 60;

/// `P(sum lambda_k (xi_k^2 - 1) <= x)` for a product spectrum.
pub fn cdf_weighted_chisq(lambdas: &ProductSpectrum, x: f64) -> crate::Result<f64> {
    WeightedChiSquare::from_products(lambdas)?.cdf(x)
}

/// `inf { x : P(sum lambda_k (xi_k^2 - 1) <= x) >= prob }`.
pub fn quantile_weighted_chisq(lambdas: &ProductSpectrum, prob: f64) -> crate::Result<f64> {
    WeightedChiSquare::from_products(lambdas)?.quantile(prob)
}
