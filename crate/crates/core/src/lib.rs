//! Distribution-free tests of independence between two random vectors.
//!
//! Each margin is mapped to its empirical center-outward distribution
//! function by optimally coupling the sample with a fixed grid on the unit
//! ball. Distance covariance of the two resulting score clouds is then
//! compared against the limiting null law, a weighted sum of centered
//! chi-square variables whose weights come from spectra of the distance
//! kernel on the ball.
//!
//! Modules:
//! - [`grid`]: augmented grids on the unit ball.
//! - [`assignment`]: linear sum assignment solvers and center-outward scores.
//! - [`dcov`]: sample distance covariance and the test statistic.
//! - [`nulldist`]: kernel spectra, weighted chi-square CDF/quantiles, Monte Carlo null.
//! - [`testkit`]: the four competing tests and a simulation harness.

pub mod assignment;
pub mod dcov;
mod error;
pub mod grid;
pub mod nulldist;
mod points;
pub mod reference;
pub mod rng;
pub mod stats;
pub mod testkit;

pub use error::{Error, Result};
pub use points::Points;
