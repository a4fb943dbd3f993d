//! Size and power studies on the Gaussian and heavy-tailed designs.
//!
//! Both designs draw `(X, Y)` in `R^{p+q}` from a centered normal law with
//! covariance `I + tau L_{1,2} + rho L_{1,p+1}`, where `L_{i,j}` has ones at
//! `(i, j)` and `(j, i)` only: `tau` couples the first two coordinates and
//! `rho` links the first coordinates of `X` and `Y`. The heavy-tailed design
//! then maps every coordinate through `z -> tan(pi (Phi(z) - 1/2))`, giving
//! standard Cauchy margins.

use std::time::Instant;

use faer::{Mat, Side};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Method, TestConfig, TestRunner, PERM_LABEL, SCHEMA_VERSION};
use crate::dcov::PairedSample;
use crate::stats::binomial_se;
use crate::{rng, Error, Points, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    /// Gaussian margins.
    Gaussian,
    /// Cauchy margins through the normal-to-Cauchy quantile map.
    Cauchy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub example: Example,
    pub tau: f64,
    pub rhos: Vec<f64>,
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<Method>,
    /// Level, seed and method options; its `method` field is ignored.
    pub test: TestConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub example: Example,
    pub tau: f64,
    pub rho: f64,
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub alpha: f64,
    pub reps: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTable {
    pub schema_version: u32,
    pub config: SimulationConfig,
    pub rows: Vec<SimulationRow>,
    pub wall_time_ms: f64,
}

impl SimulationTable {
    pub fn row(&self, rho: f64, method: Method) -> Option<&SimulationRow> {
        self.rows.iter().find(|r| r.rho == rho && r.method == method)
    }

    /// One line per `(rho, method)`; the configuration is echoed in the
    /// leading columns so the file stands alone.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Numerical(format!("csv encoding: {e}"));
        w.write_record([
            "example", "tau", "rho", "method", "n", "p", "q", "alpha", "reps", "rejections", "rate", "se", "seed",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            let example = match r.example {
                Example::Gaussian => "gaussian",
                Example::Cauchy => "cauchy",
            };
            w.write_record([
                example.to_string(),
                r.tau.to_string(),
                r.rho.to_string(),
                r.method.name().to_string(),
                r.n.to_string(),
                r.p.to_string(),
                r.q.to_string(),
                r.alpha.to_string(),
                r.reps.to_string(),
                r.rejections.to_string(),
                format!("{:.6}", r.rate),
                format!("{:.6}", r.se),
                self.config.test.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv encoding: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `I + tau L_{1,2} + rho L_{1,p+1}` of size `p + q`.
pub fn covariance(p: usize, q: usize, tau: f64, rho: f64) -> Result<Mat<f64>> {
    if p == 0 || q == 0 {
        return Err(Error::param("dimensions must be positive"));
    }
    let d = p + q;
    let mut c = Mat::<f64>::identity(d, d);
    for (i, j, v) in [(0, 1, tau), (0, p, rho)] {
        c.write(i, j, c.read(i, j) + v);
        c.write(j, i, c.read(j, i) + v);
    }
    Ok(c)
}

fn cholesky_factor(p: usize, q: usize, tau: f64, rho: f64) -> Result<Mat<f64>> {
    let c = covariance(p, q, tau, rho)?;
    c.cholesky(Side::Lower)
        .map(|ch| ch.compute_l())
        .map_err(|_| Error::param(format!("covariance with tau = {tau}, rho = {rho} is not positive definite")))
}

/// One sample of size `n` from the design.
pub fn draw_sample(example: Example, p: usize, q: usize, n: usize, tau: f64, rho: f64, rng: &mut rng::Rng) -> Result<PairedSample> {
    let l = cholesky_factor(p, q, tau, rho)?;
    draw_with_factor(example, &l, p, q, n, rng)
}

fn draw_with_factor(example: Example, l: &Mat<f64>, p: usize, q: usize, n: usize, rng: &mut rng::Rng) -> Result<PairedSample> {
    let d = p + q;
    let normal = Normal::standard();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n * q);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        for i in 0..d {
            let mut v: f64 = (0..=i).map(|k| l.read(i, k) * z[k]).sum();
            if example == Example::Cauchy {
                v = cauchy_from_normal(&normal, v);
            }
            if i < p {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    PairedSample::new(Points::new(p, x)?, Points::new(q, y)?)
}

/// `tan(pi (Phi(z) - 1/2))`, evaluated through the upper tail for `z > 0`
/// so that large `|z|` keep their precision.
fn cauchy_from_normal(normal: &Normal, z: f64) -> f64 {
    let tail = normal.cdf(-z.abs()).max(f64::MIN_POSITIVE);
    let v = 1.0 / (std::f64::consts::PI * tail).tan();
    if z >= 0.0 {
        v
    } else {
        -v
    }
}

/// Rejection rates for every `(rho, method)` pair.
pub fn simulate(config: &SimulationConfig, runner: &TestRunner) -> Result<SimulationTable> {
    config.test.validate()?;
    if config.reps == 0 {
        return Err(Error::param("reps must be at least 1"));
    }
    if config.methods.is_empty() || config.rhos.is_empty() {
        return Err(Error::param("need at least one method and one rho"));
    }
    let start = Instant::now();
    let mut rows = Vec::new();
    for (ri, &rho) in config.rhos.iter().enumerate() {
        let factor = cholesky_factor(config.p, config.q, config.tau, rho)?;
        let stream_seed = rng::derive(config.test.seed, ri as u64);
        let perm_base = rng::derive(stream_seed, PERM_LABEL);
        let decisions: Vec<Vec<bool>> = (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                let mut g = rng::stream(stream_seed, rep as u64);
                let sample = draw_with_factor(config.example, &factor, config.p, config.q, config.n, &mut g)?;
                let reports = runner.run_methods_with_seed(
                    &sample,
                    &config.test,
                    &config.methods,
                    rng::derive(perm_base, rep as u64),
                )?;
                Ok(reports.iter().map(|r| r.reject).collect())
            })
            .collect::<Result<_>>()?;
        for (mi, &method) in config.methods.iter().enumerate() {
            let rejections = decisions.iter().filter(|d| d[mi]).count();
            let rate = rejections as f64 / config.reps as f64;
            rows.push(SimulationRow {
                example: config.example,
                tau: config.tau,
                rho,
                method,
                n: config.n,
                p: config.p,
                q: config.q,
                alpha: config.test.alpha,
                reps: config.reps,
                rejections,
                rate,
                se: binomial_se(rate, config.reps),
            });
        }
    }
    Ok(SimulationTable {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn simulate_example1(config: &SimulationConfig, runner: &TestRunner) -> Result<SimulationTable> {
    simulate(&SimulationConfig { example: Example::Gaussian, ..config.clone() }, runner)
}

pub fn simulate_example2(config: &SimulationConfig, runner: &TestRunner) -> Result<SimulationTable> {
    simulate(&SimulationConfig { example: Example::Cauchy, ..config.clone() }, runner)
}
