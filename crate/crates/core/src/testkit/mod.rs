//! The four competing independence tests and a simulation harness.
//!
//! - `hallin_theoretical`: center-outward statistic against the limiting
//!   critical value.
//! - `hallin_montecarlo`: the same statistic against a simulated exact null.
//! - `rdcov_permutation`: distance covariance of marginal ranks with a
//!   permutation threshold.
//! - `dcov_permutation`: distance covariance of the raw data with a
//!   permutation threshold.

mod simulate;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::Solver;
use crate::dcov::{marginal_ranks, statistic_mhat, PairedSample, PairingKernel};
use crate::grid::{AugmentedGrid, GridConfig, GridSpec};
use crate::nulldist::{monte_carlo_null, CriticalValueRequest, CriticalValues, MonteCarloNull, DEFAULT_GRID_FACTOR, DEFAULT_TRUNCATION};
use crate::{rng, Error, Points, Result};

pub use simulate::{covariance, draw_sample, simulate, simulate_example1, simulate_example2, Example, SimulationConfig, SimulationRow, SimulationTable};

/// Version of the JSON layout of [`TestReport`] and [`SimulationTable`].
pub const SCHEMA_VERSION: u32 = 1;

pub const MIN_SAMPLE_SIZE: usize = 8;

/// Below this size the asymptotic p-value is flagged as approximate.
pub const ASYMPTOTIC_CAVEAT_N: usize = 100;

pub const DEFAULT_MC_REPS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HallinTheoretical,
    HallinMonteCarlo,
    RdcovPermutation,
    DcovPermutation,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::HallinTheoretical,
        Method::HallinMonteCarlo,
        Method::RdcovPermutation,
        Method::DcovPermutation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::HallinTheoretical => "hallin_theoretical",
            Method::HallinMonteCarlo => "hallin_montecarlo",
            Method::RdcovPermutation => "rdcov_permutation",
            Method::DcovPermutation => "dcov_permutation",
        }
    }

    fn uses_scores(&self) -> bool {
        matches!(self, Method::HallinTheoretical | Method::HallinMonteCarlo)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid size and truncation of the limiting law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub m_r: usize,
    pub m_s: usize,
    pub truncation: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { m_r: DEFAULT_GRID_FACTOR, m_s: DEFAULT_GRID_FACTOR, truncation: DEFAULT_TRUNCATION }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub method: Method,
    pub alpha: f64,
    /// Permutations for the permutation tests; `None` means `n`.
    pub permutations: Option<usize>,
    /// Replicates of the simulated null for `hallin_montecarlo`.
    pub mc_reps: usize,
    pub seed: u64,
    pub grid: GridConfig,
    pub solver: Solver,
    pub spectrum: SpectrumOptions,
}

impl TestConfig {
    pub fn new(method: Method, alpha: f64) -> Self {
        TestConfig {
            method,
            alpha,
            permutations: None,
            mc_reps: DEFAULT_MC_REPS,
            seed: 0,
            grid: GridConfig::default(),
            solver: Solver::default(),
            spectrum: SpectrumOptions::default(),
        }
    }

    pub fn with_method(&self, method: Method) -> Self {
        TestConfig { method, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.permutations == Some(0) {
            return Err(Error::param("permutations must be at least 1"));
        }
        if self.mc_reps == 0 {
            return Err(Error::param("mc_reps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub grid_x: Option<GridSpec>,
    pub grid_y: Option<GridSpec>,
    pub solver: Option<Solver>,
    pub spectrum: Option<SpectrumOptions>,
    pub permutations: Option<usize>,
    pub mc_reps: Option<usize>,
    pub seed: u64,
    pub wall_time_ms: f64,
    pub notes: Vec<String>,
}

/// Outcome of one test. `reject` is `statistic > threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: u32,
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub alpha: f64,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub reject: bool,
    pub metadata: ReportMetadata,
}

impl TestReport {
    /// The report with the wall time zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> TestReport {
        let mut r = self.clone();
        r.metadata.wall_time_ms = 0.0;
        r
    }
}

/// Permutation null of `n * dCov_n(x, y)`: `reps` values from re-pairing `y`.
pub fn permutation_values(x: &Points, y: &Points, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::param("need at least one permutation"));
    }
    let kernel = PairingKernel::new(x, y)?;
    Ok(permuted(&kernel, reps, seed))
}

fn permuted(kernel: &PairingKernel, reps: usize, seed: u64) -> Vec<f64> {
    let n = kernel.n();
    (0..reps)
        .into_par_iter()
        .map_init(
            || (0..n).collect::<Vec<usize>>(),
            |perm, r| {
                let mut g = rng::stream(seed, r as u64);
                perm.iter_mut().enumerate().for_each(|(i, v)| *v = i);
                perm.shuffle(&mut g);
                n as f64 * kernel.dcov_permuted(perm)
            },
        )
        .collect()
}

/// The `ceil((1 - alpha)(R + 1))`-th smallest of `R` permuted values, or
/// `+inf` when that index exceeds `R` (the test can then never reject).
pub fn threshold_from_values(values: &[f64], alpha: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len();
    let k = ((1.0 - alpha) * (r as f64 + 1.0) - 1e-9).ceil() as usize;
    if k == 0 {
        f64::NEG_INFINITY
    } else if k > r {
        f64::INFINITY
    } else {
        sorted[k - 1]
    }
}

/// `(1 + #{values >= observed}) / (R + 1)`.
pub fn permutation_p_value(values: &[f64], observed: f64) -> f64 {
    let exceed = values.iter().filter(|v| **v >= observed).count();
    (1 + exceed) as f64 / (values.len() + 1) as f64
}

/// Permutation rejection threshold for `n * dCov_n(x, y)`.
pub fn permutation_threshold(x: &Points, y: &Points, reps: usize, alpha: f64, seed: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(threshold_from_values(&permutation_values(x, y, reps, seed)?, alpha))
}

type GridKey = (usize, usize, GridConfig);
type NullKey = (usize, usize, usize, GridConfig, usize, u64);

/// Runs tests while memoizing grids, critical values and simulated nulls,
/// which are shared by every sample of the same size and dimensions.
pub struct TestRunner {
    critical: Arc<CriticalValues>,
    grids: Mutex<HashMap<GridKey, Arc<AugmentedGrid>>>,
    nulls: Mutex<HashMap<NullKey, Arc<MonteCarloNull>>>,
}

impl Default for TestRunner {
    fn default() -> Self {
        Self::new(Arc::new(CriticalValues::in_memory()))
    }
}

/// Seed label separating the simulated null from permutation streams.
const NULL_LABEL: u64 = 0x4E55_4C4C;
pub(crate) const PERM_LABEL: u64 = 0x5045_524D;

impl TestRunner {
    pub fn new(critical: Arc<CriticalValues>) -> Self {
        TestRunner { critical, grids: Mutex::default(), nulls: Mutex::default() }
    }

    pub fn critical_values(&self) -> &CriticalValues {
        &self.critical
    }

    pub fn grid(&self, n: usize, d: usize, config: &GridConfig) -> Result<Arc<AugmentedGrid>> {
        let key = (n, d, *config);
        if let Some(g) = self.grids.lock().expect("grid cache").get(&key) {
            return Ok(Arc::clone(g));
        }
        let g = Arc::new(AugmentedGrid::for_sample(n, d, config)?);
        self.grids.lock().expect("grid cache").insert(key, Arc::clone(&g));
        Ok(g)
    }

    fn null(&self, n: usize, p: usize, q: usize, config: &TestConfig) -> Result<Arc<MonteCarloNull>> {
        let seed = rng::derive(config.seed, NULL_LABEL);
        let key = (n, p, q, config.grid, config.mc_reps, seed);
        if let Some(m) = self.nulls.lock().expect("null cache").get(&key) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(monte_carlo_null(n, p, q, &config.grid, config.mc_reps, seed)?);
        self.nulls.lock().expect("null cache").insert(key, Arc::clone(&m));
        Ok(m)
    }

    /// The center-outward statistic of `sample`.
    pub fn hallin_statistic(&self, sample: &PairedSample, config: &TestConfig) -> Result<f64> {
        let gx = self.grid(sample.n(), sample.p(), &config.grid)?;
        let gy = self.grid(sample.n(), sample.q(), &config.grid)?;
        statistic_mhat(sample, &gx, &gy, config.solver)
    }

    pub fn run(&self, sample: &PairedSample, config: &TestConfig) -> Result<TestReport> {
        self.run_with_statistic(sample, config, None, rng::derive(config.seed, PERM_LABEL))
    }

    /// Runs several methods on one sample, computing the center-outward
    /// statistic once.
    pub fn run_methods(&self, sample: &PairedSample, config: &TestConfig, methods: &[Method]) -> Result<Vec<TestReport>> {
        self.run_methods_with_seed(sample, config, methods, rng::derive(config.seed, PERM_LABEL))
    }

    /// As [`Self::run_methods`] with an explicit permutation seed; the
    /// simulated null still follows `config.seed` so it is shared.
    pub(crate) fn run_methods_with_seed(
        &self,
        sample: &PairedSample,
        config: &TestConfig,
        methods: &[Method],
        perm_seed: u64,
    ) -> Result<Vec<TestReport>> {
        let mut cached = None;
        methods
            .iter()
            .map(|&m| {
                let cfg = config.with_method(m);
                if m.uses_scores() && cached.is_none() {
                    cached = Some(self.hallin_statistic(sample, &cfg)?);
                }
                self.run_with_statistic(sample, &cfg, if m.uses_scores() { cached } else { None }, perm_seed)
            })
            .collect()
    }

    fn run_with_statistic(
        &self,
        sample: &PairedSample,
        config: &TestConfig,
        statistic: Option<f64>,
        perm_seed: u64,
    ) -> Result<TestReport> {
        config.validate()?;
        let (n, p, q) = (sample.n(), sample.p(), sample.q());
        if n < MIN_SAMPLE_SIZE {
            return Err(Error::param(format!("sample size {n} below the minimum of {MIN_SAMPLE_SIZE}")));
        }
        let start = Instant::now();
        let mut meta = ReportMetadata {
            grid_x: None,
            grid_y: None,
            solver: None,
            spectrum: None,
            permutations: None,
            mc_reps: None,
            seed: config.seed,
            wall_time_ms: 0.0,
            notes: Vec::new(),
        };
        let (statistic, threshold, p_value) = match config.method {
            Method::HallinTheoretical | Method::HallinMonteCarlo => {
                meta.grid_x = Some(self.grid(n, p, &config.grid)?.spec.clone());
                meta.grid_y = Some(self.grid(n, q, &config.grid)?.spec.clone());
                meta.solver = Some(config.solver);
                let stat = match statistic {
                    Some(s) => s,
                    None => self.hallin_statistic(sample, config)?,
                };
                if config.method == Method::HallinTheoretical {
                    let req = CriticalValueRequest {
                        p,
                        q,
                        alpha: config.alpha,
                        m_r: config.spectrum.m_r,
                        m_s: config.spectrum.m_s,
                        truncation: config.spectrum.truncation,
                    };
                    let threshold = self.critical.get(&req)?;
                    let law = self.critical.law(&req)?;
                    let p_value = (1.0 - law.cdf(stat)?).clamp(0.0, 1.0);
                    meta.spectrum = Some(config.spectrum);
                    meta.notes.push("p-value from the limiting law; the decision uses the cached critical value".into());
                    if n < ASYMPTOTIC_CAVEAT_N {
                        meta.notes.push(format!(
                            "n = {n} < {ASYMPTOTIC_CAVEAT_N}: the limiting law may be inaccurate; consider hallin_montecarlo"
                        ));
                    }
                    (stat, threshold, Some(p_value))
                } else {
                    let null = self.null(n, p, q, config)?;
                    let threshold = null.quantile(1.0 - config.alpha)?;
                    meta.mc_reps = Some(config.mc_reps);
                    meta.notes.push("threshold is the ceil((1-alpha)R)-th simulated value; p-value is (1+#{null >= statistic})/(R+1)".into());
                    (stat, threshold, Some(permutation_p_value(&null.values, stat)))
                }
            }
            Method::RdcovPermutation | Method::DcovPermutation => {
                let (x, y) = if config.method == Method::RdcovPermutation {
                    (marginal_ranks(sample.x()), marginal_ranks(sample.y()))
                } else {
                    (sample.x().clone(), sample.y().clone())
                };
                let kernel = PairingKernel::new(&x, &y)?;
                let stat = n as f64 * kernel.dcov();
                let reps = config.permutations.unwrap_or(n);
                let values = permuted(&kernel, reps, perm_seed);
                meta.permutations = Some(reps);
                meta.notes.push("threshold is the ceil((1-alpha)(R+1))-th permuted value; p-value is (1+#{permuted >= statistic})/(R+1)".into());
                (stat, threshold_from_values(&values, config.alpha), Some(permutation_p_value(&values, stat)))
            }
        };
        meta.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(TestReport {
            schema_version: SCHEMA_VERSION,
            method: config.method,
            n,
            p,
            q,
            alpha: config.alpha,
            statistic,
            threshold,
            p_value,
            reject: statistic > threshold,
            metadata: meta,
        })
    }
}

/// One-off test with fresh caches.
pub fn run_test(sample: &PairedSample, config: &TestConfig) -> Result<TestReport> {
    TestRunner::default().run(sample, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut rng::Rng, n: usize, d: usize) -> Points {
        Points::new(d, (0..n * d).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
    }

    fn small_spectrum() -> SpectrumOptions {
        SpectrumOptions { m_r: 12, m_s: 12, truncation: 5000 }
    }

    #[test]
    fn order_statistic_convention() {
        let v: Vec<f64> = (1..=19).map(f64::from).collect();
        // ceil(0.95 * 20) = 19
        assert_eq!(threshold_from_values(&v, 0.05), 19.0);
        // ceil(0.9 * 20) = 18
        assert_eq!(threshold_from_values(&v, 0.1), 18.0);
        // R = 1: ceil(0.95 * 2) = 2 > 1, never rejects
        assert_eq!(threshold_from_values(&[3.0], 0.05), f64::INFINITY);
        // R = 1, alpha = 0.6: ceil(0.4 * 2) = 1
        assert_eq!(threshold_from_values(&[3.0], 0.6), 3.0);
        assert_eq!(permutation_p_value(&[1.0, 2.0, 3.0], 2.0), 0.75);
    }

    #[test]
    fn decision_is_strict() {
        // observed equal to the threshold is not a rejection
        let mut rng = rng::seeded(1);
        let x = gaussian(&mut rng, 30, 2);
        let y = gaussian(&mut rng, 30, 1);
        let sample = PairedSample::new(x, y).unwrap();
        let runner = TestRunner::default();
        let mut cfg = TestConfig::new(Method::HallinTheoretical, 0.05);
        cfg.spectrum = small_spectrum();
        let stat = runner.hallin_statistic(&sample, &cfg).unwrap();
        let req = CriticalValueRequest { p: 2, q: 1, alpha: 0.05, m_r: 12, m_s: 12, truncation: 5000 };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cv.jsonl");
        let rec = crate::nulldist::CacheRecord {
            p: 2,
            q: 1,
            alpha: 0.05,
            m_r: 12,
            m_s: 12,
            truncation: 5000,
            value: stat,
            generator_version: crate::nulldist::GENERATOR_VERSION.into(),
        };
        std::fs::write(&path, serde_json::to_string(&rec).unwrap() + "\n").unwrap();
        let pinned = TestRunner::new(Arc::new(CriticalValues::with_file(&path)));
        assert_eq!(pinned.critical_values().lookup(&req), Some(stat));
        let report = pinned.run(&sample, &cfg).unwrap();
        assert_eq!(report.threshold, report.statistic);
        assert!(!report.reject);
    }

    #[test]
    fn reports_are_deterministic() {
        let mut rng = rng::seeded(2);
        let x = gaussian(&mut rng, 40, 2);
        let y = gaussian(&mut rng, 40, 2);
        let sample = PairedSample::new(x, y).unwrap();
        let mut cfg = TestConfig::new(Method::HallinTheoretical, 0.05);
        cfg.spectrum = small_spectrum();
        cfg.mc_reps = 200;
        cfg.seed = 11;
        for m in Method::ALL {
            let a = run_test(&sample, &cfg.with_method(m)).unwrap();
            let b = run_test(&sample, &cfg.with_method(m)).unwrap();
            assert_eq!(a.without_timing(), b.without_timing());
            assert_eq!(a.reject, a.statistic > a.threshold);
            let p = a.p_value.unwrap();
            assert!((0.0..=1.0).contains(&p));
            let json = serde_json::to_string(&a).unwrap();
            let back: TestReport = serde_json::from_str(&json).unwrap();
            assert_eq!(back, a);
        }
    }

    #[test]
    fn small_n_caveat_and_minimum() {
        let mut rng = rng::seeded(3);
        let mut cfg = TestConfig::new(Method::HallinTheoretical, 0.05);
        cfg.spectrum = small_spectrum();
        let s = PairedSample::new(gaussian(&mut rng, 20, 1), gaussian(&mut rng, 20, 1)).unwrap();
        let r = run_test(&s, &cfg).unwrap();
        assert!(r.metadata.notes.iter().any(|n| n.contains("n = 20")));
        let tiny = PairedSample::new(gaussian(&mut rng, 6, 1), gaussian(&mut rng, 6, 1)).unwrap();
        assert!(run_test(&tiny, &cfg).is_err());
        cfg.alpha = 1.5;
        assert!(run_test(&s, &cfg).is_err());
    }

    #[test]
    fn run_methods_shares_statistic() {
        let mut rng = rng::seeded(4);
        let s = PairedSample::new(gaussian(&mut rng, 30, 2), gaussian(&mut rng, 30, 2)).unwrap();
        let mut cfg = TestConfig::new(Method::HallinTheoretical, 0.05);
        cfg.spectrum = small_spectrum();
        cfg.mc_reps = 100;
        let runner = TestRunner::default();
        let all = runner.run_methods(&s, &cfg, &Method::ALL).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all[0].statistic, all[1].statistic);
        for (r, m) in all.iter().zip(Method::ALL) {
            assert_eq!(r.without_timing(), runner.run(&s, &cfg.with_method(m)).unwrap().without_timing());
        }
    }

    #[test]
    fn permutation_threshold_reproducible() {
        let mut rng = rng::seeded(5);
        let x = gaussian(&mut rng, 25, 1);
        let y = gaussian(&mut rng, 25, 2);
        let a = permutation_threshold(&x, &y, 99, 0.05, 7).unwrap();
        let b = permutation_threshold(&x, &y, 99, 0.05, 7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(permutation_threshold(&x, &y, 0, 0.05, 7).is_err());
    }
}
