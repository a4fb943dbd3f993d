use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcov::PairingKernel;
use crate::grid::{AugmentedGrid, GridConfig};
use crate::{rng, Error, Result};

/// Sorted replicates of the statistic under independence at a fixed `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloNull {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub values: Vec<f64>,
}

impl MonteCarloNull {
    pub fn reps(&self) -> usize {
        self.values.len()
    }

    /// Empirical quantile: the `ceil(prob * R)`-th smallest replicate.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        order_statistic(&self.values, prob)
    }

    /// Percentile bootstrap interval for [`Self::quantile`].
    pub fn quantile_ci(&self, prob: f64, level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) || resamples == 0 {
            return Err(Error::param("bootstrap needs a level in (0, 1) and at least one resample"));
        }
        let r = self.values.len();
        let mut stats: Vec<f64> = (0..resamples)
            .into_par_iter()
            .map(|b| {
                let mut g = rng::stream(seed, b as u64);
                let mut draw: Vec<f64> = (0..r).map(|_| self.values[g.gen_range(0..r)]).collect();
                draw.sort_by(f64::total_cmp);
                order_statistic(&draw, prob)
            })
            .collect::<Result<_>>()?;
        stats.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - level);
        Ok((order_statistic(&stats, tail.max(1e-12))?, order_statistic(&stats, 1.0 - tail)?))
    }
}

fn order_statistic(sorted: &[f64], prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob <= 1.0) || sorted.is_empty() {
        return Err(Error::param(format!("quantile level {prob} outside (0, 1] or no replicates")));
    }
    let k = (prob * sorted.len() as f64).ceil() as usize;
    Ok(sorted[k.clamp(1, sorted.len()) - 1])
}

/// Exact finite-sample null by simulation. Under independence the pair of
/// rank vectors is a uniformly random pairing of the two grids, so each
/// replicate only shuffles the second grid.
pub fn monte_carlo_null(
    n: usize,
    p: usize,
    q: usize,
    config: &GridConfig,
    reps: usize,
    seed: u64,
) -> Result<MonteCarloNull> {
    if reps == 0 {
        return Err(Error::param("need at least one replicate"));
    }
    let gx = AugmentedGrid::for_sample(n, p, config)?;
    let gy = AugmentedGrid::for_sample(n, q, config)?;
    let kernel = PairingKernel::new(&gx.points, &gy.points)?;
    let nf = n as f64;
    let mut values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(
            || (0..n).collect::<Vec<usize>>(),
            |perm, r| {
                let mut g = rng::stream(seed, r as u64);
                perm.iter_mut().enumerate().for_each(|(i, v)| *v = i);
                perm.shuffle(&mut g);
                nf * kernel.dcov_permuted(perm)
            },
        )
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(MonteCarloNull { n, p, q, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replicate_reproducible() {
        let cfg = GridConfig::default();
        let a = monte_carlo_null(50, 2, 1, &cfg, 1, 9).unwrap();
        let b = monte_carlo_null(50, 2, 1, &cfg, 1, 9).unwrap();
        assert_eq!(a.values[0].to_bits(), b.values[0].to_bits());
        assert_eq!(a.quantile(0.5).unwrap(), a.values[0]);
    }

    #[test]
    fn independent_of_thread_count() {
        let cfg = GridConfig::default();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = monte_carlo_null(40, 2, 2, &cfg, 64, 1).unwrap();
        let b = pool.install(|| monte_carlo_null(40, 2, 2, &cfg, 64, 1).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn quantile_convention() {
        let m = MonteCarloNull { n: 4, p: 1, q: 1, values: (1..=10).map(f64::from).collect() };
        assert_eq!(m.quantile(0.95).unwrap(), 10.0);
        assert_eq!(m.quantile(0.9).unwrap(), 9.0);
        assert_eq!(m.quantile(0.05).unwrap(), 1.0);
        assert!(m.quantile(0.0).is_err());
    }

    #[test]
    fn bootstrap_interval_shrinks_with_reps() {
        let cfg = GridConfig::default();
        let width = |reps| {
            let m = monte_carlo_null(60, 1, 1, &cfg, reps, 3).unwrap();
            let (lo, hi) = m.quantile_ci(0.95, 0.9, 400, 4).unwrap();
            assert!(lo <= m.quantile(0.95).unwrap() && m.quantile(0.95).unwrap() <= hi);
            hi - lo
        };
        let (w1, w2, w3) = (width(200), width(1600), width(12800));
        assert!(w1 > w2 && w2 > w3, "{w1} {w2} {w3}");
    }

    #[test]
    fn values_are_mostly_small_and_positive_in_mean() {
        let m = monte_carlo_null(100, 1, 1, &GridConfig::default(), 500, 2).unwrap();
        let mean: f64 = m.values.iter().sum::<f64>() / m.reps() as f64;
        // limiting law is centered; the finite-n mean is close to zero
        assert!(mean.abs() < 0.05, "{mean}");
    }
}
