//! Distribution of a centered weighted sum of chi-square variables,
//! `sum_k lambda_k (xi_k^2 - 1)`, by characteristic-function inversion:
//!
//! ```text
//! F(x) = 1/2 - (1/pi) int_0^inf sin(theta(u)) / (u rho(u)) du
//! theta(u) = 1/2 sum_k (atan(lambda_k u) - lambda_k u) - x u / 2
//! log rho(u) = 1/4 sum_k log(1 + lambda_k^2 u^2)
//! ```
//!
//! The phase without the `x` term and the modulus do not depend on `x`, so
//! they are tabulated once at the quadrature nodes and every CDF evaluation
//! costs one pass over the table. Weights with `|lambda| u` below
//! [`TAYLOR_CUTOFF`] enter through power-series in their power sums, which is
//! also how products omitted by truncation are accounted for.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::ProductSpectrum;
use crate::{Error, Result};

pub const TAYLOR_CUTOFF: f64 = 0.02;
pub const CDF_TOLERANCE: f64 = 1e-4;
pub const QUANTILE_TOLERANCE: f64 = 2e-4;
const ENVELOPE_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 2_000_000;
const REL_PANEL_WIDTH: f64 = 0.25;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights on the odd-indexed Kronrod nodes.
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// A CDF value with its integration error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfValue {
    pub value: f64,
    pub error_bound: f64,
}

/// Quadrature nodes with the `x`-independent parts of the integrand.
#[derive(Clone, Debug)]
struct Table {
    x_max: f64,
    /// `(node, kronrod weight, gauss weight, phase, 1 / (u rho))`, 15 per panel.
    nodes: Vec<[f64; 5]>,
    truncation_bound: f64,
    tail_outside_series: bool,
}

/// Law of `sum_k lambda_k (xi_k^2 - 1)` with i.i.d. standard normal `xi_k`.
#[derive(Clone, Debug)]
pub struct WeightedChiSquare {
    weights: Vec<f64>,
    /// `suffix[k][m - 2]`: power sum of order `m = 2..=7` over `weights[k..]`
    /// plus the omitted tail.
    suffix: Vec<[f64; 6]>,
    tail_max: f64,
    abs_sum: f64,
    positive_sum: f64,
    all_positive: bool,
    variance: f64,
    table: Table,
}

impl WeightedChiSquare {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_tail(weights, [0.0; 7], 0.0)
    }

    pub fn from_products(products: &ProductSpectrum) -> Result<Self> {
        Self::with_tail(products.lambdas.clone(), products.tail_power_sums, products.tail_max)
    }

    /// `tail_power_sums[m - 1]` holds `sum lambda^m` over additional weights
    /// not listed individually, each of magnitude at most `tail_max`.
    pub fn with_tail(mut weights: Vec<f64>, tail_power_sums: [f64; 7], tail_max: f64) -> Result<Self> {
        weights.retain(|w| *w != 0.0);
        if weights.is_empty() {
            return Err(Error::param("weighted chi-square needs at least one nonzero weight"));
        }
        if weights.iter().chain(&tail_power_sums).any(|w| !w.is_finite()) || !tail_max.is_finite() {
            return Err(Error::param("non-finite weight"));
        }
        weights.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        let mut suffix = vec![[0.0; 6]; weights.len() + 1];
        suffix[weights.len()].copy_from_slice(&tail_power_sums[1..]);
        for k in (0..weights.len()).rev() {
            let mut row = suffix[k + 1];
            let mut p = weights[k];
            for s in row.iter_mut() {
                p *= weights[k];
                *s += p;
            }
            suffix[k] = row;
        }
        let abs_sum = weights.iter().rev().map(|w| w.abs()).sum::<f64>() + tail_power_sums[0].abs();
        let positive_sum = weights.iter().rev().filter(|w| **w > 0.0).sum::<f64>() + tail_power_sums[0].max(0.0);
        let all_positive = weights.iter().all(|w| *w > 0.0) && tail_power_sums[0] >= 0.0;
        let variance = 2.0 * suffix[0][0];
        let x_max = abs_sum + 12.0 * variance.sqrt();
        let mut dist = WeightedChiSquare {
            weights,
            suffix,
            tail_max: tail_max.abs(),
            abs_sum,
            positive_sum,
            all_positive,
            variance,
            table: Table { x_max: 0.0, nodes: Vec::new(), truncation_bound: 0.0, tail_outside_series: false },
        };
        if !dist.is_single_chi_square() {
            dist.table = dist.build_table(x_max)?;
        }
        Ok(dist)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// True if some omitted weights were outside the power-series range at
    /// large integration arguments and were dropped there.
    pub fn tail_outside_series(&self) -> bool {
        self.table.tail_outside_series
    }

    fn is_single_chi_square(&self) -> bool {
        self.weights.len() == 1 && self.suffix[1].iter().all(|s| *s == 0.0)
    }

    /// `(phase without the x term, log rho)` at `u`.
    fn phase_and_log_modulus(&self, u: f64) -> (f64, f64, bool) {
        let cut = self.weights.partition_point(|w| w.abs() * u >= TAYLOR_CUTOFF);
        let mut phase = 0.0;
        let mut log_mod = 0.0;
        for &w in &self.weights[..cut] {
            let z = w * u;
            phase += z.atan() - z;
            log_mod += (z * z).ln_1p();
        }
        let s = &self.suffix[cut];
        let (u2, u3) = (u * u, u * u * u);
        let (u4, u5) = (u2 * u2, u2 * u3);
        let (u6, u7) = (u3 * u3, u3 * u4);
        phase += -u3 * s[1] / 3.0 + u5 * s[3] / 5.0 - u7 * s[5] / 7.0;
        log_mod += u2 * s[0] - u4 * s[2] / 2.0 + u6 * s[4] / 3.0;
        let tail_ok = self.tail_max * u < TAYLOR_CUTOFF;
        (0.5 * phase, 0.25 * log_mod, tail_ok)
    }

    fn envelope(&self, u: f64) -> f64 {
        let (_, log_mod, _) = self.phase_and_log_modulus(u);
        (-log_mod).exp() / u
    }

    fn build_table(&self, x_max: f64) -> Result<Table> {
        let lambda_max = self.weights[0].abs();
        let omega = 0.5 * (self.abs_sum + x_max);
        let osc_width = 1.0 / omega;
        let start_width = osc_width.min(0.5 / lambda_max);

        // upper limit: envelope and its tail integral both negligible
        let mut upper = 1.0 / lambda_max;
        while self.envelope(upper) * upper >= ENVELOPE_TOL {
            upper *= 2.0;
            if upper > 1e12 {
                return Err(Error::Integration { error_bound: self.envelope(upper) * upper });
            }
        }
        let truncation_bound = 2.0 * self.envelope(upper) * upper / std::f64::consts::PI;

        let mut nodes = Vec::new();
        let mut tail_outside_series = false;
        let mut a = 0.0;
        while a < upper {
            let h = osc_width.min(start_width.max(REL_PANEL_WIDTH * a)).min(upper - a);
            let centre = a + 0.5 * h;
            let half = 0.5 * h;
            for k in 0..15 {
                let (idx, sign) = match k {
                    0..=6 => (k, -1.0),
                    7 => (7, 0.0),
                    _ => (14 - k, 1.0),
                };
                let u = centre + sign * half * GK_NODES[idx];
                let g = if idx % 2 == 1 { G_WEIGHTS[idx / 2] } else { 0.0 };
                let (phase, log_mod, tail_ok) = self.phase_and_log_modulus(u);
                tail_outside_series |= !tail_ok;
                nodes.push([u, half * GK_WEIGHTS[idx], half * g, phase, (-log_mod).exp() / u]);
            }
            a += h;
            if nodes.len() > 15 * MAX_PANELS {
                return Err(Error::Integration { error_bound: f64::INFINITY });
            }
        }
        Ok(Table { x_max, nodes, truncation_bound, tail_outside_series })
    }

    fn integrate(&self, table: &Table, x: f64) -> CdfValue {
        let mut total = 0.0;
        let mut err = 0.0;
        for panel in table.nodes.chunks_exact(15) {
            let mut kron = 0.0;
            let mut gauss = 0.0;
            for &[u, wk, wg, phase, inv] in panel {
                let f = (phase - 0.5 * x * u).sin() * inv;
                kron += wk * f;
                gauss += wg * f;
            }
            total += kron;
            err += (kron - gauss).abs();
        }
        let pi = std::f64::consts::PI;
        CdfValue {
            value: 0.5 - total / pi,
            error_bound: err / pi + table.truncation_bound,
        }
    }

    /// `P(Q <= x)` with an error bound, before clamping.
    pub fn cdf_with_error(&self, x: f64) -> Result<CdfValue> {
        if self.all_positive && x <= -self.positive_sum {
            return Ok(CdfValue { value: 0.0, error_bound: 0.0 });
        }
        if self.is_single_chi_square() {
            let w = self.weights[0];
            let chi = ChiSquared::new(1.0).expect("valid degrees of freedom");
            let t = 1.0 + x / w;
            let value = if w > 0.0 { chi.cdf(t.max(0.0)) } else { 1.0 - chi.cdf(t.max(0.0)) };
            return Ok(CdfValue { value, error_bound: 1e-14 });
        }
        if x > self.table.x_max && self.all_positive {
            let bound = self.chernoff_upper_tail(x);
            if bound <= CDF_TOLERANCE {
                return Ok(CdfValue { value: 1.0, error_bound: bound });
            }
        }
        let raw = if x.abs() <= self.table.x_max {
            self.integrate(&self.table, x)
        } else {
            let wider = self.build_table(x.abs())?;
            self.integrate(&wider, x)
        };
        if !(raw.error_bound <= CDF_TOLERANCE) {
            return Err(Error::Integration { error_bound: raw.error_bound });
        }
        let snap = raw.error_bound.max(1e-9);
        let value = if raw.value <= snap {
            0.0
        } else if raw.value >= 1.0 - snap {
            1.0
        } else {
            raw.value
        };
        Ok(CdfValue { value, error_bound: raw.error_bound })
    }

    /// Chernoff bound on `P(Q > x)` for nonnegative weights. Omitted weights
    /// enter through `-log(1 - z)/2 - z/2 <= z^2 / (4 (1 - z))`.
    fn chernoff_upper_tail(&self, x: f64) -> f64 {
        let lambda_max = self.weights[0].max(self.tail_max);
        let tail_s2 = self.suffix[self.weights.len()][0];
        let mut best = f64::INFINITY;
        for k in 1..=20 {
            let t = (k as f64 / 20.0 - 0.01) / (2.0 * lambda_max);
            let explicit: f64 = self
                .weights
                .iter()
                .rev()
                .map(|&w| -0.5 * (-2.0 * t * w).ln_1p() - t * w)
                .sum();
            let tail = t * t * tail_s2 / (1.0 - 2.0 * t * self.tail_max);
            best = best.min(-t * x + explicit + tail);
        }
        best.exp().min(1.0)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.cdf_with_error(x)?.value)
    }

    /// Smallest `x` with `P(Q <= x) >= prob`, by bracketing and bisection.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::param(format!("probability {prob} outside (0, 1)")));
        }
        let sd = self.variance.sqrt();
        let mut lo = if self.all_positive { -self.positive_sum } else { -self.abs_sum - 4.0 * sd };
        let mut expand = 0;
        while self.cdf(lo)? > prob {
            lo -= (4.0 * sd).max(1e-3) * f64::from(1 << expand.min(20));
            expand += 1;
            if expand > 60 {
                return Err(Error::Bracket(format!("no lower bracket for probability {prob}")));
            }
        }
        let mut hi = 4.0 * sd;
        expand = 0;
        while self.cdf(hi)? < prob {
            lo = hi;
            hi += (4.0 * sd).max(1e-3) * f64::from(1 << expand.min(20));
            expand += 1;
            if expand > 60 {
                return Err(Error::Bracket(format!("no upper bracket for probability {prob}")));
            }
        }
        for _ in 0..200 {
            if hi - lo <= 1e-10 * (1.0 + hi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid)? >= prob {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let achieved = self.cdf(hi)?;
        if (achieved - prob).abs() > QUANTILE_TOLERANCE {
            return Err(Error::Bracket(format!(
                "bisection ended at CDF {achieved} for probability {prob}"
            )));
        }
        Ok(hi)
    }
}
