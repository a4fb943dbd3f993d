//! Linear sum assignment between a sample and a grid.
//!
//! The empirical center-outward distribution function is the bijection from
//! sample points to grid points with minimal total squared distance. Three
//! solvers are provided: exhaustive search (test oracle), a real-valued
//! Hungarian method, and the Gabow–Tarjan bit-scaling algorithm on integer
//! costs.

mod brute;
mod gabow_tarjan;
mod hungarian;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::AugmentedGrid;
use crate::points::{norm, sq_dist};
use crate::{Error, Points, Result};

pub use brute::lsap_brute_force;
pub use gabow_tarjan::{lsap_gabow_tarjan, GabowTarjanSolution};
pub use hungarian::{lsap_hungarian, solve_hungarian, HungarianSolution};

/// Default quantization scale for the integer solver.
pub const DEFAULT_SCALE: u64 = 1 << 20;

/// Dense square matrix of finite non-negative costs, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != n * n {
            return Err(Error::InvalidCosts(format!(
                "{} entries for a {n}x{n} matrix",
                costs.len()
            )));
        }
        if let Some(pos) = costs.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidCosts(format!(
                "entry ({}, {}) = {} is not a finite non-negative number",
                pos / n,
                pos % n,
                costs[pos]
            )));
        }
        Ok(CostMatrix { n, costs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidCosts("matrix is not square".into()));
        }
        CostMatrix::new(n, rows.concat())
    }

    /// Squared Euclidean distances `||x_i - g_j||^2`.
    pub fn squared_distances(samples: &Points, targets: &Points) -> Result<Self> {
        if samples.dim() != targets.dim() {
            return Err(Error::DimensionMismatch(format!(
                "samples have dimension {}, targets {}",
                samples.dim(),
                targets.dim()
            )));
        }
        if samples.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples but {} targets",
                samples.len(),
                targets.len()
            )));
        }
        let n = samples.len();
        let mut costs = vec![0.0; n * n];
        costs
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                let x = samples.row(i);
                for (j, c) in row.iter_mut().enumerate() {
                    *c = sq_dist(x, targets.row(j));
                }
            });
        CostMatrix::new(n, costs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.costs[i * self.n..(i + 1) * self.n]
    }

    pub fn total(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// Dense square matrix of integer costs in `[0, max_cost]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntCostMatrix {
    n: usize,
    costs: Vec<i64>,
    max_cost: i64,
}

impl IntCostMatrix {
    pub fn new(n: usize, costs: Vec<i64>) -> Result<Self> {
        if costs.len() != n * n {
            return Err(Error::InvalidCosts(format!(
                "{} entries for a {n}x{n} matrix",
                costs.len()
            )));
        }
        if let Some(pos) = costs.iter().position(|&c| c < 0) {
            return Err(Error::InvalidCosts(format!(
                "entry ({}, {}) = {} is negative",
                pos / n,
                pos % n,
                costs[pos]
            )));
        }
        let max_cost = costs.iter().copied().max().unwrap_or(0);
        Ok(IntCostMatrix { n, costs, max_cost })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidCosts("matrix is not square".into()));
        }
        IntCostMatrix::new(n, rows.concat())
    }

    /// Accepts real entries only when they are exact integers.
    pub fn from_f64(n: usize, costs: &[f64]) -> Result<Self> {
        let mut out = Vec::with_capacity(costs.len());
        for (pos, &c) in costs.iter().enumerate() {
            if !c.is_finite() || c.fract() != 0.0 || c.abs() > i64::MAX as f64 {
                return Err(Error::InvalidCosts(format!(
                    "entry ({}, {}) = {c} is not an integer",
                    pos / n.max(1),
                    pos % n.max(1)
                )));
            }
            out.push(c as i64);
        }
        IntCostMatrix::new(n, out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The bound `N` on all entries.
    pub fn max_cost(&self) -> i64 {
        self.max_cost
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.costs[i * self.n + j]
    }

    pub fn total(&self, perm: &[usize]) -> i64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }

    pub fn to_real(&self) -> CostMatrix {
        CostMatrix {
            n: self.n,
            costs: self.costs.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Maps each cost to `round(cost * scale)` (half away from zero).
///
/// The optimum of the quantized problem is within `n / scale` of the real
/// optimum in objective value.
pub fn quantize_costs(costs: &CostMatrix, scale: u64) -> Result<IntCostMatrix> {
    if scale == 0 {
        return Err(Error::param("quantization scale must be at least 1"));
    }
    let s = scale as f64;
    let limit = i64::MAX as f64;
    let mut out = Vec::with_capacity(costs.costs.len());
    for &c in &costs.costs {
        let v = (c * s).round();
        if v >= limit {
            return Err(Error::Overflow(format!(
                "cost {c} times scale {scale} exceeds the 64-bit integer range"
            )));
        }
        out.push(v as i64);
    }
    IntCostMatrix::new(costs.n, out)
}

/// A bijection `sample i -> target perm[i]` and its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn is_bijection(&self) -> bool {
        let n = self.perm.len();
        let mut seen = vec![false; n];
        self.perm.iter().all(|&j| j < n && !std::mem::replace(&mut seen[j], true))
    }
}

/// Checks complementary slackness: `u_i + v_j <= c_ij + tol` everywhere and
/// `|u_i + v_{perm(i)} - c_{i,perm(i)}| <= tol`.
pub fn verify_certificate(costs: &CostMatrix, perm: &[usize], u: &[f64], v: &[f64], tol: f64) -> bool {
    let n = costs.n();
    for i in 0..n {
        for j in 0..n {
            if u[i] + v[j] > costs.get(i, j) + tol {
                return false;
            }
        }
        if (u[i] + v[perm[i]] - costs.get(i, perm[i])).abs() > tol {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Solver {
    /// Real-arithmetic shortest augmenting path Hungarian method.
    #[default]
    Hungarian,
    /// Bit-scaling on costs quantized by `scale`.
    GabowTarjan { scale: u64 },
}


impl Solver {
    pub fn solve(&self, costs: &CostMatrix) -> Result<Assignment> {
        match *self {
            Solver::Hungarian => lsap_hungarian(costs),
            Solver::GabowTarjan { scale } => {
                let q = quantize_costs(costs, scale)?;
                let sol = lsap_gabow_tarjan(&q)?;
                let total_cost = costs.total(&sol.assignment.perm);
                Ok(Assignment {
                    perm: sol.assignment.perm,
                    total_cost,
                })
            }
        }
    }
}

/// Per-sample empirical center-outward values, ranks and signs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterOutwardScores {
    /// `F_n(x_i)`, a grid point for every sample.
    pub values: Points,
    /// `(n_R + 1) * ||F_n(x_i)||`, integers in `0..=n_R`.
    pub ranks: Vec<f64>,
    /// `F_n(x_i) / ||F_n(x_i)||`, or zero at the origin.
    pub signs: Points,
    /// Grid index assigned to each sample.
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

/// In dimension one the monotone coupling is optimal and `solver` is not
/// consulted.
pub fn center_outward(samples: &Points, grid: &AugmentedGrid, solver: Solver) -> Result<CenterOutwardScores> {
    if samples.dim() != grid.dim() {
        return Err(Error::DimensionMismatch(format!(
            "samples have dimension {}, grid {}",
            samples.dim(),
            grid.dim()
        )));
    }
    if samples.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for a grid of {} points",
            samples.len(),
            grid.len()
        )));
    }
    let assignment = if samples.dim() == 1 {
        monotone_coupling(samples.as_slice(), grid.points.as_slice())
    } else {
        solver.solve(&CostMatrix::squared_distances(samples, &grid.points)?)?
    };
    let values = grid.points.select(&assignment.perm);
    let scale = (grid.spec.n_r + 1) as f64;
    let mut ranks = Vec::with_capacity(values.len());
    let mut signs = Points::zeros(values.dim(), values.len());
    for (i, v) in values.rows().enumerate() {
        let r = norm(v);
        ranks.push(scale * r);
        if r > 0.0 {
            for (s, x) in signs.row_mut(i).iter_mut().zip(v) {
                *s = x / r;
            }
        }
    }
    Ok(CenterOutwardScores {
        values,
        ranks,
        signs,
        perm: assignment.perm,
        total_cost: assignment.total_cost,
    })
}

/// Optimal coupling for squared costs on the line: the `k`-th smallest
/// sample goes to the `k`-th smallest target. Stable sorts keep ties in
/// index order.
fn monotone_coupling(samples: &[f64], targets: &[f64]) -> Assignment {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        idx
    };
    let (rows, cols) = (order(samples), order(targets));
    let mut perm = vec![0; samples.len()];
    for (&i, &j) in rows.iter().zip(&cols) {
        perm[i] = j;
    }
    let total_cost = perm.iter().enumerate().map(|(i, &j)| (samples[i] - targets[j]).powi(2)).sum();
    Assignment { perm, total_cost }
}
