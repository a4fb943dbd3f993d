//! Sample distance covariance and the center-outward test statistic.

use serde::{Deserialize, Serialize};

use crate::assignment::{center_outward, Solver};
use crate::grid::AugmentedGrid;
use crate::points::dist;
use crate::{Error, Points, Result};

const NAIVE_MAX_N: usize = 64;

/// `n` paired observations `(X_i, Y_i)` with `X_i` in `R^p`, `Y_i` in `R^q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    x: Points,
    y: Points,
}

impl PairedSample {
    pub fn new(x: Points, y: Points) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows, Y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 4 {
            return Err(Error::param(format!(
                "need at least 4 observations, got {}",
                x.len()
            )));
        }
        if !x.all_finite() || !y.all_finite() {
            return Err(Error::param("sample contains non-finite entries"));
        }
        Ok(PairedSample { x, y })
    }

    pub fn x(&self) -> &Points {
        &self.x
    }

    pub fn y(&self) -> &Points {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.x.dim()
    }

    pub fn q(&self) -> usize {
        self.y.dim()
    }
}

#[inline]
fn s_term(d: &dyn Fn(usize, usize) -> f64, t: [usize; 4]) -> f64 {
    d(t[0], t[1]) + d(t[2], t[3]) - d(t[0], t[2]) - d(t[1], t[3])
}

/// Order-4 U-statistic: the symmetrized kernel averaged over all 4-subsets.
/// `O(n^4)`; a test oracle restricted to `n <= 64`.
pub fn dcov_naive(sample: &PairedSample) -> Result<f64> {
    let n = sample.n();
    if n > NAIVE_MAX_N {
        return Err(Error::param(format!(
            "naive distance covariance limited to n <= {NAIVE_MAX_N}"
        )));
    }
    let (x, y) = (sample.x(), sample.y());
    let dx = |a: usize, b: usize| dist(x.row(a), x.row(b));
    let dy = |a: usize, b: usize| dist(y.row(a), y.row(b));
    let orders: Vec<[usize; 4]> = {
        use itertools::Itertools;
        (0..4)
            .permutations(4)
            .map(|p| [p[0], p[1], p[2], p[3]])
            .collect()
    };
    let mut total = 0.0;
    let mut count = 0u64;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let idx = [a, b, c, d];
                    let mut k = 0.0;
                    for o in &orders {
                        let t = [idx[o[0]], idx[o[1]], idx[o[2]], idx[o[3]]];
                        k += s_term(&dx, t) * s_term(&dy, t);
                    }
                    total += k / 96.0;
                    count += 1;
                }
            }
        }
    }
    Ok(total / count as f64)
}

/// `O(n^2)` form of the same U-statistic:
///
/// ```text
/// 1/(n(n-3)) sum_{i!=j} a_ij b_ij - 2/(n(n-2)(n-3)) sum_i a_i+ b_i+
///     + a_++ b_++ / (n(n-1)(n-2)(n-3))
/// ```
///
/// Distances are recomputed on the fly; only row sums are stored.
pub fn dcov_fast(sample: &PairedSample) -> Result<f64> {
    let n = sample.n();
    let (x, y) = (sample.x(), sample.y());
    let mut a_row = vec![0.0; n];
    let mut b_row = vec![0.0; n];
    let mut cross = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let a = dist(x.row(i), x.row(j));
            let b = dist(y.row(i), y.row(j));
            a_row[i] += a;
            a_row[j] += a;
            b_row[i] += b;
            b_row[j] += b;
            cross += 2.0 * a * b;
        }
    }
    Ok(combine(n, cross, &a_row, &b_row))
}

fn combine(n: usize, cross: f64, a_row: &[f64], b_row: &[f64]) -> f64 {
    let nf = n as f64;
    let a_tot: f64 = a_row.iter().sum();
    let b_tot: f64 = b_row.iter().sum();
    let row_dot: f64 = a_row.iter().zip(b_row).map(|(a, b)| a * b).sum();
    cross / (nf * (nf - 3.0)) - 2.0 * row_dot / (nf * (nf - 2.0) * (nf - 3.0))
        + a_tot * b_tot / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0))
}

/// Precomputed distance matrices for repeated evaluation of `dCov_n` under
/// re-pairings of the second sample (permutation and Monte Carlo nulls).
#[derive(Clone, Debug)]
pub struct PairingKernel {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    a_row: Vec<f64>,
    b_row: Vec<f64>,
}

impl PairingKernel {
    pub fn new(x: &Points, y: &Points) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} rows",
                x.len(),
                y.len()
            )));
        }
        let n = x.len();
        if n < 4 {
            return Err(Error::param("need at least 4 observations"));
        }
        let a = distance_matrix(x);
        let b = distance_matrix(y);
        let a_row = a.chunks_exact(n).map(|r| r.iter().sum()).collect();
        let b_row = b.chunks_exact(n).map(|r| r.iter().sum()).collect();
        Ok(PairingKernel { n, a, b, a_row, b_row })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `dCov_n` of `(X_i, Y_{perm(i)})`.
    pub fn dcov_permuted(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        let mut cross = 0.0;
        for i in 0..n {
            let arow = &self.a[i * n..(i + 1) * n];
            let brow = &self.b[perm[i] * n..(perm[i] + 1) * n];
            let mut acc = 0.0;
            for (j, &aij) in arow.iter().enumerate() {
                acc += aij * brow[perm[j]];
            }
            cross += acc;
        }
        let b_row: Vec<f64> = perm.iter().map(|&k| self.b_row[k]).collect();
        combine(n, cross, &self.a_row, &b_row)
    }

    pub fn dcov(&self) -> f64 {
        let id: Vec<usize> = (0..self.n).collect();
        self.dcov_permuted(&id)
    }
}

fn distance_matrix(p: &Points) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(p.row(i), p.row(j));
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Column-wise ranks in `1..=n`, ties receiving their average rank.
pub fn marginal_ranks(m: &Points) -> Points {
    m.map_columns(average_ranks)
}

fn average_ranks(col: &[f64]) -> Vec<f64> {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && col[order[end]] == col[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// `n * dCov_n` between the empirical center-outward values of the two
/// margins.
pub fn statistic_mhat(
    sample: &PairedSample,
    grid_x: &AugmentedGrid,
    grid_y: &AugmentedGrid,
    solver: Solver,
) -> Result<f64> {
    let fx = center_outward(sample.x(), grid_x, solver)?;
    let fy = center_outward(sample.y(), grid_y, solver)?;
    let scored = PairedSample::new(fx.values, fy.values)?;
    Ok(sample.n() as f64 * dcov_fast(&scored)?)
}
