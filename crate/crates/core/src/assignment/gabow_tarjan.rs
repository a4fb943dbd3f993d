//! Gabow–Tarjan bit-scaling assignment on integer costs.
//!
//! Costs are multiplied by `n + 1` and revealed one bit at a time. Each
//! stage computes a 1-optimal perfect matching (duals satisfy
//! `a_i + b_j <= c_ij + 1` everywhere, with equality to `c_ij` on matched
//! edges) through phases of
//!
//! 1. depth-first search for a maximal set of vertex-disjoint augmenting
//!    paths in the admissible graph, and
//! 2. a Hungarian search that shifts duals until a new augmenting path
//!    becomes admissible.
//!
//! A 1-optimal matching under costs scaled by `n + 1` is exactly optimal
//! for the original costs. The returned duals are then tightened into an
//! exact certificate for the unscaled costs.

use serde::{Deserialize, Serialize};

use super::{Assignment, IntCostMatrix};
use crate::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GabowTarjanSolution {
    pub assignment: Assignment,
    pub total: i64,
    /// Exact dual certificate for the input costs.
    pub row_duals: Vec<i64>,
    pub col_duals: Vec<i64>,
    pub stages: usize,
    pub phases: usize,
}

impl GabowTarjanSolution {
    pub fn certificate_holds(&self, costs: &IntCostMatrix) -> bool {
        let n = costs.n();
        let perm = &self.assignment.perm;
        (0..n).all(|i| {
            (0..n).all(|j| self.row_duals[i] + self.col_duals[j] <= costs.get(i, j))
                && self.row_duals[i] + self.col_duals[perm[i]] == costs.get(i, perm[i])
        })
    }
}

struct Stage<'a> {
    costs: &'a IntCostMatrix,
    factor: i64,
    shift: u32,
    n: usize,
    alpha: Vec<i64>,
    beta: Vec<i64>,
    row_mate: Vec<usize>,
    col_mate: Vec<usize>,
}

impl Stage<'_> {
    /// Current-stage cost: the top bits of `(n + 1) * c_ij`.
    #[inline]
    fn cost(&self, i: usize, j: usize) -> i64 {
        (self.costs.get(i, j) * self.factor) >> self.shift
    }

    #[inline]
    fn admissible_free_edge(&self, i: usize, j: usize) -> bool {
        self.alpha[i] + self.beta[j] == self.cost(i, j) + 1
    }

    fn matched(&self) -> usize {
        self.row_mate.iter().filter(|&&m| m != NONE).count()
    }

    /// Step I: maximal set of vertex-disjoint augmenting paths found by DFS
    /// from exposed columns; each path is augmented as soon as it is found.
    fn augment_maximal(&mut self) -> usize {
        let n = self.n;
        let mut row_marked = vec![false; n];
        let mut col_marked = vec![false; n];
        let mut scan = vec![0usize; n];
        let mut augmented = 0;
        let mut cols: Vec<usize> = Vec::new();
        let mut rows: Vec<usize> = Vec::new();

        for root in 0..n {
            if self.col_mate[root] != NONE || col_marked[root] {
                continue;
            }
            col_marked[root] = true;
            cols.clear();
            rows.clear();
            cols.push(root);
            while let Some(&j) = cols.last() {
                let mut found = NONE;
                while scan[j] < n {
                    let i = scan[j];
                    scan[j] += 1;
                    if !row_marked[i] && self.admissible_free_edge(i, j) {
                        found = i;
                        break;
                    }
                }
                if found == NONE {
                    cols.pop();
                    rows.pop();
                    continue;
                }
                row_marked[found] = true;
                rows.push(found);
                let next = self.row_mate[found];
                if next == NONE {
                    for (&i, &j) in rows.iter().zip(cols.iter()) {
                        self.row_mate[i] = j;
                        self.col_mate[j] = i;
                        self.alpha[i] -= 1;
                    }
                    augmented += 1;
                    break;
                }
                col_marked[next] = true;
                cols.push(next);
            }
        }
        augmented
    }

    /// Step II: grow alternating trees from all exposed columns, shifting
    /// duals by the minimum slack until an exposed row becomes reachable
    /// through admissible edges.
    fn hungarian_search(&mut self) {
        let n = self.n;
        let mut in_ls = vec![false; n];
        let mut ls: Vec<usize> = Vec::new();
        let mut lt: Vec<usize> = Vec::new();
        let mut slack = vec![i64::MAX; n];

        let relax = |stage: &Stage, j: usize, in_ls: &[bool], slack: &mut [i64]| {
            for i in 0..n {
                if !in_ls[i] {
                    let s = stage.cost(i, j) + 1 - stage.alpha[i] - stage.beta[j];
                    if s < slack[i] {
                        slack[i] = s;
                    }
                }
            }
        };

        for j in 0..n {
            if self.col_mate[j] == NONE {
                lt.push(j);
                relax(self, j, &in_ls, &mut slack);
            }
        }
        loop {
            let mut delta = i64::MAX;
            let mut pick = NONE;
            for i in 0..n {
                if !in_ls[i] && slack[i] < delta {
                    delta = slack[i];
                    pick = i;
                }
            }
            debug_assert!(pick != NONE && delta >= 0);
            if delta > 0 {
                for &i in &ls {
                    self.alpha[i] -= delta;
                }
                for &j in &lt {
                    self.beta[j] += delta;
                }
                for i in 0..n {
                    if !in_ls[i] {
                        slack[i] -= delta;
                    }
                }
            }
            let mate = self.row_mate[pick];
            if mate == NONE {
                return;
            }
            in_ls[pick] = true;
            ls.push(pick);
            lt.push(mate);
            relax(self, mate, &in_ls, &mut slack);
        }
    }

    fn run(&mut self) -> usize {
        self.row_mate.iter_mut().for_each(|m| *m = NONE);
        self.col_mate.iter_mut().for_each(|m| *m = NONE);
        let mut phases = 0;
        loop {
            phases += 1;
            self.augment_maximal();
            if self.matched() == self.n {
                return phases;
            }
            self.hungarian_search();
        }
    }
}

/// Exact optimal assignment on integer costs in `[0, N]` by bit scaling.
pub fn lsap_gabow_tarjan(costs: &IntCostMatrix) -> Result<GabowTarjanSolution> {
    let n = costs.n();
    if n == 0 {
        return Ok(GabowTarjanSolution {
            assignment: Assignment { perm: Vec::new(), total_cost: 0.0 },
            total: 0,
            row_duals: Vec::new(),
            col_duals: Vec::new(),
            stages: 0,
            phases: 0,
        });
    }
    let factor = n as i64 + 1;
    let max_cost = costs.max_cost();
    let bound = (n as i64)
        .checked_mul(factor)
        .and_then(|v| v.checked_mul(max_cost.max(1)))
        .and_then(|v| v.checked_mul(4));
    if bound.is_none() {
        return Err(Error::Overflow(format!(
            "(n+1) * N * n with n = {n}, N = {max_cost} exceeds the 64-bit range"
        )));
    }
    let scaled_max = max_cost * factor;
    let bits = (64 - scaled_max.leading_zeros()).max(1);

    let mut stage = Stage {
        costs,
        factor,
        shift: 0,
        n,
        alpha: vec![0; n],
        beta: vec![0; n],
        row_mate: vec![NONE; n],
        col_mate: vec![NONE; n],
    };
    let mut phases = 0;
    for r in 1..=bits {
        stage.shift = bits - r;
        for a in stage.alpha.iter_mut().chain(stage.beta.iter_mut()) {
            *a = 2 * *a - 1;
        }
        phases += stage.run();
    }

    let perm = stage.row_mate.clone();
    let (row_duals, col_duals) = exact_duals(costs, &perm, &stage.beta, factor)?;
    let total = costs.total(&perm);
    let sol = GabowTarjanSolution {
        assignment: Assignment {
            perm,
            total_cost: total as f64,
        },
        total,
        row_duals,
        col_duals,
        stages: bits as usize,
        phases,
    };
    if !sol.certificate_holds(costs) {
        return Err(Error::Numerical(
            "scaling solver produced a matching without an optimality certificate".into(),
        ));
    }
    Ok(sol)
}

/// Column potentials `d_k = beta_{perm(k)}` satisfying
/// `d_k <= d_i + c_{i,perm(k)} - c_{i,perm(i)}` by Bellman–Ford relaxation,
/// warm-started from the scaled duals of the last stage.
fn exact_duals(
    costs: &IntCostMatrix,
    perm: &[usize],
    scaled_beta: &[i64],
    factor: i64,
) -> Result<(Vec<i64>, Vec<i64>)> {
    let n = perm.len();
    let mut d: Vec<i64> = (0..n).map(|k| scaled_beta[perm[k]].div_euclid(factor)).collect();
    let mut converged = false;
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            let base = d[i] - costs.get(i, perm[i]);
            for k in 0..n {
                let cand = base + costs.get(i, perm[k]);
                if cand < d[k] {
                    d[k] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(
            "negative cycle while certifying the assignment".into(),
        ));
    }
    let mut col = vec![0i64; n];
    for k in 0..n {
        col[perm[k]] = d[k];
    }
    let row = (0..n).map(|i| costs.get(i, perm[i]) - col[perm[i]]).collect();
    Ok((row, col))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{lsap_brute_force, lsap_hungarian};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn all_zero_costs() {
        let c = IntCostMatrix::new(5, vec![0; 25]).unwrap();
        let s = lsap_gabow_tarjan(&c).unwrap();
        assert_eq!(s.total, 0);
        assert!(s.assignment.is_bijection());
        assert!(s.row_duals.iter().chain(&s.col_duals).all(|&v| v == 0));
    }

    #[test]
    fn small_known_instance() {
        let c = IntCostMatrix::from_rows(&[vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]]).unwrap();
        let s = lsap_gabow_tarjan(&c).unwrap();
        assert_eq!(s.total, 5);
        assert!(s.certificate_holds(&c));
    }

    #[test]
    fn overflow_guard() {
        let c = IntCostMatrix::new(2, vec![0, i64::MAX / 4, 1, 0]).unwrap();
        assert!(matches!(lsap_gabow_tarjan(&c), Err(Error::Overflow(_))));
    }

    #[test]
    fn geometric_instance_matches_hungarian() {
        let mut rng = crate::rng::seeded(99);
        let n = 120;
        let a: Vec<(i64, i64)> = (0..n).map(|_| (rng.gen_range(0..1000), rng.gen_range(0..1000))).collect();
        let b: Vec<(i64, i64)> = (0..n).map(|_| (rng.gen_range(0..1000), rng.gen_range(0..1000))).collect();
        let costs: Vec<i64> = a
            .iter()
            .flat_map(|p| b.iter().map(move |q| (p.0 - q.0).pow(2) + (p.1 - q.1).pow(2)))
            .collect();
        let c = IntCostMatrix::new(n, costs).unwrap();
        let gt = lsap_gabow_tarjan(&c).unwrap();
        let h = lsap_hungarian(&c.to_real()).unwrap();
        assert_eq!(gt.total as f64, h.total_cost);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]
        #[test]
        fn matches_brute_force(n in 1usize..=7, max in 0i64..=100, seed in any::<u64>()) {
            let mut rng = crate::rng::seeded(seed);
            let costs: Vec<i64> = (0..n * n).map(|_| rng.gen_range(0..=max)).collect();
            let c = IntCostMatrix::new(n, costs).unwrap();
            let gt = lsap_gabow_tarjan(&c).unwrap();
            let b = lsap_brute_force(&c.to_real()).unwrap();
            prop_assert_eq!(gt.total as f64, b.total_cost);
            prop_assert!(gt.certificate_holds(&c));
        }
    }
}
