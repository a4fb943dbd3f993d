use serde::{Deserialize, Serialize};

use super::{Assignment, CostMatrix};
use crate::Result;

/// Optimal assignment together with a dual certificate
/// (`row_duals[i] + col_duals[j] <= c_ij`, equality on matched pairs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HungarianSolution {
    pub assignment: Assignment,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

pub fn lsap_hungarian(costs: &CostMatrix) -> Result<Assignment> {
    Ok(solve_hungarian(costs)?.assignment)
}

/// Shortest augmenting path Hungarian method, `O(n^3)`.
///
/// Rows are inserted in index order and columns scanned in index order with
/// strict comparisons, so the returned permutation is deterministic.
pub fn solve_hungarian(costs: &CostMatrix) -> Result<HungarianSolution> {
    let n = costs.n();
    // 1-based arrays; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let row = costs.row(i0 - 1);
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[col_row[j] - 1] = j - 1;
    }
    let total_cost = costs.total(&perm);
    Ok(HungarianSolution {
        assignment: Assignment { perm, total_cost },
        row_duals: u[1..].to_vec(),
        col_duals: v[1..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{lsap_brute_force, verify_certificate};
    use proptest::prelude::*;

    #[test]
    fn diagonal_zero() {
        let n = 6;
        let c: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect();
        let a = lsap_hungarian(&CostMatrix::new(n, c).unwrap()).unwrap();
        assert_eq!(a.total_cost, 0.0);
        assert_eq!(a.perm, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn empty_and_single() {
        assert!(lsap_hungarian(&CostMatrix::new(0, vec![]).unwrap()).unwrap().perm.is_empty());
        let a = lsap_hungarian(&CostMatrix::new(1, vec![4.0]).unwrap()).unwrap();
        assert_eq!((a.perm, a.total_cost), (vec![0], 4.0));
    }

    #[test]
    fn one_dimensional_monotone_coupling() {
        let mut rng = crate::rng::seeded(5);
        use rand::Rng;
        let n = 40;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y) * (x - y))).collect();
        let a = lsap_hungarian(&CostMatrix::new(n, c).unwrap()).unwrap();
        let mut sx = xs.clone();
        let mut sy = ys.clone();
        sx.sort_by(f64::total_cmp);
        sy.sort_by(f64::total_cmp);
        let sorted: f64 = sx.iter().zip(&sy).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((a.total_cost - sorted).abs() < 1e-9 * sorted.max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_brute_force(n in 1usize..=7, seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::rng::seeded(seed);
            let c: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let costs = CostMatrix::new(n, c).unwrap();
            let h = solve_hungarian(&costs).unwrap();
            let b = lsap_brute_force(&costs).unwrap();
            prop_assert!((h.assignment.total_cost - b.total_cost).abs() < 1e-9);
            prop_assert!(h.assignment.is_bijection());
            prop_assert!(verify_certificate(&costs, &h.assignment.perm, &h.row_duals, &h.col_duals, 1e-9));
        }
    }
}
