use itertools::Itertools;

use super::{Assignment, CostMatrix};
use crate::{Error, Result};

const MAX_N: usize = 9;

/// Exhaustive search over all `n!` permutations in lexicographic order; the
/// first minimizer wins ties.
pub fn lsap_brute_force(costs: &CostMatrix) -> Result<Assignment> {
    let n = costs.n();
    if n > MAX_N {
        return Err(Error::param(format!(
            "brute force limited to n <= {MAX_N}, got {n}"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let total = costs.total(&perm);
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let (total_cost, perm) = best.unwrap_or((0.0, Vec::new()));
    Ok(Assignment { perm, total_cost })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_friendly() {
        let n = 5;
        let c: Vec<f64> = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { 1.0 })
            .collect();
        let a = lsap_brute_force(&CostMatrix::new(n, c).unwrap()).unwrap();
        assert_eq!(a.perm, vec![0, 1, 2, 3, 4]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn two_by_two() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let a = lsap_brute_force(&c).unwrap();
        assert_eq!(a.perm, vec![0, 1]);
        assert_eq!(a.total_cost, 2.0);
    }

    #[test]
    fn lexicographic_tie_break() {
        let c = CostMatrix::new(3, vec![1.0; 9]).unwrap();
        assert_eq!(lsap_brute_force(&c).unwrap().perm, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_large() {
        assert!(lsap_brute_force(&CostMatrix::new(10, vec![0.0; 100]).unwrap()).is_err());
    }
}
