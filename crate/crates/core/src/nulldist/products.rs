use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::Spectrum;
use crate::{Error, Result};

pub const DEFAULT_TRUNCATION: usize = 100_000;

/// Highest power carried for the tail beyond the truncation.
pub const TAIL_POWERS: usize = 7;

/// Largest pairwise products of two spectra, plus the power sums of every
/// product that was cut off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpectrum {
    /// Descending positive products.
    pub lambdas: Vec<f64>,
    pub truncation: usize,
    /// `tail_power_sums[m - 1] = sum over omitted products of lambda^m`, `m = 1..=7`.
    pub tail_power_sums: [f64; TAIL_POWERS],
    /// Largest omitted product (0 when nothing was omitted).
    pub tail_max: f64,
    /// Number of omitted products.
    pub tail_count: u64,
}

impl ProductSpectrum {
    /// Sum of all products, kept and omitted.
    pub fn total_sum(&self) -> f64 {
        self.lambdas.iter().rev().sum::<f64>() + self.tail_power_sums[0]
    }

    pub fn tail_fraction(&self) -> f64 {
        let t = self.total_sum();
        if t == 0.0 {
            0.0
        } else {
            self.tail_power_sums[0] / t
        }
    }
}

#[derive(PartialEq)]
struct Entry {
    value: f64,
    row: usize,
    col: usize,
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.row.cmp(&self.row))
            .then_with(|| other.col.cmp(&self.col))
    }
}

/// The `truncation` largest products `lambda_{1,j} lambda_{2,k}`.
///
/// A max-heap holding the next candidate of each row yields products in
/// descending order; each row is consumed as a prefix, so the omitted
/// products of row `j` are exactly a suffix of the second spectrum and their
/// power sums follow from suffix sums.
pub fn product_spectrum(first: &Spectrum, second: &Spectrum, truncation: usize) -> Result<ProductSpectrum> {
    if truncation == 0 {
        return Err(Error::param("truncation must be at least 1"));
    }
    if first.is_empty() || second.is_empty() {
        return Err(Error::param("empty spectrum"));
    }
    let a = &first.eigenvalues;
    let b = &second.eigenvalues;
    let total = a.len() as u64 * b.len() as u64;
    let keep = (truncation as u64).min(total) as usize;

    let mut heap: BinaryHeap<Entry> = a
        .iter()
        .enumerate()
        .map(|(row, &x)| Entry { value: x * b[0], row, col: 0 })
        .collect();
    let mut consumed = vec![0usize; a.len()];
    let mut lambdas = Vec::with_capacity(keep);
    while lambdas.len() < keep {
        let top = heap.pop().expect("heap holds every unconsumed row");
        lambdas.push(top.value);
        consumed[top.row] = top.col + 1;
        if top.col + 1 < b.len() {
            heap.push(Entry { value: a[top.row] * b[top.col + 1], row: top.row, col: top.col + 1 });
        }
    }
    let tail_max = heap.peek().map_or(0.0, |e| e.value);

    // suffix[m][k] = sum_{l >= k} b_l^(m+1)
    let mut suffix = vec![vec![0.0; b.len() + 1]; TAIL_POWERS];
    for (m, s) in suffix.iter_mut().enumerate() {
        for k in (0..b.len()).rev() {
            s[k] = s[k + 1] + b[k].powi(m as i32 + 1);
        }
    }
    let mut tail_power_sums = [0.0; TAIL_POWERS];
    for (m, t) in tail_power_sums.iter_mut().enumerate() {
        *t = (0..a.len()).rev().map(|j| a[j].powi(m as i32 + 1) * suffix[m][consumed[j]]).sum();
    }
    Ok(ProductSpectrum {
        lambdas,
        truncation,
        tail_power_sums,
        tail_max,
        tail_count: total - keep as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(values: Vec<f64>) -> Spectrum {
        Spectrum { dim: 2, m_r: 0, m_s: 0, eigenvalues: values, closed_form: false, mean_distance: None }
    }

    #[test]
    fn closed_form_top_product() {
        let s = Spectrum::closed_form_1d(100);
        let ps = product_spectrum(&s, &s, 1).unwrap();
        assert_eq!(ps.lambdas.len(), 1);
        assert!((ps.lambdas[0] - 16.0 / std::f64::consts::PI.powi(4)).abs() < 1e-12);
        assert!((ps.lambdas[0] - 0.164255).abs() < 1e-6);
    }

    #[test]
    fn full_sum_factorizes() {
        let s1 = Spectrum::closed_form_1d(300);
        let s2 = Spectrum::closed_form_1d(200);
        for k in [1, 50, 10_000, 60_000] {
            let ps = product_spectrum(&s1, &s2, k).unwrap();
            let expect = s1.power_sum(1) * s2.power_sum(1);
            assert!((ps.total_sum() - expect).abs() < 1e-8, "k={k}");
        }
    }

    proptest! {
        #[test]
        fn matches_sorted_brute_force(
            a in proptest::collection::vec(-5.0f64..-0.01, 1..15),
            b in proptest::collection::vec(-5.0f64..-0.01, 1..15),
            k in 1usize..300,
        ) {
            let mut a = a;
            let mut b = b;
            a.sort_by(|x, y| x.total_cmp(y));
            b.sort_by(|x, y| x.total_cmp(y));
            let mut all: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
            all.sort_by(|x, y| y.total_cmp(x));
            let ps = product_spectrum(&spec(a), &spec(b), k).unwrap();
            let keep = k.min(all.len());
            prop_assert_eq!(&ps.lambdas[..], &all[..keep]);
            prop_assert!(ps.lambdas.iter().all(|v| *v > 0.0));
            for m in 1..=TAIL_POWERS {
                let direct: f64 = all[keep..].iter().map(|v| v.powi(m as i32)).sum();
                prop_assert!((ps.tail_power_sums[m - 1] - direct).abs() <= 1e-9 * direct.abs().max(1.0));
            }
            prop_assert_eq!(ps.tail_max, all.get(keep).copied().unwrap_or(0.0));
        }
    }

    #[test]
    fn rejects_zero_truncation() {
        let s = Spectrum::closed_form_1d(3);
        assert!(product_spectrum(&s, &s, 0).is_err());
    }
}
