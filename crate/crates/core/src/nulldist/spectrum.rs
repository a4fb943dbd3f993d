use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::grid::{AugmentedGrid, DirectionMode};
use crate::points::dist;
use crate::{Error, Result};

/// Negative eigenvalues of the centered distance kernel on the uniform ball,
/// ordered by decreasing magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub dim: usize,
    pub m_r: usize,
    pub m_s: usize,
    pub eigenvalues: Vec<f64>,
    /// True when the eigenvalues come from the exact one-dimensional formula.
    pub closed_form: bool,
    /// Mean of all `M^2` pairwise grid distances (diagonal included); the
    /// eigenvalues sum to its negative. `None` for the closed form.
    pub mean_distance: Option<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `sum_j lambda_j^m`.
    pub fn power_sum(&self, m: i32) -> f64 {
        // smallest magnitudes first
        self.eigenvalues.iter().rev().map(|l| l.powi(m)).sum()
    }

    /// `-4 / (pi^2 j^2)` for `j = 1..=len`.
    pub fn closed_form_1d(len: usize) -> Spectrum {
        let c = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        Spectrum {
            dim: 1,
            m_r: len.div_ceil(2),
            m_s: 2,
            eigenvalues: (1..=len).map(|j| -c / (j as f64 * j as f64)).collect(),
            closed_form: true,
            mean_distance: None,
        }
    }
}

/// Direction construction used for spectrum grids: the deterministic
/// product construction up to dimension 3, isotropic random directions above.
pub fn spectrum_direction_mode(dim: usize) -> DirectionMode {
    if dim <= 3 {
        DirectionMode::Deterministic
    } else {
        DirectionMode::Isotropic
    }
}

/// Spectrum for dimension `dim` on a grid with `m_r` radii and `m_s`
/// directions. Dimension one always uses the closed form with `M - 1` terms.
pub fn spectrum(dim: usize, m_r: usize, m_s: usize, mode: DirectionMode, seed: u64) -> Result<Spectrum> {
    if dim == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    if dim == 1 {
        let m = m_r.checked_mul(m_s).ok_or_else(|| Error::param("grid too large"))?;
        if m < 2 {
            return Err(Error::param("need at least two grid points"));
        }
        let mut sp = Spectrum::closed_form_1d(m - 1);
        sp.m_r = m_r;
        sp.m_s = m_s;
        return Ok(sp);
    }
    if m_r < 2 || m_s < 2 {
        return Err(Error::param(format!("grid factors must be >= 2, got ({m_r}, {m_s})")));
    }
    let grid = AugmentedGrid::ball(dim, m_r, m_s, mode, seed)?;
    spectrum_of_grid(&grid)
}

/// Eigenvalues of `H D H / M` on an arbitrary grid, `H` the centering matrix.
pub fn spectrum_of_grid(grid: &AugmentedGrid) -> Result<Spectrum> {
    let pts = &grid.points;
    let m = pts.len();
    if m < 2 {
        return Err(Error::param("need at least two grid points"));
    }
    let mut d = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..i {
            let v = dist(pts.row(i), pts.row(j));
            d.write(i, j, v);
            d.write(j, i, v);
        }
    }
    let row_mean: Vec<f64> = (0..m).map(|i| (0..m).map(|j| d.read(i, j)).sum::<f64>() / m as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / m as f64;
    let mf = m as f64;
    let centered = Mat::<f64>::from_fn(m, m, |i, j| (d.read(i, j) - row_mean[i] - row_mean[j] + grand) / mf);
    drop(d);
    let mut eig = centered.selfadjoint_eigenvalues(Side::Lower);
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigensolver returned non-finite values".into()));
    }
    eig.sort_by(|a, b| a.total_cmp(b));
    // the constant vector spans the null direction; it is the largest eigenvalue
    let zero = eig.pop().expect("m >= 2");
    let scale = eig.first().map_or(1.0, |v| v.abs());
    if zero.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::Numerical(format!("null eigenvalue {zero:e} is not numerically zero")));
    }
    if let Some(&pos) = eig.iter().find(|v| **v >= 0.0) {
        return Err(Error::Numerical(format!("non-negative eigenvalue {pos:e} in a distance kernel spectrum")));
    }
    Ok(Spectrum {
        dim: grid.dim(),
        m_r: grid.spec.n_r,
        m_s: grid.spec.n_s,
        eigenvalues: eig,
        closed_form: false,
        mean_distance: Some(grand),
    })
}
