use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A row-major collection of points in a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("point dimension must be positive"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not split into rows of dimension {}",
                coords.len(),
                dim
            )));
        }
        Ok(Points { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::param("no rows"))?;
        let mut coords = Vec::with_capacity(dim * rows.len());
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            coords.extend_from_slice(r);
        }
        Points::new(dim, coords)
    }

    pub(crate) fn zeros(dim: usize, len: usize) -> Self {
        Points {
            dim,
            coords: vec![0.0; dim * len],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]` of `self`.
    pub fn select(&self, perm: &[usize]) -> Points {
        let mut coords = Vec::with_capacity(perm.len() * self.dim);
        for &k in perm {
            coords.extend_from_slice(self.row(k));
        }
        Points {
            dim: self.dim,
            coords,
        }
    }

    /// Applies `f` to each column independently.
    pub fn map_columns(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Points {
        let n = self.len();
        let mut out = Points::zeros(self.dim, n);
        let mut col = vec![0.0; n];
        for c in 0..self.dim {
            for (i, v) in col.iter_mut().enumerate() {
                *v = self.row(i)[c];
            }
            let mapped = f(&col);
            for (i, v) in mapped.into_iter().enumerate() {
                out.row_mut(i)[c] = v;
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.coords.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
