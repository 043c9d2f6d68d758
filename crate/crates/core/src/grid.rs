use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform staggered grid in the Lagrangian mass coordinate on `[0, k]`.
///
/// Velocities live on the `n + 1` nodes `x_j = j dx`; densities live on the
/// `n` cell centres `x_{j+1/2}`. Node 0 is the bubble interface, node `n`
/// the rigid outer wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    k: f64,
    n: usize,
    dx: f64,
}

pub const MIN_CELLS: usize = 4;

impl Grid {
    pub fn new(k: f64, n: usize) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidGrid(format!("mass extent k = {k} must be positive")));
        }
        if n < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "cell count n = {n} must be at least {MIN_CELLS}"
            )));
        }
        Ok(Self {
            k,
            n,
            dx: k / n as f64,
        })
    }

    /// Grid with a prescribed spacing; `k / dx` must be (close to) an integer.
    pub fn with_spacing(k: f64, dx: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing {dx} must be positive")));
        }
        let cells = k / dx;
        let n = cells.round();
        if (cells - n).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "k = {k} is not an integer multiple of dx = {dx}"
            )));
        }
        Self::new(k, n as usize)
    }

    #[inline]
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Number of cells.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n {
            self.k
        } else {
            j as f64 * self.dx
        }
    }

    #[inline]
    pub fn cell_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.node(j)).collect()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.cell_center(j)).collect()
    }

    /// Trapezoid weight of node `j`: half a cell at either end.
    #[inline]
    pub fn node_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n {
            0.5 * self.dx
        } else {
            self.dx
        }
    }
}
