//! Discrete unknowns on the staggered mass grid and the radii they imply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// The evolving unknowns `(u, rho, R, t)`.
///
/// Density is stored through the specific volume `v = 1/rho`, which is what
/// the continuity update and the radius constraint act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    /// Velocity at the `n + 1` nodes; `u[n] = 0` (rigid wall).
    pub u: Vec<f64>,
    /// Specific volume at the `n` cells.
    pub v: Vec<f64>,
    /// Bubble radius.
    pub radius: f64,
}

impl State {
    /// The rest state `u = 0, rho = 1, R = 1` at `t = 0`.
    pub fn equilibrium(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            u: vec![0.0; grid.n() + 1],
            v: vec![1.0; grid.n()],
            radius: 1.0,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.v.len()
    }

    #[inline]
    pub fn rho(&self, cell: usize) -> f64 {
        1.0 / self.v[cell]
    }

    pub fn densities(&self) -> Vec<f64> {
        self.v.iter().map(|v| 1.0 / v).collect()
    }

    /// Interface trace of the density, extrapolated linearly from the first
    /// two cells.
    pub fn interface_density(&self) -> f64 {
        1.5 * self.rho(0) - 0.5 * self.rho(1)
    }

    /// Checks the structural invariants: sizes, positivity, `u_n = 0`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.v.len() != grid.n() || self.u.len() != grid.n() + 1 {
            return Err(Error::InvalidInitialData(format!(
                "state has {} cells / {} nodes, grid has {} cells",
                self.v.len(),
                self.u.len(),
                grid.n()
            )));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidInitialData(format!(
                "bubble radius {} must be positive",
                self.radius
            )));
        }
        if let Some(j) = self.v.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInitialData(format!(
                "non-positive density in cell {j}"
            )));
        }
        if self.u.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidInitialData("non-finite velocity".into()));
        }
        if self.u[grid.n()] != 0.0 {
            return Err(Error::InvalidInitialData(
                "velocity at the outer wall must vanish".into(),
            ));
        }
        Ok(())
    }
}

/// Node radii recovered from the mass coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// `r_j`, `j = 0..=n`.
    pub r: Vec<f64>,
    /// `r_j^2`, cached.
    pub r2: Vec<f64>,
}

impl Geometry {
    /// `r_j^3 = R^3 + 3 sum_{i<j} dx v_i`, exact for piecewise-constant density.
    pub fn from_state(state: &State, grid: &Grid) -> Self {
        let n = state.n();
        let mut r = Vec::with_capacity(n + 1);
        let mut r2 = Vec::with_capacity(n + 1);
        let mut cube = state.radius.powi(3);
        r.push(state.radius);
        r2.push(state.radius * state.radius);
        let three_dx = 3.0 * grid.dx();
        for &v in &state.v {
            cube += three_dx * v;
            let rj = cube.cbrt();
            r.push(rj);
            r2.push(rj * rj);
        }
        Self { r, r2 }
    }

    /// Mean of the two node radii bounding cell `j`.
    #[inline]
    pub fn cell_radius(&self, j: usize) -> f64 {
        0.5 * (self.r[j] + self.r[j + 1])
    }

    /// Mean of `r^2` over the two nodes bounding cell `j`.
    #[inline]
    pub fn cell_r2(&self, j: usize) -> f64 {
        0.5 * (self.r2[j] + self.r2[j + 1])
    }
}

pub fn radii(state: &State, grid: &Grid) -> Geometry {
    Geometry::from_state(state, grid)
}

/// A point of the Eulerian picture: radius, density and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerianSample {
    pub r: f64,
    pub rho: f64,
    pub u: f64,
}

/// Node radii paired with node velocities and densities interpolated to the
/// nodes. Output only.
pub fn eulerian_samples(state: &State, grid: &Grid) -> Vec<EulerianSample> {
    let geom = Geometry::from_state(state, grid);
    let n = state.n();
    (0..=n)
        .map(|j| {
            let rho = if j == 0 {
                state.interface_density()
            } else if j == n {
                1.5 * state.rho(n - 1) - 0.5 * state.rho(n - 2)
            } else {
                0.5 * (state.rho(j - 1) + state.rho(j))
            };
            EulerianSample {
                r: geom.r[j],
                rho,
                u: state.u[j],
            }
        })
        .collect()
}
