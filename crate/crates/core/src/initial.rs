//! Perturbations of the rest state and the domain cutoff used when the
//! unbounded problem is approximated on `[0, k]`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::state::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Equilibrium,
    /// `R = 1 + eps`, liquid at rest with unit density.
    RadiusKick,
    /// `1/rho = 1 + eps g(x)`, `g` a smooth bump supported in `[0, N]`.
    DensityBump,
    /// `u = eps h(x)` with `h(0) = 1`, `h'(0) = 0` and `h = 0` beyond `N`.
    VelocityPulse,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Equilibrium => "equilibrium",
            Family::RadiusKick => "radius-kick",
            Family::DensityBump => "density-bump",
            Family::VelocityPulse => "velocity-pulse",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equilibrium" => Ok(Family::Equilibrium),
            "radius-kick" => Ok(Family::RadiusKick),
            "density-bump" => Ok(Family::DensityBump),
            "velocity-pulse" => Ok(Family::VelocityPulse),
            other => Err(Error::InvalidInitialData(format!(
                "unknown initial-data family `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub family: Family,
    /// Perturbation amplitude `eps >= 0`.
    pub amplitude: f64,
    /// Support extent `N` in mass units (bump and pulse families).
    pub support: f64,
    /// Profile exponent `>= 1`; larger values sharpen the profile.
    pub shape: f64,
}

impl InitialDataSpec {
    pub fn equilibrium() -> Self {
        Self {
            family: Family::Equilibrium,
            amplitude: 0.0,
            support: 1.0,
            shape: 1.0,
        }
    }

    pub fn radius_kick(eps: f64) -> Self {
        Self {
            family: Family::RadiusKick,
            amplitude: eps,
            support: 1.0,
            shape: 1.0,
        }
    }

    pub fn density_bump(eps: f64, support: f64) -> Self {
        Self {
            family: Family::DensityBump,
            amplitude: eps,
            support,
            shape: 1.0,
        }
    }

    pub fn velocity_pulse(eps: f64, support: f64) -> Self {
        Self {
            family: Family::VelocityPulse,
            amplitude: eps,
            support,
            shape: 2.0,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidInitialData(format!(
                "amplitude {} must be non-negative",
                self.amplitude
            )));
        }
        if matches!(self.family, Family::DensityBump | Family::VelocityPulse) {
            if !(self.support.is_finite() && self.support > 0.0) {
                return Err(Error::InvalidInitialData(format!(
                    "support {} must be positive",
                    self.support
                )));
            }
            if self.support > grid.k() {
                return Err(Error::InvalidInitialData(format!(
                    "support {} exceeds the domain extent {}",
                    self.support,
                    grid.k()
                )));
            }
            if !(self.shape.is_finite() && self.shape >= 1.0) {
                return Err(Error::InvalidInitialData(format!(
                    "shape exponent {} must be at least 1",
                    self.shape
                )));
            }
        }
        Ok(())
    }

    /// Bump profile `sin^2(pi x / N)^shape` on `[0, N]`.
    pub fn bump(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= self.support {
            0.0
        } else {
            (PI * x / self.support).sin().powi(2).powf(self.shape)
        }
    }

    /// Pulse profile `cos^2(pi x / 2N)^shape` on `[0, N]`: even about the
    /// interface, so `h'(0) = 0`, and `C^(2 shape - 1)` at `x = N`.
    pub fn pulse(&self, x: f64) -> f64 {
        if x >= self.support {
            0.0
        } else {
            (0.5 * PI * x / self.support).cos().powi(2).powf(self.shape)
        }
    }
}

pub fn make_initial_data(grid: &Grid, spec: &InitialDataSpec) -> Result<State> {
    spec.validate(grid)?;
    let mut state = State::equilibrium(grid);
    let eps = spec.amplitude;
    match spec.family {
        Family::Equilibrium => {}
        Family::RadiusKick => state.radius = 1.0 + eps,
        Family::DensityBump => {
            for (j, v) in state.v.iter_mut().enumerate() {
                *v = 1.0 + eps * spec.bump(grid.cell_center(j));
            }
        }
        Family::VelocityPulse => {
            for (j, u) in state.u.iter_mut().enumerate().take(grid.n()) {
                *u = eps * spec.pulse(grid.node(j));
            }
        }
    }
    state.validate(grid)?;
    Ok(state)
}

/// `C^1` cutoff: `1` on `[0, 1/2]`, a cosine ramp on `[1/2, 1]`, `0` beyond.
pub fn cutoff(z: f64) -> f64 {
    if z <= 0.5 {
        1.0
    } else if z >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (2.0 * PI * (z - 0.5)).cos())
    }
}

/// Restricts `state` (given on `source`) to `target` and blends the
/// perturbation to the rest state with `phi(x / k)`:
/// `u <- u phi_k`, `1/rho <- 1 + (1/rho - 1) phi_k`, `R` unchanged.
///
/// Both grids must share the spacing and `target` must not be larger.
pub fn cutoff_initial_data(state: &State, source: &Grid, target: &Grid) -> Result<State> {
    state.validate(source)?;
    if target.n() > source.n() {
        return Err(Error::InvalidInitialData(format!(
            "target grid ({} cells) is larger than the source grid ({} cells)",
            target.n(),
            source.n()
        )));
    }
    if (target.dx() - source.dx()).abs() > 1e-12 * source.dx() {
        return Err(Error::InvalidInitialData(
            "cutoff requires grids with equal spacing".into(),
        ));
    }
    let k = target.k();
    let u = (0..=target.n())
        .map(|j| state.u[j] * cutoff(target.node(j) / k))
        .collect();
    let v = (0..target.n())
        .map(|j| {
            let phi = cutoff(target.cell_center(j) / k);
            if phi == 1.0 {
                state.v[j]
            } else {
                1.0 + (state.v[j] - 1.0) * phi
            }
        })
        .collect();
    Ok(State {
        t: state.t,
        u,
        v,
        radius: state.radius,
    })
}
