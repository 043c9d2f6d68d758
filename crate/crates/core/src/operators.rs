//! Spatial right-hand sides on the staggered grid.
//!
//! With total stress `T = -(Ca/2) rho^gamma + mu sigma`, `sigma = rho (r^2 u)_x`:
//!
//! ```text
//! du_j/dt      = r_j^2 (T_{j+1/2} - T_{j-1/2}) / dx        interior nodes
//! du_0/dt      = R^2 (T_{1/2} - T_0) / (dx/2)              half cell at the bubble
//! dv_{j+1/2}/dt = ((r^2 u)_{j+1} - (r^2 u)_j) / dx
//! dR/dt        = u_0
//! ```
//!
//! where the interface stress `T_0` carries the bubble pressure, surface
//! tension and the geometric part `2 mu u_0 / R` of the viscous stress.

use crate::grid::Grid;
use crate::params::Parameters;
use crate::state::{Geometry, State};
use crate::tridiag::Tridiagonal;

/// Liquid pressure `(Ca/2) rho^gamma`.
#[inline]
pub fn pressure(rho: f64, params: &Parameters) -> f64 {
    0.5 * params.ca * rho.powf(params.gamma)
}

/// Gas pressure `(Ca/2 + 2/We) R^(-3 gamma0)`.
#[inline]
pub fn bubble_pressure(radius: f64, params: &Parameters) -> f64 {
    params.bubble_coefficient() * radius.powf(-3.0 * params.gamma0)
}

/// Eulerian sound speed of the liquid pressure law.
#[inline]
pub fn sound_speed(rho: f64, params: &Parameters) -> f64 {
    (params.gamma * 0.5 * params.ca * rho.powf(params.gamma - 1.0)).sqrt()
}

/// `p_b(R) - 2/(We R)`: the normal stress the bubble exerts on the liquid.
#[inline]
pub fn interface_load(radius: f64, params: &Parameters) -> f64 {
    // Grouped so that the value at R = 1 is exactly Ca/2.
    let gas = radius.powf(-3.0 * params.gamma0);
    0.5 * params.ca * gas + 2.0 / params.we * (gas - 1.0 / radius)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    /// Total stress at the cells.
    pub total: Vec<f64>,
    /// Viscous stress `rho (r^2 u)_x` at the cells.
    pub sigma: Vec<f64>,
    /// Total stress at the interface `x = 0`.
    pub interface: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    /// At nodes `0..=n`; the last entry is pinned to zero.
    pub du_dt: Vec<f64>,
    pub dv_dt: Vec<f64>,
    pub dr_dt: f64,
}

/// `(r^2 u)` at every node.
fn volume_flux(state: &State, geom: &Geometry) -> Vec<f64> {
    state.u.iter().zip(&geom.r2).map(|(u, r2)| r2 * u).collect()
}

pub fn viscous_stress(state: &State, geom: &Geometry, grid: &Grid) -> Vec<f64> {
    let flux = volume_flux(state, geom);
    let inv_dx = 1.0 / grid.dx();
    flux.windows(2)
        .zip(&state.v)
        .map(|(f, v)| (f[1] - f[0]) * inv_dx / v)
        .collect()
}

/// Total stress at the interface implied by the dynamic boundary condition:
/// `-p_b(R) + 2/(We R) + 2 mu u_0 / R`.
pub fn interface_total_stress(state: &State, params: &Parameters) -> f64 {
    let r = state.radius;
    -interface_load(r, params) + 2.0 * params.mu * state.u[0] / r
}

pub fn stress_field(state: &State, geom: &Geometry, grid: &Grid, params: &Parameters) -> StressField {
    let sigma = viscous_stress(state, geom, grid);
    let total = sigma
        .iter()
        .zip(&state.v)
        .map(|(s, v)| -pressure(1.0 / v, params) + params.mu * s)
        .collect();
    StressField {
        total,
        sigma,
        interface: interface_total_stress(state, params),
    }
}

/// Residual of the dynamic boundary condition
/// `(Ca/2) rho^gamma - mu rho r^2 u_x = p_b - 2/(We R)` at `x = 0`, using a
/// linearly extrapolated density trace and a second-order one-sided `u_x`.
pub fn boundary_stress_residual(state: &State, geom: &Geometry, grid: &Grid, params: &Parameters) -> f64 {
    let rho = state.interface_density();
    let u = &state.u;
    let u_x = if u.len() > 2 {
        (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * grid.dx())
    } else {
        (u[1] - u[0]) / grid.dx()
    };
    pressure(rho, params) - params.mu * rho * geom.r2[0] * u_x - interface_load(state.radius, params)
}

pub fn momentum_rhs(state: &State, geom: &Geometry, stress: &StressField, grid: &Grid) -> Vec<f64> {
    let n = state.n();
    let inv_dx = 1.0 / grid.dx();
    let mut du = vec![0.0; n + 1];
    du[0] = geom.r2[0] * (stress.total[0] - stress.interface) * 2.0 * inv_dx;
    for j in 1..n {
        du[j] = geom.r2[j] * (stress.total[j] - stress.total[j - 1]) * inv_dx;
    }
    du
}

pub fn continuity_rhs(state: &State, geom: &Geometry, grid: &Grid) -> Vec<f64> {
    let flux = volume_flux(state, geom);
    let inv_dx = 1.0 / grid.dx();
    flux.windows(2).map(|f| (f[1] - f[0]) * inv_dx).collect()
}

/// Full semi-discrete right-hand side.
pub fn rhs(state: &State, geom: &Geometry, grid: &Grid, params: &Parameters) -> Rhs {
    let stress = stress_field(state, geom, grid, params);
    Rhs {
        du_dt: momentum_rhs(state, geom, &stress, grid),
        dv_dt: continuity_rhs(state, geom, grid),
        dr_dt: state.u[0],
    }
}

/// Momentum forcing without the viscous terms (pressure, bubble pressure,
/// surface tension). Adding `viscous_operator(..).apply(u)` recovers
/// [`momentum_rhs`] on nodes `0..n`.
pub fn inviscid_acceleration(
    rho: &[f64],
    r2: &[f64],
    radius: f64,
    grid: &Grid,
    params: &Parameters,
) -> Vec<f64> {
    let n = rho.len();
    let inv_dx = 1.0 / grid.dx();
    let p: Vec<f64> = rho.iter().map(|&r| pressure(r, params)).collect();
    let mut acc = vec![0.0; n + 1];
    acc[0] = r2[0] * (-p[0] + interface_load(radius, params)) * 2.0 * inv_dx;
    for j in 1..n {
        acc[j] = r2[j] * (p[j - 1] - p[j]) * inv_dx;
    }
    acc
}

/// The linear viscous operator `u -> mu r^2 (rho (r^2 u)_x)_x` restricted to
/// the unknown nodes `0..n` (the wall node carries `u_n = 0`), with the
/// interface row closing on `2 mu u_0 / R`.
pub fn viscous_operator(rho: &[f64], r2: &[f64], grid: &Grid, mu: f64) -> Tridiagonal {
    let n = rho.len();
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let mut op = Tridiagonal::zeros(n);
    // Interface row: mu R^2 (sigma_{1/2} - 2 u_0 / R) / (dx/2).
    let radius = r2[0].sqrt();
    op.diag[0] = 2.0 * mu * r2[0] * (-rho[0] * r2[0] * inv_dx2 - 2.0 / (radius * grid.dx()));
    op.upper[0] = 2.0 * mu * r2[0] * rho[0] * r2[1] * inv_dx2;
    for j in 1..n {
        let c = mu * r2[j] * inv_dx2;
        op.lower[j] = c * rho[j - 1] * r2[j - 1];
        op.diag[j] = -c * (rho[j] + rho[j - 1]) * r2[j];
        op.upper[j] = c * rho[j] * r2[j + 1];
    }
    op
}
