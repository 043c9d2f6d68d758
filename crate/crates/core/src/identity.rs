//! Probe of the first-order derivative energy identity.
//!
//! Differentiating the momentum equation in time and testing with `u_t`
//! gives, for the unbounded problem,
//!
//! ```text
//! d/dt E2 + mu int rho (r^2 u_xt)^2 + 2 mu int u_t^2 / (rho r^2)
//!     = -Ca int (rho^gamma)_x r u u_t
//!       + (Ca/2) gamma (gamma+1)/2 int rho^(gamma-4) rho_t^3
//!       + 4 gamma (Ca/2) int rho^(gamma-3) rho_t^2 u / r
//!       + 6 gamma (Ca/2) int rho^(gamma-2) rho_t u^2 / r^2
//!       - mu int rho_t (r^2 u)_x (r^2 u_t)_x
//!       - mu int rho ((r^2)_t u)_x (r^2 u_t)_x
//!       + mu int (rho (r^2 u)_x)_x (r^2)_t u_t
//!       + 2 mu (u^2 u_t)|_{x=0}
//!       - 3 gamma0 (Ca/2 + 2/We) (R^(1 - 3 gamma0) - 1) R' R''
//! ```
//!
//! Two boundary coefficients for `(dR/dt)^2` in `E2` are in circulation;
//! [`probe`] evaluates both sides for each and reports which one balances.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{derivative_energies, node_gradient, DerivativeEnergies, TimeDerivatives};
use crate::error::Result;
use crate::grid::Grid;
use crate::operators::{self, Rhs};
use crate::params::Parameters;
use crate::state::{Geometry, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `3 gamma0/2 (Ca/2 + 2/We) - 1/We`.
    A,
    /// `3 gamma0/2 (Ca/2 + 2/We) R^(1 - 3 gamma0) + 1/We`.
    B,
    /// Neither residual is clearly smaller.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub t: f64,
    pub dr_dt: f64,
    pub d2r_dt2: f64,
    pub de2_dt_var_a: f64,
    pub de2_dt_var_b: f64,
    /// `mu int rho (r^2 u_xt)^2 + 2 mu int u_t^2 / (rho r^2)`.
    pub dissipation: f64,
    /// The nine right-hand side terms in the order displayed above.
    pub rhs_terms: Vec<f64>,
    pub rhs: f64,
    pub residual_var_a: f64,
    pub residual_var_b: f64,
    /// Magnitude used to normalise the residuals.
    pub scale: f64,
    pub consistent: Variant,
}

/// Residual ratio required to call one variant consistent.
pub const DECISION_RATIO: f64 = 10.0;

fn energies_at(state: &State, grid: &Grid, params: &Parameters) -> DerivativeEnergies {
    let geom = Geometry::from_state(state, grid);
    let rhs = operators::rhs(state, &geom, grid, params);
    derivative_energies(state, &geom, &rhs, grid, params)
}

fn shifted(state: &State, rhs: &Rhs, h: f64) -> State {
    let n = state.n();
    let mut u: Vec<f64> = state.u.iter().zip(&rhs.du_dt).map(|(a, b)| a + h * b).collect();
    u[n] = 0.0;
    State {
        t: state.t + h,
        u,
        v: state.v.iter().zip(&rhs.dv_dt).map(|(a, b)| a + h * b).collect(),
        radius: state.radius + h * rhs.dr_dt,
    }
}

/// Right-hand side terms of the identity and the dissipation on the left.
fn identity_terms(state: &State, geom: &Geometry, rhs: &Rhs, grid: &Grid, params: &Parameters) -> (Vec<f64>, f64) {
    let n = state.n();
    let dx = grid.dx();
    let (ca2, g, mu) = (0.5 * params.ca, params.gamma, params.mu);
    let d = TimeDerivatives::new(state, rhs);
    let u = &state.u;
    let ut = &d.u_t;
    let r = &geom.r;
    let r2 = &geom.r2;
    let rho = state.densities();
    let node_w = |j: usize| grid.node_weight(j);
    let cell_avg = |f: &dyn Fn(usize) -> f64, j: usize| 0.5 * (f(j) + f(j + 1));

    let p_gamma: Vec<f64> = rho.iter().map(|x| x.powf(g)).collect();
    let dp = node_gradient(&p_gamma, grid);
    let t1 = -2.0 * ca2 * (0..=n).map(|j| dp[j] * r[j] * u[j] * ut[j] * node_w(j)).sum::<f64>();

    let mut t2 = 0.0;
    let mut t3 = 0.0;
    let mut t4 = 0.0;
    let mut t5 = 0.0;
    let mut t6 = 0.0;
    let mut dissipation = 0.0;
    let u_over_r = |j: usize| u[j] / r[j];
    let u2_over_r2 = |j: usize| u[j] * u[j] / r2[j];
    let ut2_over_r2 = |j: usize| ut[j] * ut[j] / r2[j];
    for j in 0..n {
        let (rj, rt) = (rho[j], d.rho_t[j]);
        t2 += rj.powf(g - 4.0) * rt * rt * rt;
        t3 += rj.powf(g - 3.0) * rt * rt * cell_avg(&u_over_r, j);
        t4 += rj.powf(g - 2.0) * rt * cell_avg(&u2_over_r2, j);
        let flux_x = (r2[j + 1] * u[j + 1] - r2[j] * u[j]) / dx;
        let flux_t_x = (r2[j + 1] * ut[j + 1] - r2[j] * ut[j]) / dx;
        let stretch_x = (2.0 * r[j + 1] * u[j + 1] * u[j + 1] - 2.0 * r[j] * u[j] * u[j]) / dx;
        t5 += rt * flux_x * flux_t_x;
        t6 += rj * stretch_x * flux_t_x;
        let rbar2 = geom.cell_r2(j);
        let utx = (ut[j + 1] - ut[j]) / dx;
        dissipation += rj * (rbar2 * utx).powi(2) + 2.0 * cell_avg(&ut2_over_r2, j) / rj;
    }
    t2 *= ca2 * g * (g + 1.0) / 2.0 * dx;
    t3 *= 4.0 * g * ca2 * dx;
    t4 *= 6.0 * g * ca2 * dx;
    t5 *= -mu * dx;
    t6 *= -mu * dx;
    dissipation *= mu * dx;

    let sigma = operators::viscous_stress(state, geom, grid);
    let dsigma = node_gradient(&sigma, grid);
    let t7 = mu * (0..=n).map(|j| dsigma[j] * 2.0 * r[j] * u[j] * ut[j] * node_w(j)).sum::<f64>();
    let t8 = 2.0 * mu * u[0] * u[0] * ut[0];
    let c = params.bubble_coefficient();
    let t9 = -3.0 * params.gamma0 * c * (state.radius.powf(1.0 - 3.0 * params.gamma0) - 1.0) * u[0] * ut[0];
    (vec![t1, t2, t3, t4, t5, t6, t7, t8, t9], dissipation)
}

/// Evaluates both sides of the identity at `state`.
///
/// `d/dt E2` is the central difference of `E2` along the semi-discrete flow
/// with step `h`.
pub fn probe(state: &State, grid: &Grid, params: &Parameters, h: f64) -> Result<IdentityReport> {
    state.validate(grid)?;
    let geom = Geometry::from_state(state, grid);
    let rhs = operators::rhs(state, &geom, grid, params);
    let ahead = energies_at(&shifted(state, &rhs, h), grid, params);
    let behind = energies_at(&shifted(state, &rhs, -h), grid, params);
    let de2a = (ahead.e2_var_a - behind.e2_var_a) / (2.0 * h);
    let de2b = (ahead.e2_var_b - behind.e2_var_b) / (2.0 * h);
    let (rhs_terms, dissipation) = identity_terms(state, &geom, &rhs, grid, params);
    let rhs_total: f64 = rhs_terms.iter().sum();
    let residual_a = de2a + dissipation - rhs_total;
    let residual_b = de2b + dissipation - rhs_total;
    let scale = rhs_terms
        .iter()
        .map(|x| x.abs())
        .chain([de2a.abs(), de2b.abs(), dissipation])
        .fold(f64::MIN_POSITIVE, f64::max);
    let consistent = if residual_a.abs() * DECISION_RATIO < residual_b.abs() {
        Variant::A
    } else if residual_b.abs() * DECISION_RATIO < residual_a.abs() {
        Variant::B
    } else {
        Variant::Undetermined
    };
    Ok(IdentityReport {
        t: state.t,
        dr_dt: state.u[0],
        d2r_dt2: rhs.du_dt[0],
        de2_dt_var_a: de2a,
        de2_dt_var_b: de2b,
        dissipation,
        rhs_terms,
        rhs: rhs_total,
        residual_var_a: residual_a,
        residual_var_b: residual_b,
        scale,
        consistent,
    })
}
