//! Energy functionals, dissipation, the decay norm and decay-rate fitting.
//!
//! Quadrature follows the staggering: nodal fields use the trapezoid rule
//! (half weights at `x = 0` and `x = k`), cell fields the midpoint rule.
//! Gradients of cell fields are taken between neighbouring cells and live on
//! the nodes; the two end nodes reuse the nearest interior difference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operators::{self, Rhs};
use crate::params::Parameters;
use crate::state::{Geometry, State};

/// `H(rho) = rho^(gamma-1) - gamma + (gamma-1)/rho`.
pub fn enthalpy_h(rho: f64, params: &Parameters) -> f64 {
    let g1 = params.gamma - 1.0;
    // rho^(g1) - 1 and g1 (1/rho - 1) cancel to first order; expm1 keeps the
    // quadratic remainder accurate near rho = 1.
    (g1 * rho.ln()).exp_m1() + g1 * (1.0 - rho) / rho
}

/// Radius potential `P(R)`, convex with minimum `P(1) = 0`.
pub fn potential_p(radius: f64, params: &Parameters) -> f64 {
    let g = params.gamma0;
    let d = radius - 1.0;
    let gas = ((3.0 - 3.0 * g) * radius.ln()).exp_m1() / (3.0 * g - 3.0);
    params.bubble_coefficient() * gas
        + d * (radius + 1.0) / params.we
        + params.ca / 6.0 * d * (radius * radius + radius + 1.0)
}

/// `dP/dR = -(Ca/2 + 2/We) R^(2 - 3 gamma0) + 2R/We + (Ca/2) R^2`.
pub fn potential_p_derivative(radius: f64, params: &Parameters) -> f64 {
    -params.bubble_coefficient() * radius.powf(2.0 - 3.0 * params.gamma0)
        + 2.0 * radius / params.we
        + 0.5 * params.ca * radius * radius
}

/// Difference of a cell field located at the nodes.
pub fn node_gradient(cells: &[f64], grid: &Grid) -> Vec<f64> {
    let n = cells.len();
    let inv_dx = 1.0 / grid.dx();
    let mut g = vec![0.0; n + 1];
    for j in 1..n {
        g[j] = (cells[j] - cells[j - 1]) * inv_dx;
    }
    g[0] = g[1];
    g[n] = g[n - 1];
    g
}

fn nodal_integral(grid: &Grid, f: impl Fn(usize) -> f64) -> f64 {
    (0..=grid.n()).map(|j| f(j) * grid.node_weight(j)).sum()
}

fn cell_integral(grid: &Grid, f: impl Fn(usize) -> f64) -> f64 {
    (0..grid.n()).map(f).sum::<f64>() * grid.dx()
}

/// `int H(rho) dx`.
pub fn h_integral(state: &State, grid: &Grid, params: &Parameters) -> f64 {
    cell_integral(grid, |j| enthalpy_h(state.rho(j), params))
}

/// Kinetic part `1/2 int u^2 dx`.
pub fn kinetic_energy(state: &State, grid: &Grid) -> f64 {
    0.5 * nodal_integral(grid, |j| state.u[j] * state.u[j])
}

/// `E0 = 1/2 int u^2 + (Ca/2)/(gamma-1) int H(rho) + P(R)`.
pub fn basic_energy(state: &State, grid: &Grid, params: &Parameters) -> f64 {
    kinetic_energy(state, grid)
        + 0.5 * params.ca / (params.gamma - 1.0) * h_integral(state, grid, params)
        + potential_p(state.radius, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// `mu int rho (r^2 u_x)^2 + 2 mu int u^2 / (rho r^2)`.
    pub nodal: f64,
    /// `mu int sigma^2 / rho + 2 mu R u_0^2`; the rate at which `E0` is lost.
    pub cellwise: f64,
}

pub fn dissipation(state: &State, geom: &Geometry, grid: &Grid, params: &Parameters) -> Dissipation {
    let mu = params.mu;
    let dx = grid.dx();
    let sigma = operators::viscous_stress(state, geom, grid);
    let cellwise = mu * cell_integral(grid, |j| sigma[j] * sigma[j] * state.v[j])
        + 2.0 * mu * state.radius * state.u[0] * state.u[0];
    let u = &state.u;
    let nodal = mu
        * cell_integral(grid, |j| {
            let grad = geom.cell_r2(j) * (u[j + 1] - u[j]) / dx;
            let hoop = 0.5 * (u[j] * u[j] / geom.r2[j] + u[j + 1] * u[j + 1] / geom.r2[j + 1]);
            grad * grad / state.v[j] + 2.0 * state.v[j] * hoop
        });
    Dissipation { nodal, cellwise }
}

/// Bresch–Desjardins entropy with the effective velocity
/// `w = u + mu r^2 (log rho)_x`.
pub fn bd_entropy(state: &State, geom: &Geometry, grid: &Grid, params: &Parameters) -> f64 {
    let log_rho: Vec<f64> = state.v.iter().map(|v| -v.ln()).collect();
    let grad = node_gradient(&log_rho, grid);
    let kinetic = 0.5
        * nodal_integral(grid, |j| {
            let w = state.u[j] + params.mu * geom.r2[j] * grad[j];
            w * w
        });
    kinetic
        + 0.5 * params.ca / (params.gamma - 1.0) * h_integral(state, grid, params)
        + potential_p(state.radius, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEnergies {
    /// Boundary coefficient `3 gamma0/2 (Ca/2 + 2/We) - 1/We`.
    pub e2_var_a: f64,
    /// Boundary coefficient `3 gamma0/2 (Ca/2 + 2/We) R^(1 - 3 gamma0) + 1/We`.
    pub e2_var_b: f64,
    pub e3: f64,
}

/// Time derivatives the equations assign to a state.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDerivatives {
    /// `u_t` at nodes.
    pub u_t: Vec<f64>,
    /// `(log rho)_t` at cells.
    pub log_rho_t: Vec<f64>,
    /// `rho_t` at cells.
    pub rho_t: Vec<f64>,
    pub r_t: f64,
}

impl TimeDerivatives {
    pub fn new(state: &State, rhs: &Rhs) -> Self {
        let log_rho_t: Vec<f64> = rhs.dv_dt.iter().zip(&state.v).map(|(d, v)| -d / v).collect();
        let rho_t = log_rho_t.iter().zip(&state.v).map(|(l, v)| l / v).collect();
        Self {
            u_t: rhs.du_dt.clone(),
            log_rho_t,
            rho_t,
            r_t: rhs.dr_dt,
        }
    }
}

/// `(Ca/2) 2 gamma/(gamma-1)^2 int ((rho^((gamma-1)/2))_t)^2 dx`.
fn acoustic_rate_energy(state: &State, dt: &TimeDerivatives, grid: &Grid, params: &Parameters) -> f64 {
    let g1 = params.gamma - 1.0;
    let coef = 0.5 * params.ca * 2.0 * params.gamma / (g1 * g1);
    coef * cell_integral(grid, |j| {
        let y_t = 0.5 * g1 * state.rho(j).powf(0.5 * g1) * dt.log_rho_t[j];
        y_t * y_t
    })
}

pub fn e2_boundary_coefficients(radius: f64, params: &Parameters) -> (f64, f64) {
    let c = params.bubble_coefficient();
    let g = params.gamma0;
    let a = 1.5 * g * c - 1.0 / params.we;
    let b = 1.5 * g * c * radius.powf(1.0 - 3.0 * g) + 1.0 / params.we;
    (a, b)
}

pub fn derivative_energies(
    state: &State,
    geom: &Geometry,
    rhs: &Rhs,
    grid: &Grid,
    params: &Parameters,
) -> DerivativeEnergies {
    let dt = TimeDerivatives::new(state, rhs);
    let acoustic = acoustic_rate_energy(state, &dt, grid, params);
    let kinetic = 0.5 * nodal_integral(grid, |j| dt.u_t[j] * dt.u_t[j]);
    let (ca, cb) = e2_boundary_coefficients(state.radius, params);
    let rdot2 = dt.r_t * dt.r_t;
    let grad = node_gradient(&dt.log_rho_t, grid);
    let e3_kinetic = 0.5
        * nodal_integral(grid, |j| {
            let w = dt.u_t[j] + params.mu * grad[j] * geom.r2[j];
            w * w
        });
    DerivativeEnergies {
        e2_var_a: kinetic + acoustic + ca * rdot2,
        e2_var_b: kinetic + acoustic + cb * rdot2,
        e3: e3_kinetic + acoustic,
    }
}

/// Decay norm `||r^2 u_x||^2 + ||u/r||^2 + ||r^2 rho_x||^2 + (R-1)^2`.
pub fn decay_norm_q(state: &State, geom: &Geometry, grid: &Grid) -> f64 {
    let dx = grid.dx();
    let u = &state.u;
    let strain = cell_integral(grid, |j| {
        let g = geom.cell_r2(j) * (u[j + 1] - u[j]) / dx;
        g * g
    });
    let hoop = nodal_integral(grid, |j| u[j] * u[j] / geom.r2[j]);
    let rho = state.densities();
    let grad = node_gradient(&rho, grid);
    let density = nodal_integral(grid, |j| {
        let g = geom.r2[j] * grad[j];
        g * g
    });
    let dr = state.radius - 1.0;
    strain + hoop + density + dr * dr
}

/// `(rho~ R^2)^(-gamma)` with the extrapolated interface density.
pub fn boundary_density(state: &State, params: &Parameters) -> f64 {
    (state.interface_density() * state.radius * state.radius).powf(-params.gamma)
}

/// Every functional evaluated at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub radius: f64,
    pub dr_dt: f64,
    pub e0: f64,
    /// Instantaneous dissipation rate (cellwise form).
    pub d: f64,
    /// Dissipation integrated over all accepted steps so far.
    pub cum_d: f64,
    pub e1: f64,
    pub e2_var_a: f64,
    pub e2_var_b: f64,
    pub e3: f64,
    pub q: f64,
    pub h_int: f64,
    pub p: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub energy_residual: f64,
    pub boundary_density: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "t,R,dR_dt,E0,D,cumD,E1,E2_varA,E2_varB,E3,Q,Hint,P,rho_min,rho_max,energy_residual,boundary_density";
    pub const FIELDS: usize = 17;

    pub fn evaluate(state: &State, grid: &Grid, params: &Parameters, cum_d: f64, e0_initial: f64) -> Self {
        let geom = Geometry::from_state(state, grid);
        let rhs = operators::rhs(state, &geom, grid, params);
        let e0 = basic_energy(state, grid, params);
        let d = dissipation(state, &geom, grid, params).cellwise;
        let de = derivative_energies(state, &geom, &rhs, grid, params);
        let (rho_min, rho_max) = state
            .v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let r = 1.0 / v;
                (lo.min(r), hi.max(r))
            });
        Self {
            t: state.t,
            radius: state.radius,
            dr_dt: state.u[0],
            e0,
            d,
            cum_d,
            e1: bd_entropy(state, &geom, grid, params),
            e2_var_a: de.e2_var_a,
            e2_var_b: de.e2_var_b,
            e3: de.e3,
            q: decay_norm_q(state, &geom, grid),
            h_int: h_integral(state, grid, params),
            p: potential_p(state.radius, params),
            rho_min,
            rho_max,
            energy_residual: e0 + cum_d - e0_initial,
            boundary_density: boundary_density(state, params),
        }
    }

    pub fn values(&self) -> [f64; Self::FIELDS] {
        [
            self.t,
            self.radius,
            self.dr_dt,
            self.e0,
            self.d,
            self.cum_d,
            self.e1,
            self.e2_var_a,
            self.e2_var_b,
            self.e3,
            self.q,
            self.h_int,
            self.p,
            self.rho_min,
            self.rho_max,
            self.energy_residual,
            self.boundary_density,
        ]
    }

    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() != Self::FIELDS {
            return Err(Error::Other(format!(
                "expected {} values, found {}",
                Self::FIELDS,
                v.len()
            )));
        }
        Ok(Self {
            t: v[0],
            radius: v[1],
            dr_dt: v[2],
            e0: v[3],
            d: v[4],
            cum_d: v[5],
            e1: v[6],
            e2_var_a: v[7],
            e2_var_b: v[8],
            e3: v[9],
            q: v[10],
            h_int: v[11],
            p: v[12],
            rho_min: v[13],
            rho_max: v[14],
            energy_residual: v[15],
            boundary_density: v[16],
        })
    }

    /// One CSV row with `digits` significant digits per value.
    pub fn to_csv_row(&self, digits: usize) -> String {
        let digits = digits.max(1);
        self.values()
            .iter()
            .map(|x| format!("{:.*e}", digits - 1, x))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let values = row
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Other(format!("bad value `{f}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(&values)
    }

    /// Sign and ordering constraints every record satisfies.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Other(format!("record at t = {}: {what}", self.t)));
        if self.values().iter().any(|x| !x.is_finite()) {
            return fail("non-finite value");
        }
        if self.d < 0.0 || self.cum_d < 0.0 {
            return fail("negative dissipation");
        }
        if self.h_int < 0.0 || self.p < 0.0 || self.q < 0.0 {
            return fail("negative potential or decay norm");
        }
        if self.rho_min <= 0.0 || self.rho_min > self.rho_max || self.radius <= 0.0 {
            return fail("non-positive density or radius");
        }
        if self.q < (self.radius - 1.0).powi(2) * (1.0 - 1e-12) {
            return fail("decay norm below (R-1)^2");
        }
        Ok(())
    }
}

/// `E0(t) + cumD(t) - E0(0)` at every record.
pub fn energy_budget(records: &[DiagnosticsRecord]) -> Vec<(f64, f64)> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    records
        .iter()
        .map(|r| (r.t, r.e0 + r.cum_d - first.e0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    /// Least-squares slope of `log Q` against `log(1 + t)`.
    pub slope: f64,
    /// `exp(intercept)` of the same fit.
    pub amplitude: f64,
    /// `max (1 + t) Q(t)` over the window.
    pub sup_envelope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayOutcome {
    Fit(DecayFit),
    /// `Q` vanished identically on the window.
    Equilibrium,
}

/// Fits `Q ~ A (1 + t)^slope` to the samples inside `window`.
pub fn fit_decay(samples: &[(f64, f64)], window: (f64, f64)) -> Result<DecayOutcome> {
    let (lo, hi) = window;
    let start = samples.first().map_or(f64::NAN, |s| s.0);
    let end = samples.last().map_or(f64::NAN, |s| s.0);
    let slack = 1e-9 * (1.0 + end.abs());
    if samples.is_empty() || !(lo < hi) || lo < start - slack || hi > end + slack {
        return Err(Error::InvalidWindow { lo, hi, start, end });
    }
    let inside: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(t, _)| *t >= lo - slack && *t <= hi + slack)
        .collect();
    if inside.iter().all(|(_, q)| *q == 0.0) {
        return Ok(DecayOutcome::Equilibrium);
    }
    let pts: Vec<(f64, f64)> = inside
        .iter()
        .filter(|(_, q)| *q > 0.0)
        .map(|(t, q)| ((1.0 + t).ln(), q.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Other(format!(
            "decay fit needs two positive samples in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Other("decay fit window contains a single time".into()));
    }
    let slope = sxy / sxx;
    let sup_envelope = inside
        .iter()
        .map(|(t, q)| (1.0 + t) * q)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayOutcome::Fit(DecayFit {
        window,
        slope,
        amplitude: (my - slope * mx).exp(),
        sup_envelope,
        points: pts.len(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{make_initial_data, InitialDataSpec};
    use proptest::prelude::*;

    #[test]
    fn h_values() {
        let p = Parameters::default();
        assert_eq!(enthalpy_h(1.0, &p), 0.0);
        let p2 = Parameters::new(1.0, 1.0, 1.0, 2.0, 1.4).unwrap();
        assert!((enthalpy_h(2.0, &p2) - 0.5).abs() < 1e-15);
        for i in 1..=100 {
            let rho = 0.1 * i as f64;
            if i != 10 {
                assert!(enthalpy_h(rho, &p) > 0.0, "rho = {rho}");
                // gamma = 2 closed form (rho - 1)^2 / rho
                let exact = (rho - 1.0).powi(2) / rho;
                assert!((enthalpy_h(rho, &p2) - exact).abs() < 1e-13 * (1.0 + exact));
            }
        }
    }

    #[test]
    fn p_minimum_at_unit_radius() {
        let p = Parameters::new(1.0, 1.0, 1.0, 2.0, 4.0 / 3.0).unwrap();
        assert!(potential_p(1.0, &p).abs() < 1e-15);
        assert!(potential_p_derivative(1.0, &p).abs() < 1e-14);
        // finite-difference derivative agrees with the closed form
        for r in [0.5, 0.9, 1.3, 2.0] {
            let h = 1e-5;
            let fd = (potential_p(r + h, &p) - potential_p(r - h, &p)) / (2.0 * h);
            assert!((fd - potential_p_derivative(r, &p)).abs() < 1e-8);
        }
        // convexity via second differences on [0.2, 5]
        let h = 0.01;
        let mut r = 0.2 + h;
        while r < 5.0 {
            let second = potential_p(r + h, &p) - 2.0 * potential_p(r, &p) + potential_p(r - h, &p);
            assert!(second > 0.0, "R = {r}");
            assert!(potential_p(r, &p) >= 0.0);
            r += h;
        }
    }

    #[test]
    fn energy_of_simple_states() {
        let p = Parameters::default();
        let g = Grid::new(5.0, 50).unwrap();
        let eq = State::equilibrium(&g);
        let geom = Geometry::from_state(&eq, &g);
        assert_eq!(basic_energy(&eq, &g, &p), 0.0);
        assert_eq!(bd_entropy(&eq, &geom, &g, &p), 0.0);
        assert_eq!(decay_norm_q(&eq, &geom, &g), 0.0);
        let d = dissipation(&eq, &geom, &g, &p);
        assert_eq!((d.nodal, d.cellwise), (0.0, 0.0));

        // radius kick: only P contributes, P ~ P''(1) eps^2 / 2
        let eps = 1e-3;
        let kick = make_initial_data(&g, &InitialDataSpec::radius_kick(eps)).unwrap();
        let e0 = basic_energy(&kick, &g, &p);
        assert_eq!(e0, potential_p(1.0 + eps, &p));
        let h = 1e-4;
        let p2 = (potential_p_derivative(1.0 + h, &p) - potential_p_derivative(1.0 - h, &p)) / (2.0 * h);
        assert!((e0 / (0.5 * p2 * eps * eps) - 1.0).abs() < 5e-3);
        let kg = Geometry::from_state(&kick, &g);
        assert!((decay_norm_q(&kick, &kg, &g) - eps * eps).abs() < 1e-18);

        // velocity pulse: kinetic energy only, and E1 = E0 since rho = 1
        let pulse = make_initial_data(&g, &InitialDataSpec::velocity_pulse(0.01, 3.0)).unwrap();
        let pg = Geometry::from_state(&pulse, &g);
        let spec = InitialDataSpec::velocity_pulse(0.01, 3.0);
        let expected: f64 = 0.5 * 1e-4 * (0..=g.n()).map(|j| spec.pulse(g.node(j)).powi(2) * g.node_weight(j)).sum::<f64>();
        assert!((basic_energy(&pulse, &g, &p) - expected).abs() < 1e-18);
        assert_eq!(bd_entropy(&pulse, &pg, &g, &p), basic_energy(&pulse, &g, &p));
    }

    #[test]
    fn constant_density_entropy() {
        let p = Parameters::default();
        let g = Grid::new(4.0, 16).unwrap();
        let mut s = State::equilibrium(&g);
        s.v.iter_mut().for_each(|v| *v = 1.0 / 1.2);
        let geom = Geometry::from_state(&s, &g);
        let expected = 0.5 * p.ca / (p.gamma - 1.0) * enthalpy_h(1.2, &p) * 4.0;
        assert!((bd_entropy(&s, &geom, &g, &p) - expected).abs() < 1e-14);
    }

    #[test]
    fn dissipation_of_uniform_expansion() {
        let p = Parameters::default();
        let g = Grid::new(3.0, 12).unwrap();
        let mut s = State::equilibrium(&g);
        let geom = Geometry::from_state(&s, &g);
        s.u = geom.r.clone();
        let d = dissipation(&s, &geom, &g, &p);
        let expected = 9.0 * p.mu * 3.0 + 2.0 * p.mu;
        assert!((d.cellwise - expected).abs() < 1e-11);
    }

    #[test]
    fn dissipation_forms_converge() {
        let p = Parameters::default();
        let mut gaps = Vec::new();
        for n in [50, 100, 200, 400] {
            let g = Grid::new(5.0, n).unwrap();
            let mut s = make_initial_data(&g, &InitialDataSpec::density_bump(0.1, 4.0)).unwrap();
            s.radius = 1.02;
            for j in 0..n {
                let x = g.node(j);
                s.u[j] = 0.05 * (1.0 - x / 5.0).powi(2) * (1.0 + x).cos();
            }
            let geom = Geometry::from_state(&s, &g);
            let d = dissipation(&s, &geom, &g, &p);
            assert!(d.nodal > 0.0 && d.cellwise > 0.0);
            gaps.push((d.nodal - d.cellwise).abs() / d.cellwise);
        }
        for w in gaps.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.0, "gaps {gaps:?}");
        }
    }

    #[test]
    fn radius_kick_derivative_energies() {
        // u = 0, rho = 1 at t = 0: only the interface force accelerates the
        // liquid and dR/dt = 0, so both E2 variants reduce to 1/2 int u_t^2.
        let p = Parameters::default();
        let g = Grid::new(5.0, 50).unwrap();
        let s = make_initial_data(&g, &InitialDataSpec::radius_kick(0.05)).unwrap();
        let geom = Geometry::from_state(&s, &g);
        let rhs = operators::rhs(&s, &geom, &g, &p);
        let de = derivative_energies(&s, &geom, &rhs, &g, &p);
        let expected = 0.25 * g.dx() * rhs.du_dt[0].powi(2);
        assert!((de.e2_var_a - expected).abs() < 1e-12 * expected);
        assert_eq!(de.e2_var_a, de.e2_var_b);
        assert!((de.e3 - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn equilibrium_derivative_energies() {
        let p = Parameters::default();
        let g = Grid::new(5.0, 50).unwrap();
        let s = State::equilibrium(&g);
        let geom = Geometry::from_state(&s, &g);
        let rhs = operators::rhs(&s, &geom, &g, &p);
        let de = derivative_energies(&s, &geom, &rhs, &g, &p);
        assert_eq!((de.e2_var_a, de.e2_var_b, de.e3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn record_csv_round_trip() {
        let p = Parameters::default();
        let g = Grid::new(5.0, 50).unwrap();
        let s = make_initial_data(&g, &InitialDataSpec::density_bump(0.05, 2.0)).unwrap();
        let rec = DiagnosticsRecord::evaluate(&s, &g, &p, 0.0, basic_energy(&s, &g, &p));
        assert_eq!(DiagnosticsRecord::CSV_HEADER.split(',').count(), DiagnosticsRecord::FIELDS);
        let back = DiagnosticsRecord::from_csv_row(&rec.to_csv_row(17)).unwrap();
        assert_eq!(back, rec);
        back.check_invariants().unwrap();
        assert!(rec.h_int > 0.0);
    }

    #[test]
    fn fit_exact_power_law() {
        let samples: Vec<(f64, f64)> = (0..=200).map(|i| {
            let t = i as f64 * 0.5;
            (t, 1.0 / (1.0 + t))
        }).collect();
        let DecayOutcome::Fit(fit) = fit_decay(&samples, (0.0, 100.0)).unwrap() else {
            panic!("expected a fit");
        };
        assert!((fit.slope + 1.0).abs() < 1e-6);
        assert!((fit.sup_envelope - 1.0).abs() < 1e-12);
        assert!((fit.amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_exponential_is_steeper() {
        let samples: Vec<(f64, f64)> = (0..=1000).map(|i| {
            let t = i as f64 * 0.1;
            (t, (-t).exp())
        }).collect();
        let DecayOutcome::Fit(fit) = fit_decay(&samples, (1.0, 100.0)).unwrap() else {
            panic!("expected a fit");
        };
        assert!(fit.slope < -1.0);
    }

    #[test]
    fn fit_edge_cases() {
        let zeros: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.0)).collect();
        assert_eq!(fit_decay(&zeros, (1.0, 5.0)).unwrap(), DecayOutcome::Equilibrium);
        assert!(fit_decay(&zeros, (1.0, 50.0)).is_err());
        assert!(fit_decay(&zeros, (5.0, 1.0)).is_err());
        assert!(fit_decay(&[], (0.0, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn h_nonnegative(rho in 1e-3f64..1e3, gamma in 1.05f64..3.0) {
            let p = Parameters::new(1.0, 1.0, 1.0, gamma, 1.4).unwrap();
            prop_assert!(enthalpy_h(rho, &p) >= 0.0);
        }

        #[test]
        fn p_nonnegative(r in 0.05f64..20.0, gamma0 in 1.05f64..3.0, we in 0.1f64..100.0) {
            let p = Parameters::new(1.0, we, 1.0, 1.4, gamma0).unwrap();
            prop_assert!(potential_p(r, &p) >= 0.0);
        }

        #[test]
        fn q_bounds_radius_offset(
            r in 0.5f64..1.5,
            amps in prop::collection::vec(-0.3f64..0.3, 16),
        ) {
            let g = Grid::new(4.0, 16).unwrap();
            let mut s = State::equilibrium(&g);
            s.radius = r;
            for (j, a) in amps.iter().enumerate() {
                s.v[j] = 1.0 + a;
                s.u[j] = 0.1 * a;
            }
            let geom = Geometry::from_state(&s, &g);
            let q = decay_norm_q(&s, &geom, &g);
            prop_assert!(q >= (r - 1.0).powi(2));
            let d = dissipation(&s, &geom, &g, &Parameters::default());
            prop_assert!(d.nodal >= 0.0 && d.cellwise >= 0.0);
        }
    }
}
