//! Time stepping: a two-stage explicit scheme and a semi-implicit scheme that
//! treats the viscous operator with weight `theta` at the new level.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord, Dissipation};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operators::{self, Rhs};
use crate::params::Parameters;
use crate::state::{Geometry, State};
use crate::tridiag::Tridiagonal;

/// Number of times a failing step is retried with half the time step.
pub const RETRY_BUDGET: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitRk2,
    SemiImplicit,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExplicitRk2 => "explicit-rk2",
            Scheme::SemiImplicit => "semi-implicit",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "explicit-rk2" => Ok(Scheme::ExplicitRk2),
            "semi-implicit" => Ok(Scheme::SemiImplicit),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheme `{other}` (expected explicit-rk2 or semi-implicit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Courant factor in `(0, 1]`.
    pub cfl: f64,
    /// Upper bound on the step.
    pub dt_max: f64,
    pub t_end: f64,
    /// Implicitness of the viscous term, in `[1/2, 1]`.
    pub theta: f64,
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, cfl: f64, dt_max: f64, t_end: f64, theta: f64) -> Result<Self> {
        let c = Self {
            scheme,
            cfl,
            dt_max,
            t_end,
            theta,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn semi_implicit(dt_max: f64, t_end: f64) -> Self {
        Self {
            scheme: Scheme::SemiImplicit,
            cfl: 0.5,
            dt_max,
            t_end,
            theta: 0.5,
        }
    }

    pub fn explicit(dt_max: f64, t_end: f64) -> Self {
        Self {
            scheme: Scheme::ExplicitRk2,
            cfl: 0.5,
            dt_max,
            t_end,
            theta: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl = {} must lie in (0, 1]", self.cfl));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return bad(format!("dt_max = {} must be positive", self.dt_max));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be non-negative", self.t_end));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return bad(format!("theta = {} must lie in [0.5, 1]", self.theta));
        }
        Ok(())
    }
}

/// Lagrangian characteristic speed `rho r^2 c` of every cell.
pub fn characteristic_speeds(state: &State, geom: &Geometry, params: &Parameters) -> Vec<f64> {
    (0..state.n())
        .map(|j| {
            let rho = state.rho(j);
            let rb = geom.cell_radius(j);
            rho * rb * rb * operators::sound_speed(rho, params)
        })
        .collect()
}

/// Largest admissible step for the given scheme.
///
/// The acoustic bound is `cfl dx / (rho rbar^2 c)` per cell, with the half
/// cell at the interface counted at `dx / sqrt(2)`. The explicit scheme is
/// further limited by `cfl dx^2 / (2 mu rho^2 rbar^4)` per cell and by the
/// interface row of the viscous operator.
pub fn stable_dt(state: &State, geom: &Geometry, grid: &Grid, config: &IntegratorConfig, params: &Parameters) -> f64 {
    let speeds = characteristic_speeds(state, geom, params);
    stable_dt_from_speeds(state, geom, grid, config, params, &speeds)
}

fn stable_dt_from_speeds(
    state: &State,
    geom: &Geometry,
    grid: &Grid,
    config: &IntegratorConfig,
    params: &Parameters,
    speeds: &[f64],
) -> f64 {
    let dx = grid.dx();
    let mut dt = config.dt_max;
    for (j, s) in speeds.iter().enumerate() {
        let mut lim = config.cfl * dx / s;
        if j == 0 {
            lim *= std::f64::consts::FRAC_1_SQRT_2;
        }
        dt = dt.min(lim);
    }
    if config.scheme == Scheme::ExplicitRk2 {
        for j in 0..state.n() {
            let rho = state.rho(j);
            let r2 = geom.cell_r2(j);
            dt = dt.min(config.cfl * 0.5 * dx * dx / (params.mu * rho * rho * r2 * r2));
        }
        let r = state.radius;
        let rate = 2.0 * params.mu * r * r * (state.rho(0) * r * r / (dx * dx) + 2.0 / (r * dx));
        dt = dt.min(config.cfl * 0.5 / rate);
    }
    dt
}

fn check_positive(state: &State) -> Result<()> {
    let fail = |reason: String| Err(Error::StepFailure { t: state.t, reason });
    if !(state.radius.is_finite() && state.radius > 0.0) {
        return fail(format!("bubble radius became {}", state.radius));
    }
    if let Some(j) = state.v.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return fail(format!("density lost positivity in cell {j}"));
    }
    if state.u.iter().any(|u| !u.is_finite()) {
        return fail("velocity became non-finite".into());
    }
    Ok(())
}

fn axpy_state(base: &State, dt: f64, k: &Rhs) -> State {
    let n = base.n();
    let mut u: Vec<f64> = base.u.iter().zip(&k.du_dt).map(|(a, b)| a + dt * b).collect();
    u[n] = 0.0;
    State {
        t: base.t + dt,
        u,
        v: base.v.iter().zip(&k.dv_dt).map(|(a, b)| a + dt * b).collect(),
        radius: base.radius + dt * k.dr_dt,
    }
}

/// Heun's method; the geometry is rebuilt from the radius constraint after
/// each stage.
pub fn step_explicit(state: &State, dt: f64, grid: &Grid, params: &Parameters) -> Result<State> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let g0 = Geometry::from_state(state, grid);
    let k1 = operators::rhs(state, &g0, grid, params);
    let s1 = axpy_state(state, dt, &k1);
    check_positive(&s1)?;
    let g1 = Geometry::from_state(&s1, grid);
    let k2 = operators::rhs(&s1, &g1, grid, params);
    let avg = Rhs {
        du_dt: k1.du_dt.iter().zip(&k2.du_dt).map(|(a, b)| 0.5 * (a + b)).collect(),
        dv_dt: k1.dv_dt.iter().zip(&k2.dv_dt).map(|(a, b)| 0.5 * (a + b)).collect(),
        dr_dt: 0.5 * (k1.dr_dt + k2.dr_dt),
    };
    let next = axpy_state(state, dt, &avg);
    check_positive(&next)?;
    Ok(next)
}

/// Solves `(I - dt theta V) u_new = u_old + dt (a + (1 - theta) V u_old)` on
/// the unknown nodes `0..n` and appends the wall value.
fn viscous_solve(op: &Tridiagonal, u_old: &[f64], accel: &[f64], dt: f64, theta: f64, t: f64) -> Result<Vec<f64>> {
    let n = op.len();
    let vu = op.apply(&u_old[..n]);
    let rhs: Vec<f64> = (0..n)
        .map(|j| u_old[j] + dt * (accel[j] + (1.0 - theta) * vu[j]))
        .collect();
    let mut sys = op.clone();
    for j in 0..n {
        sys.lower[j] *= -dt * theta;
        sys.diag[j] = 1.0 - dt * theta * sys.diag[j];
        sys.upper[j] *= -dt * theta;
    }
    let mut u = sys.solve(&rhs).ok_or_else(|| Error::StepFailure {
        t,
        reason: "singular viscous system".into(),
    })?;
    u.push(0.0);
    Ok(u)
}

/// Moves `v` and `R` with the theta-averaged velocity using node factors `r2`.
fn transport(state: &State, u_new: &[f64], r2: &[f64], dt: f64, theta: f64, grid: &Grid) -> (Vec<f64>, f64) {
    let ubar: Vec<f64> = u_new
        .iter()
        .zip(&state.u)
        .map(|(a, b)| theta * a + (1.0 - theta) * b)
        .collect();
    let flux: Vec<f64> = ubar.iter().zip(r2).map(|(u, r2)| r2 * u).collect();
    let c = dt / grid.dx();
    let v = state
        .v
        .iter()
        .zip(flux.windows(2))
        .map(|(v, f)| v + c * (f[1] - f[0]))
        .collect();
    (v, state.radius + dt * ubar[0])
}

/// Predictor-corrector with a theta-weighted viscous solve.
///
/// The predictor freezes density and radii at the old level; the corrector
/// uses their average over the old and predicted levels together with the
/// averaged inviscid forcing. `theta = 1/2` is second order in time.
pub fn step_semi_implicit(state: &State, dt: f64, grid: &Grid, params: &Parameters, theta: f64) -> Result<State> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let g0 = Geometry::from_state(state, grid);
    let rho0 = state.densities();
    let a0 = operators::inviscid_acceleration(&rho0, &g0.r2, state.radius, grid, params);
    let op0 = operators::viscous_operator(&rho0, &g0.r2, grid, params.mu);
    let u_star = viscous_solve(&op0, &state.u, &a0, dt, theta, state.t)?;
    let (v_star, r_star) = transport(state, &u_star, &g0.r2, dt, theta, grid);
    let pred = State {
        t: state.t + dt,
        u: u_star,
        v: v_star,
        radius: r_star,
    };
    check_positive(&pred)?;

    let g1 = Geometry::from_state(&pred, grid);
    let rho1 = pred.densities();
    let a1 = operators::inviscid_acceleration(&rho1, &g1.r2, pred.radius, grid, params);
    let rho_m: Vec<f64> = rho0.iter().zip(&rho1).map(|(a, b)| 0.5 * (a + b)).collect();
    let r2_m: Vec<f64> = g0.r2.iter().zip(&g1.r2).map(|(a, b)| 0.5 * (a + b)).collect();
    let a_m: Vec<f64> = a0.iter().zip(&a1).map(|(a, b)| 0.5 * (a + b)).collect();
    let op_m = operators::viscous_operator(&rho_m, &r2_m, grid, params.mu);
    let u_new = viscous_solve(&op_m, &state.u, &a_m, dt, theta, state.t)?;
    let (v_new, r_new) = transport(state, &u_new, &r2_m, dt, theta, grid);
    let next = State {
        t: state.t + dt,
        u: u_new,
        v: v_new,
        radius: r_new,
    };
    check_positive(&next)?;
    Ok(next)
}

/// One step of the configured scheme.
pub fn step(state: &State, dt: f64, grid: &Grid, params: &Parameters, config: &IntegratorConfig) -> Result<State> {
    match config.scheme {
        Scheme::ExplicitRk2 => step_explicit(state, dt, grid, params),
        Scheme::SemiImplicit => step_semi_implicit(state, dt, grid, params, config.theta),
    }
}

/// What to record besides the per-step radius history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    /// Spacing of diagnostic records.
    pub cadence: f64,
    /// Times at which full field snapshots are stored.
    pub snapshot_times: Vec<f64>,
    /// Keep the full state at every record as well.
    pub keep_states: bool,
}

impl SampleSpec {
    pub fn every(cadence: f64) -> Self {
        Self {
            cadence,
            snapshot_times: Vec::new(),
            keep_states: false,
        }
    }

    pub fn with_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cadence > 0.0 && self.cadence.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sample cadence {} must be positive",
                self.cadence
            )));
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidConfig("snapshot times must be non-negative".into()));
        }
        Ok(())
    }
}

/// One entry of the per-step history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub t: f64,
    pub radius: f64,
    /// `(rho~ R^2)^(-gamma)`.
    pub boundary_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub params: Parameters,
    pub config: IntegratorConfig,
    pub records: Vec<DiagnosticsRecord>,
    /// Both dissipation forms at every record.
    pub dissipation: Vec<Dissipation>,
    /// Full states at each record, when requested.
    pub states: Vec<State>,
    pub snapshots: Vec<State>,
    /// Every accepted step, starting with the initial state.
    pub history: Vec<HistoryPoint>,
    /// Largest `rho r^2 c` seen in each cell over the run.
    pub max_char_speed: Vec<f64>,
    pub final_state: State,
    pub steps: usize,
}

impl Trajectory {
    pub fn q_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.q)).collect()
    }

    pub fn max_relative_residual(&self) -> f64 {
        let e0 = self.records.first().map_or(0.0, |r| r.e0);
        let worst = self
            .records
            .iter()
            .map(|r| r.energy_residual.abs())
            .fold(0.0, f64::max);
        if e0 > 0.0 {
            worst / e0
        } else {
            worst
        }
    }
}

fn history_point(state: &State, params: &Parameters) -> HistoryPoint {
    HistoryPoint {
        t: state.t,
        radius: state.radius,
        boundary_density: diagnostics::boundary_density(state, params),
    }
}

/// Dissipation rate at the average of two consecutive states.
///
/// For the viscous part of a Crank-Nicolson step this is exactly the energy
/// the step removes; the trapezoid rule is off by `dt^3 <A u_t, u_t>` per step.
fn midpoint_dissipation(a: &State, b: &State, grid: &Grid, params: &Parameters) -> f64 {
    let avg = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect::<Vec<f64>>();
    let mid = State {
        t: 0.5 * (a.t + b.t),
        u: avg(&a.u, &b.u),
        v: avg(&a.v, &b.v),
        radius: 0.5 * (a.radius + b.radius),
    };
    let geom = Geometry::from_state(&mid, grid);
    diagnostics::dissipation(&mid, &geom, grid, params).cellwise
}

/// Integrates `initial` to `config.t_end`.
///
/// Steps are shortened to land exactly on record and snapshot times. The
/// dissipated energy is accumulated over every step by the midpoint rule.
pub fn run(
    initial: &State,
    grid: &Grid,
    params: &Parameters,
    config: &IntegratorConfig,
    sample: &SampleSpec,
) -> Result<Trajectory> {
    params.validate()?;
    config.validate()?;
    sample.validate()?;
    initial.validate(grid)?;

    let t0 = initial.t;
    let t_end = t0 + config.t_end;
    let mut snaps: Vec<f64> = sample
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t >= t0 && *t <= t_end)
        .collect();
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let mut next_snap = 0;

    let mut state = initial.clone();
    let mut geom = Geometry::from_state(&state, grid);
    let e0_initial = diagnostics::basic_energy(&state, grid, params);
    let mut cum_d = 0.0;
    let mut speeds = characteristic_speeds(&state, &geom, params);
    let mut max_char_speed = speeds.clone();

    let mut traj = Trajectory {
        grid: *grid,
        params: *params,
        config: *config,
        records: Vec::new(),
        dissipation: Vec::new(),
        states: Vec::new(),
        snapshots: Vec::new(),
        history: vec![history_point(&state, params)],
        max_char_speed: Vec::new(),
        final_state: state.clone(),
        steps: 0,
    };

    let record = |traj: &mut Trajectory, state: &State, geom: &Geometry, cum_d: f64| {
        traj.records
            .push(DiagnosticsRecord::evaluate(state, grid, params, cum_d, e0_initial));
        traj.dissipation
            .push(diagnostics::dissipation(state, geom, grid, params));
        if sample.keep_states {
            traj.states.push(state.clone());
        }
    };
    record(&mut traj, &state, &geom, cum_d);
    while next_snap < snaps.len() && snaps[next_snap] <= t0 {
        traj.snapshots.push(state.clone());
        next_snap += 1;
    }

    let mut sample_index: u64 = 1;
    let tol = 1e-12 * (1.0 + t_end.abs());
    while state.t < t_end - tol {
        let next_sample = (t0 + sample_index as f64 * sample.cadence).min(t_end);
        let mut target = next_sample;
        if next_snap < snaps.len() {
            target = target.min(snaps[next_snap]);
        }
        let mut dt = stable_dt_from_speeds(&state, &geom, grid, config, params, &speeds);
        let mut lands = false;
        if state.t + dt >= target - tol {
            dt = target - state.t;
            lands = true;
        }

        let mut attempt = 0;
        let next = loop {
            match step(&state, dt, grid, params, config) {
                Ok(s) => break s,
                Err(e) if attempt >= RETRY_BUDGET => return Err(e),
                Err(_) => {
                    attempt += 1;
                    dt *= 0.5;
                    lands = false;
                }
            }
        };
        cum_d += dt * midpoint_dissipation(&state, &next, grid, params);
        state = next;
        if lands {
            state.t = target;
        }
        geom = Geometry::from_state(&state, grid);
        traj.steps += 1;
        traj.history.push(history_point(&state, params));
        speeds = characteristic_speeds(&state, &geom, params);
        for (m, s) in max_char_speed.iter_mut().zip(&speeds) {
            *m = m.max(*s);
        }

        if lands && state.t >= next_sample - tol {
            record(&mut traj, &state, &geom, cum_d);
            sample_index += 1;
        }
        while next_snap < snaps.len() && state.t >= snaps[next_snap] - tol {
            traj.snapshots.push(state.clone());
            next_snap += 1;
        }
    }
    if traj.records.last().map_or(true, |r| r.t < state.t) {
        record(&mut traj, &state, &geom, cum_d);
    }
    traj.max_char_speed = max_char_speed;
    traj.final_state = state;
    Ok(traj)
}
