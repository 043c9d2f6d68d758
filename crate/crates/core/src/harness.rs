//! Domain-truncation sweeps, refinement studies and perturbation stability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::initial::{cutoff_initial_data, make_initial_data, InitialDataSpec};
use crate::integrator::{run, stable_dt, IntegratorConfig, SampleSpec, Trajectory};
use crate::params::Parameters;
use crate::state::{Geometry, State};

/// `int_0^N u^2 dx` by the trapezoid rule over the nodes in `[0, N]`.
fn nodal_norm2(u: &[f64], grid: &Grid, upto: f64) -> f64 {
    let last = ((upto / grid.dx()).round() as usize).min(grid.n());
    (0..=last)
        .map(|j| {
            let w = if j == 0 || j == last { 0.5 } else { 1.0 };
            w * u[j] * u[j]
        })
        .sum::<f64>()
        * grid.dx()
}

/// `int_0^N v^2 dx` over the cells in `[0, N]`.
fn cell_norm2(v: &[f64], grid: &Grid, upto: f64) -> f64 {
    let cells = ((upto / grid.dx()).round() as usize).min(grid.n());
    v[..cells].iter().map(|x| x * x).sum::<f64>() * grid.dx()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Specification of a truncation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: InitialDataSpec,
    /// Domain sizes `k_1 < k_2 < ...`.
    pub ks: Vec<f64>,
    /// Observation window `[0, N]`.
    pub window: f64,
    pub t_obs: f64,
    /// Spacing shared by every domain.
    pub dx: f64,
    /// Number of comparison times in `(0, t_obs]`.
    pub samples: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.ks.len() < 2 {
            return bad("a truncation sweep needs at least two domain sizes".into());
        }
        if self.ks.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("domain sizes must increase strictly".into());
        }
        if !(self.window > 0.0 && self.window < self.ks[0]) {
            return bad(format!(
                "observation window N = {} must satisfy 0 < N < k_1 = {}",
                self.window, self.ks[0]
            ));
        }
        if self.base.support > self.window && self.base.family != crate::initial::Family::RadiusKick {
            return bad(format!(
                "initial perturbation support {} exceeds the observation window {}",
                self.base.support, self.window
            ));
        }
        if !(self.t_obs > 0.0 && self.dx > 0.0 && self.samples > 0) {
            return bad("t_obs, dx and samples must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub k_small: f64,
    pub k_large: f64,
    /// `||u_small - u_large||_{L2(0,N)}` at `t_obs`.
    pub u_diff: f64,
    /// Same for the specific volume.
    pub v_diff: f64,
    /// `sup |R_small - R_large|` over `[0, t_obs]`.
    pub r_diff: f64,
    /// Time for a signal leaving `x = N` to reach `x = k_small` and return.
    pub return_time: f64,
    /// Largest of the three differences over samples before `return_time`.
    pub pre_return_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationTable {
    pub dt: f64,
    pub rows: Vec<TruncationRow>,
}

/// Round trip time `2 int_N^k dx / max(rho r^2 c)` using the per-cell maxima
/// recorded during the run.
pub fn reflection_return_time(traj: &Trajectory, window: f64) -> f64 {
    let g = &traj.grid;
    let first = (window / g.dx()).round() as usize;
    2.0 * traj.max_char_speed[first.min(g.n())..]
        .iter()
        .map(|s| g.dx() / s)
        .sum::<f64>()
}

/// Solves the problem on every domain size with cutoff data and compares
/// consecutive solutions on `[0, N] x [0, t_obs]`.
///
/// All runs use one fixed step: half the smallest stable step over the
/// initial states, capped by `config.dt_max`.
pub fn truncation_sweep(spec: &SweepSpec, params: &Parameters, config: &IntegratorConfig) -> Result<TruncationTable> {
    spec.validate()?;
    config.validate()?;
    let k_max = *spec.ks.last().expect("validated");
    let big = Grid::with_spacing(k_max, spec.dx)?;
    let base = make_initial_data(&big, &spec.base)?;

    let mut initial = Vec::with_capacity(spec.ks.len());
    for &k in &spec.ks {
        let grid = Grid::with_spacing(k, spec.dx)?;
        let state = cutoff_initial_data(&base, &big, &grid)?;
        initial.push((grid, state));
    }
    let mut dt = config.dt_max;
    for (grid, state) in &initial {
        let geom = Geometry::from_state(state, grid);
        dt = dt.min(0.5 * stable_dt(state, &geom, grid, config, params));
    }
    let cfg = IntegratorConfig {
        dt_max: dt,
        t_end: spec.t_obs,
        ..*config
    };
    let sample = SampleSpec::every(spec.t_obs / spec.samples as f64).with_states();
    let runs: Vec<Trajectory> = initial
        .par_iter()
        .zip(&spec.ks)
        .map(|((grid, state), &k)| {
            run(state, grid, params, &cfg, &sample).map_err(|e| Error::SweepRun {
                k,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let rows = runs
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let return_time = reflection_return_time(a, spec.window);
            let mut r_diff: f64 = 0.0;
            let mut pre: f64 = 0.0;
            let (mut u_diff, mut v_diff) = (0.0, 0.0);
            for (sa, sb) in a.states.iter().zip(&b.states) {
                let m = a.grid.n();
                let du = nodal_norm2(&diff(&sa.u, &sb.u[..=m]), &a.grid, spec.window).sqrt();
                let dv = cell_norm2(&diff(&sa.v, &sb.v[..m]), &a.grid, spec.window).sqrt();
                let dr = (sa.radius - sb.radius).abs();
                r_diff = r_diff.max(dr);
                if sa.t < return_time {
                    pre = pre.max(du).max(dv).max(dr);
                }
                u_diff = du;
                v_diff = dv;
            }
            TruncationRow {
                k_small: a.grid.k(),
                k_large: b.grid.k(),
                u_diff,
                v_diff,
                r_diff,
                return_time,
                pre_return_diff: pre,
            }
        })
        .collect();
    Ok(TruncationTable { dt, rows })
}

/// Observed convergence order between two consecutive error levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    /// Both errors vanish.
    Exact,
    Observed(f64),
    /// Only the finer error vanishes.
    Unbounded,
}

impl Order {
    pub fn between(coarse: f64, fine: f64) -> Self {
        match (coarse == 0.0, fine == 0.0) {
            (true, true) => Order::Exact,
            (false, true) => Order::Unbounded,
            _ => Order::Observed((coarse / fine).log2()),
        }
    }

    /// True if the order is at least `min`.
    pub fn at_least(&self, min: f64) -> bool {
        match self {
            Order::Exact | Order::Unbounded => true,
            Order::Observed(p) => *p >= min,
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Exact => f.write_str("exact"),
            Order::Unbounded => f.write_str("inf"),
            Order::Observed(p) => write!(f, "{p:.17e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub n: usize,
    pub dx: f64,
    pub dt: f64,
    /// Errors against the finest level at `t_obs`.
    pub err_u: f64,
    pub err_v: f64,
    pub err_r: f64,
    /// Orders against the next finer row; `None` on the last row.
    pub order_u: Option<Order>,
    pub order_v: Option<Order>,
    pub order_r: Option<Order>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSpec {
    pub base: InitialDataSpec,
    pub k: f64,
    /// Cell counts, each twice the previous.
    pub levels: Vec<usize>,
    pub t_obs: f64,
}

/// Restriction of a fine solution onto a coarser nested grid: node values
/// are injected and cell volumes averaged.
fn restrict(fine: &State, ratio: usize, coarse_n: usize) -> (Vec<f64>, Vec<f64>) {
    let u = (0..=coarse_n).map(|j| fine.u[j * ratio]).collect();
    let v = (0..coarse_n)
        .map(|j| fine.v[j * ratio..(j + 1) * ratio].iter().sum::<f64>() / ratio as f64)
        .collect();
    (u, v)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs the base data on every level with `dt` proportional to `dx`
/// (`config.dt_max` is the step of the coarsest level) and measures max-norm
/// errors against the finest level.
pub fn refinement_study(spec: &RefinementSpec, params: &Parameters, config: &IntegratorConfig) -> Result<Vec<RefinementRow>> {
    if spec.levels.len() < 3 {
        return Err(Error::InvalidConfig("a refinement study needs at least three levels".into()));
    }
    if spec.levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidConfig("refinement levels must double".into()));
    }
    let n0 = spec.levels[0] as f64;
    let finals: Vec<(Grid, f64, State)> = spec
        .levels
        .par_iter()
        .map(|&n| {
            let grid = Grid::new(spec.k, n)?;
            let state = make_initial_data(&grid, &spec.base)?;
            let dt = config.dt_max * n0 / n as f64;
            let cfg = IntegratorConfig {
                dt_max: dt,
                t_end: spec.t_obs,
                ..*config
            };
            let traj = run(&state, &grid, params, &cfg, &SampleSpec::every(spec.t_obs.max(f64::MIN_POSITIVE)))?;
            Ok((grid, dt, traj.final_state))
        })
        .collect::<Result<_>>()?;
    let (fine_grid, _, fine) = finals.last().expect("three levels");
    let mut rows: Vec<RefinementRow> = finals[..finals.len() - 1]
        .iter()
        .map(|(grid, dt, s)| {
            let ratio = fine_grid.n() / grid.n();
            let (u, v) = restrict(fine, ratio, grid.n());
            RefinementRow {
                n: grid.n(),
                dx: grid.dx(),
                dt: *dt,
                err_u: max_abs_diff(&s.u, &u),
                err_v: max_abs_diff(&s.v, &v),
                err_r: (s.radius - fine.radius).abs(),
                order_u: None,
                order_v: None,
                order_r: None,
            }
        })
        .collect();
    for i in 0..rows.len().saturating_sub(1) {
        let (a, b) = (&rows[i], &rows[i + 1]);
        let (ou, ov, or) = (
            Order::between(a.err_u, b.err_u),
            Order::between(a.err_v, b.err_v),
            Order::between(a.err_r, b.err_r),
        );
        rows[i].order_u = Some(ou);
        rows[i].order_v = Some(ov);
        rows[i].order_r = Some(or);
    }
    Ok(rows)
}

/// Max-norm distance between two states on the same grid.
pub fn state_distance(a: &State, b: &State) -> f64 {
    max_abs_diff(&a.u, &b.u)
        .max(max_abs_diff(&a.v, &b.v))
        .max((a.radius - b.radius).abs())
}

/// Errors of runs with steps `dts` against a run with `reference_dt`, all on
/// one grid, at `t_end`. Returns `(dt, error)` pairs.
pub fn time_refinement(
    initial: &State,
    grid: &Grid,
    params: &Parameters,
    config: &IntegratorConfig,
    dts: &[f64],
    reference_dt: f64,
) -> Result<Vec<(f64, f64)>> {
    let solve = |dt: f64| -> Result<State> {
        let cfg = IntegratorConfig {
            dt_max: dt,
            cfl: 1.0,
            ..*config
        };
        Ok(run(initial, grid, params, &cfg, &SampleSpec::every(config.t_end.max(f64::MIN_POSITIVE)))?.final_state)
    };
    let reference = solve(reference_dt)?;
    dts.par_iter()
        .map(|&dt| Ok((dt, state_distance(&solve(dt)?, &reference))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eta: f64,
    pub times: Vec<f64>,
    /// `||du||^2 + ||dv||^2 + dR^2` at each time.
    pub phi: Vec<f64>,
    pub max_ratio: f64,
}

/// `||u1 - u2||^2 + ||1/rho1 - 1/rho2||^2 + (R1 - R2)^2`.
pub fn separation(a: &State, b: &State, grid: &Grid) -> f64 {
    nodal_norm2(&diff(&a.u, &b.u), grid, grid.k()) + cell_norm2(&diff(&a.v, &b.v), grid, grid.k()) + (a.radius - b.radius).powi(2)
}

/// Runs `initial` and `initial + eta * pulse` side by side and tracks their
/// separation at the record cadence of `sample`.
pub fn perturbation_stability(
    initial: &State,
    grid: &Grid,
    params: &Parameters,
    config: &IntegratorConfig,
    cadence: f64,
    eta: f64,
    perturbation: &InitialDataSpec,
) -> Result<StabilityReport> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig(format!("perturbation size {eta} must be non-negative")));
    }
    let shape = make_initial_data(grid, perturbation)?;
    let mut perturbed = initial.clone();
    for (u, h) in perturbed.u.iter_mut().zip(&shape.u) {
        *u += eta * h;
    }
    let sample = SampleSpec::every(cadence).with_states();
    let pair: Vec<Trajectory> = [initial, &perturbed]
        .par_iter()
        .map(|s| run(s, grid, params, config, &sample))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = pair[0].records.iter().map(|r| r.t).collect();
    let phi: Vec<f64> = pair[0]
        .states
        .iter()
        .zip(&pair[1].states)
        .map(|(a, b)| separation(a, b, grid))
        .collect();
    let max_ratio = if phi[0] > 0.0 {
        phi.iter().fold(0.0f64, |m, p| m.max(p / phi[0]))
    } else {
        0.0
    };
    Ok(StabilityReport {
        eta,
        times,
        phi,
        max_ratio,
    })
}
