//! The four commands and the files they write.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use viscobubble::diagnostics::{fit_decay, DecayOutcome, DiagnosticsRecord};
use viscobubble::harness::{refinement_study, truncation_sweep, Order, RefinementSpec};
use viscobubble::identity;
use viscobubble::integrator::HistoryPoint;
use viscobubble::oracle::compare_history;
use viscobubble::{make_initial_data, radii, Error, Grid, Parameters, SampleSpec, State};

use crate::config::{KeyValues, RunConfig, SweepConfig};
use crate::CliError;

/// Step used for the numerical time derivative in the identity probe.
const PROBE_STEP: f64 = 1e-5;

const HISTORY_HEADER: &str = "t,R,boundary_density";
const SNAPSHOT_HEADER: &str = "x,r,u,rho";
const CONVERGENCE_HEADER: &str =
    "kind,k_small,k_large,n,dx,dt,u_diff,v_diff,r_diff,return_time,pre_return_diff,order_u,order_v,order_r";

fn runtime(e: Error) -> CliError {
    match e {
        Error::StepFailure { .. } | Error::NonPositiveBracket { .. } | Error::SweepRun { .. } | Error::Other(_) => {
            CliError::Runtime(e.to_string())
        }
        _ => CliError::Input(e.to_string()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn out_dir(configured: &Path, over: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = over.map_or_else(|| configured.to_path_buf(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

/// `%.{p-1}e`, i.e. `p` significant digits.
fn num(x: f64, precision: usize) -> String {
    format!("{:.*e}", precision - 1, x)
}

fn timeseries_csv(records: &[DiagnosticsRecord], precision: usize) -> String {
    let mut s = String::from(DiagnosticsRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv_row(precision));
        s.push('\n');
    }
    s
}

/// Nodes carry `r` and `u`, cells carry `rho` at their centres.
fn snapshot_csv(state: &State, grid: &Grid, precision: usize) -> String {
    let geom = radii(state, grid);
    let mut s = String::from(SNAPSHOT_HEADER);
    s.push('\n');
    for j in 0..=state.n() {
        let (x, r, u) = (grid.node(j), geom.r[j], state.u[j]);
        s.push_str(&format!("{},{},{},\n", num(x, precision), num(r, precision), num(u, precision)));
        if j < state.n() {
            let (xc, rho) = (grid.cell_center(j), state.rho(j));
            s.push_str(&format!("{},,,{}\n", num(xc, precision), num(rho, precision)));
        }
    }
    s
}

fn history_csv(history: &[HistoryPoint], precision: usize) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for h in history {
        s.push_str(&format!(
            "{},{},{}\n",
            num(h.t, precision),
            num(h.radius, precision),
            num(h.boundary_density, precision)
        ));
    }
    s
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t}.csv")
}

fn fit_json(samples: &[(f64, f64)], window: (f64, f64)) -> Result<Value, CliError> {
    let outcome = fit_decay(samples, window).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(match outcome {
        DecayOutcome::Fit(f) => json!({
            "window": [f.window.0, f.window.1],
            "slope": f.slope,
            "amplitude": f.amplitude,
            "sup_envelope": f.sup_envelope,
            "points": f.points,
            "equilibrium": false,
        }),
        DecayOutcome::Equilibrium => json!({
            "window": [window.0, window.1],
            "slope": Value::Null,
            "sup_envelope": 0.0,
            "equilibrium": true,
        }),
    })
}

pub fn cmd_run(config: &Path, over: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::from_kv(&KeyValues::read(config)?)?;
    let dir = out_dir(&cfg.output.dir, over)?;
    let precision = cfg.output.precision;
    let initial = make_initial_data(&cfg.grid, &cfg.initial).map_err(runtime)?;

    let mut snapshot_times = cfg.output.snapshots.clone();
    snapshot_times.push(cfg.output.e2_probe_time);
    let sample = SampleSpec {
        cadence: cfg.output.cadence,
        snapshot_times,
        keep_states: false,
    };
    let traj = viscobubble::run(&initial, &cfg.grid, &cfg.params, &cfg.integrator, &sample).map_err(runtime)?;
    let snapshot_at = |t: f64| {
        traj.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * (1.0 + t.abs()))
    };

    write(&dir.join("timeseries.csv"), &timeseries_csv(&traj.records, precision))?;
    write(&dir.join("history.csv"), &history_csv(&traj.history, precision))?;
    for &t in &cfg.output.snapshots {
        if let Some(s) = snapshot_at(t) {
            write(&dir.join(snapshot_name(t)), &snapshot_csv(s, &cfg.grid, precision))?;
        }
    }

    let first = traj.records.first().expect("run records the initial state");
    let last = traj.records.last().expect("run records the final state");
    let max_residual = traj
        .records
        .iter()
        .map(|r| r.energy_residual.abs())
        .fold(0.0, f64::max);
    let mut summary = Map::new();
    summary.insert("params".into(), json!(cfg.params));
    summary.insert(
        "grid".into(),
        json!({ "k": cfg.grid.k(), "n": cfg.grid.n(), "dx": cfg.grid.dx() }),
    );
    summary.insert("initial".into(), json!(cfg.initial));
    summary.insert("integrator".into(), json!(cfg.integrator));
    summary.insert("final_time".into(), json!(traj.final_state.t));
    summary.insert("steps".into(), json!(traj.steps));
    summary.insert("final_Q".into(), json!(last.q));
    summary.insert("final_R".into(), json!(last.radius));
    summary.insert(
        "energy".into(),
        json!({
            "E0_initial": first.e0,
            "max_residual": max_residual,
            "max_relative_residual": traj.max_relative_residual(),
        }),
    );
    if let Some(window) = cfg.output.fit_window {
        summary.insert("fit".into(), fit_json(&traj.q_series(), window)?);
    }
    match compare_history(&traj.history, &cfg.params) {
        Ok(report) => {
            summary.insert("oracle".into(), json!({ "sup_diff": report.sup_diff }));
        }
        Err(e) => eprintln!("warning: boundary oracle skipped: {e}"),
    }
    if let Some(s) = snapshot_at(cfg.output.e2_probe_time) {
        let report = identity::probe(s, &cfg.grid, &cfg.params, PROBE_STEP).map_err(runtime)?;
        summary.insert(
            "e2_identity".into(),
            json!({
                "t": report.t,
                "consistent": report.consistent,
                "residual_var_a": report.residual_var_a,
                "residual_var_b": report.residual_var_b,
                "scale": report.scale,
                "dE2_dt_var_a": report.de2_dt_var_a,
                "dE2_dt_var_b": report.de2_dt_var_b,
                "dissipation": report.dissipation,
                "rhs": report.rhs,
            }),
        );
    }
    write_json(&dir.join("summary.json"), &Value::Object(summary))
}

/// Reads the `t` and `Q` columns of a timeseries.
fn read_q_series(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Input(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Input(format!("{}: missing column `{name}`", path.display())))
    };
    let (it, iq) = (column("t")?, column("Q")?);
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(CliError::Input(format!(
                "{} line {}: expected {} fields, found {}",
                path.display(),
                lineno + 2,
                header.len(),
                fields.len()
            )));
        }
        let parse = |i: usize| {
            fields[i].trim().parse::<f64>().map_err(|_| {
                CliError::Input(format!("{} line {}: `{}` is not a number", path.display(), lineno + 2, fields[i]))
            })
        };
        samples.push((parse(it)?, parse(iq)?));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(CliError::Input(format!("{}: times must increase", path.display())));
    }
    Ok(samples)
}

pub fn cmd_decay_fit(csv: &Path, window: (f64, f64), summary: Option<&Path>) -> Result<(), CliError> {
    let samples = read_q_series(csv)?;
    let fit = fit_json(&samples, window)?;
    match fit["slope"].as_f64() {
        Some(slope) => println!("slope = {slope:.17e}"),
        None => println!("slope = none (Q vanishes on the window)"),
    }
    println!("sup_envelope = {:.17e}", fit["sup_envelope"].as_f64().unwrap_or(0.0));

    let path = summary.map_or_else(
        || csv.parent().unwrap_or(Path::new(".")).join("summary.json"),
        Path::to_path_buf,
    );
    let mut doc = if path.exists() { read_json(&path)? } else { json!({}) };
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| CliError::Input(format!("{}: not a JSON object", path.display())))?;
    obj.insert("fit".into(), fit);
    write_json(&path, &doc)
}

fn read_history(path: &Path) -> Result<Vec<HistoryPoint>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("missing history {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HISTORY_HEADER) {
        return Err(CliError::Input(format!("{}: expected header `{HISTORY_HEADER}`", path.display())));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Input(format!("{} line {}: malformed row", path.display(), i + 2)))?;
            match v.as_slice() {
                [t, radius, boundary_density] => Ok(HistoryPoint {
                    t: *t,
                    radius: *radius,
                    boundary_density: *boundary_density,
                }),
                _ => Err(CliError::Input(format!("{} line {}: expected 3 fields", path.display(), i + 2))),
            }
        })
        .collect()
}

pub fn cmd_oracle_check(dir: &Path) -> Result<(), CliError> {
    let history = read_history(&dir.join("history.csv"))?;
    let summary = read_json(&dir.join("summary.json"))?;
    let params: Parameters = serde_json::from_value(summary["params"].clone())
        .map_err(|e| CliError::Input(format!("summary.json params: {e}")))?;
    params.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let report = compare_history(&history, &params).map_err(runtime)?;
    let table: Vec<Value> = history
        .iter()
        .zip(&report.oracle)
        .zip(&report.diff)
        .map(|((h, o), d)| json!({ "t": h.t, "R": h.radius, "simulated": h.boundary_density, "oracle": o, "diff": d }))
        .collect();
    println!("sup_diff = {:.17e}", report.sup_diff);
    write_json(
        &dir.join("oracle_report.json"),
        &json!({ "sup_diff": report.sup_diff, "points": table.len(), "table": table }),
    )
}

fn order_field(o: &Option<Order>) -> String {
    o.as_ref().map_or_else(String::new, |o| o.to_string())
}

pub fn cmd_sweep(config: &Path, over: Option<&Path>) -> Result<(), CliError> {
    let cfg = SweepConfig::from_kv(&KeyValues::read(config)?)?;
    let dir = out_dir(&cfg.dir, over)?;
    let p = cfg.precision;
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    if let Some(spec) = &cfg.sweep {
        let table = truncation_sweep(spec, &cfg.params, &cfg.integrator).map_err(runtime)?;
        for r in &table.rows {
            s.push_str(&format!(
                "truncation,{},{},,{},{},{},{},{},{},{},,,\n",
                num(r.k_small, p),
                num(r.k_large, p),
                num(spec.dx, p),
                num(table.dt, p),
                num(r.u_diff, p),
                num(r.v_diff, p),
                num(r.r_diff, p),
                num(r.return_time, p),
                num(r.pre_return_diff, p),
            ));
        }
    }
    if let Some((k, levels, t_obs)) = &cfg.refinement {
        let spec = RefinementSpec {
            base: cfg.initial,
            k: *k,
            levels: levels.clone(),
            t_obs: *t_obs,
        };
        let rows = refinement_study(&spec, &cfg.params, &cfg.integrator).map_err(runtime)?;
        for r in &rows {
            s.push_str(&format!(
                "refinement,,,{},{},{},{},{},{},,,{},{},{}\n",
                r.n,
                num(r.dx, p),
                num(r.dt, p),
                num(r.err_u, p),
                num(r.err_v, p),
                num(r.err_r, p),
                order_field(&r.order_u),
                order_field(&r.order_v),
                order_field(&r.order_r),
            ));
        }
    }
    write(&dir.join("convergence.csv"), &s)
}
