//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! params.Ca = 1
//! grid.n = 256
//! output.snapshots = 0, 10, 50
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use viscobubble::harness::SweepSpec;
use viscobubble::{Family, Grid, InitialDataSpec, IntegratorConfig, Parameters, Scheme};

use crate::CliError;

/// Every key the parser accepts.
const KNOWN_KEYS: &[&str] = &[
    "params.Ca",
    "params.We",
    "params.mu",
    "params.gamma",
    "params.gamma0",
    "grid.k",
    "grid.n",
    "initial.family",
    "initial.amplitude",
    "initial.support",
    "initial.shape",
    "integrator.scheme",
    "integrator.cfl",
    "integrator.dt_max",
    "integrator.t_end",
    "integrator.theta",
    "output.cadence",
    "output.snapshots",
    "output.dir",
    "output.precision",
    "output.fit_window",
    "output.e2_probe_time",
    "sweep.ks",
    "sweep.window",
    "sweep.t_obs",
    "sweep.dx",
    "sweep.samples",
    "sweep.levels",
];

#[derive(Debug, Clone, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Input(format!("line {}: expected `key = value`, found `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Input(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Input(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::Input(format!("missing required key `{key}`")))
    }

    fn number(key: &str, value: &str) -> Result<f64, CliError> {
        value
            .parse::<f64>()
            .map_err(|_| CliError::Input(format!("key `{key}`: `{value}` is not a number")))
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        Self::number(key, self.require(key)?)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.raw(key).map_or(Ok(default), |v| Self::number(key, v))
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| CliError::Input(format!("key `{key}`: `{v}` is not a non-negative integer")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some("") => Ok(Vec::new()),
            Some(v) => v.split(',').map(|x| Self::number(key, x.trim())).collect(),
        }
    }
}

/// Wraps a core validation error so that the message names the key.
fn keyed<T>(key: &str, r: viscobubble::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(format!("key `{key}`: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub cadence: f64,
    pub snapshots: Vec<f64>,
    pub dir: PathBuf,
    pub precision: usize,
    pub fit_window: Option<(f64, f64)>,
    pub e2_probe_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Parameters,
    pub grid: Grid,
    pub initial: InitialDataSpec,
    pub integrator: IntegratorConfig,
    pub output: OutputConfig,
}

fn parse_params(kv: &KeyValues) -> Result<Parameters, CliError> {
    let p = Parameters {
        ca: kv.f64("params.Ca")?,
        we: kv.f64("params.We")?,
        mu: kv.f64("params.mu")?,
        gamma: kv.f64("params.gamma")?,
        gamma0: kv.f64("params.gamma0")?,
    };
    p.validate().map_err(|e| match e {
        viscobubble::Error::InvalidParameter { name, .. } => {
            CliError::Input(format!("key `params.{name}`: {e}"))
        }
        other => CliError::Input(other.to_string()),
    })?;
    Ok(p)
}

fn parse_initial(kv: &KeyValues, k: f64) -> Result<InitialDataSpec, CliError> {
    let family: Family = keyed("initial.family", kv.require("initial.family")?.parse())?;
    let default_shape = match family {
        Family::VelocityPulse => 2.0,
        _ => 1.0,
    };
    Ok(InitialDataSpec {
        family,
        amplitude: kv.f64_or("initial.amplitude", 0.0)?,
        support: kv.f64_or("initial.support", k)?,
        shape: kv.f64_or("initial.shape", default_shape)?,
    })
}

fn parse_integrator(kv: &KeyValues) -> Result<IntegratorConfig, CliError> {
    let scheme: Scheme = match kv.raw("integrator.scheme") {
        Some(s) => keyed("integrator.scheme", s.parse())?,
        None => Scheme::SemiImplicit,
    };
    let cfg = IntegratorConfig {
        scheme,
        cfl: kv.f64_or("integrator.cfl", 0.5)?,
        dt_max: kv.f64_or("integrator.dt_max", 1.0)?,
        t_end: kv.f64("integrator.t_end")?,
        theta: kv.f64_or("integrator.theta", 0.5)?,
    };
    if let Err(e) = cfg.validate() {
        let msg = e.to_string();
        let key = ["cfl", "dt_max", "t_end", "theta"]
            .into_iter()
            .find(|k| msg.contains(&format!("{k} =")))
            .unwrap_or("scheme");
        return Err(CliError::Input(format!("key `integrator.{key}`: {msg}")));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self, CliError> {
        let params = parse_params(kv)?;
        let grid = keyed("grid.n", Grid::new(kv.f64("grid.k")?, kv.usize("grid.n")?))?;
        let initial = parse_initial(kv, grid.k())?;
        keyed("initial", initial.validate(&grid))?;
        let integrator = parse_integrator(kv)?;

        let cadence = kv.f64_or("output.cadence", (integrator.t_end / 100.0).max(1e-3))?;
        if !(cadence > 0.0 && cadence.is_finite()) {
            return Err(CliError::Input(format!("key `output.cadence`: {cadence} must be positive")));
        }
        let snapshots = kv.list("output.snapshots")?;
        if snapshots.iter().any(|t| !(*t >= 0.0)) {
            return Err(CliError::Input("key `output.snapshots`: times must be non-negative".into()));
        }
        let precision = match kv.raw("output.precision") {
            None => 17,
            Some(v) => v
                .parse::<usize>()
                .ok()
                .filter(|p| (1..=17).contains(p))
                .ok_or_else(|| CliError::Input(format!("key `output.precision`: `{v}` must be an integer in 1..=17")))?,
        };
        let fit_window = match kv.list("output.fit_window")?.as_slice() {
            [] => None,
            [lo, hi] if 0.0 <= *lo && lo < hi && *hi <= integrator.t_end => Some((*lo, *hi)),
            [_, _] => {
                return Err(CliError::Input(
                    "key `output.fit_window`: need 0 <= lo < hi <= integrator.t_end".into(),
                ))
            }
            _ => return Err(CliError::Input("key `output.fit_window`: expected `lo, hi`".into())),
        };
        let e2_probe_time = kv.f64_or("output.e2_probe_time", 0.0)?;
        if !(e2_probe_time >= 0.0 && e2_probe_time <= integrator.t_end) {
            return Err(CliError::Input(format!(
                "key `output.e2_probe_time`: {e2_probe_time} must lie in [0, t_end]"
            )));
        }
        Ok(Self {
            params,
            grid,
            initial,
            integrator,
            output: OutputConfig {
                cadence,
                snapshots,
                dir: PathBuf::from(kv.raw("output.dir").unwrap_or(".")),
                precision,
                fit_window,
                e2_probe_time,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub params: Parameters,
    pub integrator: IntegratorConfig,
    pub sweep: Option<SweepSpec>,
    /// Refinement study on `[0, grid.k]` with these cell counts.
    pub refinement: Option<(f64, Vec<usize>, f64)>,
    pub initial: InitialDataSpec,
    pub dir: PathBuf,
    pub precision: usize,
}

impl SweepConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self, CliError> {
        let params = parse_params(kv)?;
        let integrator = parse_integrator(kv)?;
        let ks = kv.list("sweep.ks")?;
        let k_ref = kv.f64_or("grid.k", ks.first().copied().unwrap_or(1.0))?;
        let initial = parse_initial(kv, k_ref)?;
        let t_obs = kv.f64_or("sweep.t_obs", integrator.t_end)?;
        let sweep = if ks.is_empty() {
            None
        } else {
            let spec = SweepSpec {
                base: initial,
                ks,
                window: kv.f64("sweep.window")?,
                t_obs,
                dx: kv.f64("sweep.dx")?,
                samples: match kv.raw("sweep.samples") {
                    Some(_) => kv.usize("sweep.samples")?,
                    None => 20,
                },
            };
            keyed("sweep", spec.validate())?;
            Some(spec)
        };
        let levels: Vec<usize> = kv
            .list("sweep.levels")?
            .iter()
            .map(|x| {
                if *x >= 4.0 && x.fract() == 0.0 {
                    Ok(*x as usize)
                } else {
                    Err(CliError::Input(format!("key `sweep.levels`: `{x}` is not a cell count")))
                }
            })
            .collect::<Result<_, _>>()?;
        let refinement = if levels.is_empty() {
            None
        } else {
            Some((kv.f64("grid.k")?, levels, t_obs))
        };
        if sweep.is_none() && refinement.is_none() {
            return Err(CliError::Input("sweep config needs `sweep.ks` or `sweep.levels`".into()));
        }
        let precision = match kv.raw("output.precision") {
            None => 17,
            Some(_) => kv.usize("output.precision")?.clamp(1, 17),
        };
        Ok(Self {
            params,
            integrator,
            sweep,
            refinement,
            initial,
            dir: PathBuf::from(kv.raw("output.dir").unwrap_or(".")),
            precision,
        })
    }
}
