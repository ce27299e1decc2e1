//! Run configuration: defaults, a JSON file on top, then flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use thinfilm::evolve::{InitialSpec, SolverConfig};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Constants,
    Steady,
    Evolve,
    Classify,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSpec {
    pub m: f64,
    pub mass: f64,
    /// Profile height for `steady`; required at `m = 3`.
    pub height: Option<f64>,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            m: 4.0,
            mass: 1.0,
            height: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n: usize,
    /// `None` sizes the box from the initial data.
    pub half_width: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 1024,
            half_width: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub m_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            m_list: vec![4.0],
            lambda_list: vec![0.8, 0.9, 1.1, 1.2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Command,
    pub params: ParamsSpec,
    pub grid: GridSpec,
    pub solver: SolverConfig<f64>,
    pub initial: InitialSpec<f64>,
    pub sweep: SweepSpec,
    pub output_dir: PathBuf,
    /// Recorded for reproducibility; every command is deterministic.
    pub seed: u64,
    /// Sweep worker threads; `0` uses all cores.
    pub jobs: usize,
    /// Allow writing into a non-empty output directory.
    pub overwrite: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Constants,
            params: ParamsSpec::default(),
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            initial: InitialSpec::DilatedSteady {
                lambda: 1.0,
                height: None,
            },
            sweep: SweepSpec::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            jobs: 0,
            overwrite: false,
        }
    }
}

/// Merges `over` into `base`. Objects merge key by key unless their `kind`
/// tags differ, in which case `over` replaces `base` outright.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let retag = matches!((b.get("kind"), o.get("kind")), (Some(x), Some(y)) if x != y);
            if retag {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Parses a flag value as JSON, falling back to a plain string.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `path` (dotted) in `root`, creating objects on the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::config(path, "empty key segment"));
    }
    for (i, key) in keys.iter().enumerate() {
        let Value::Object(map) = cur else {
            return Err(CliError::config(keys[..i].join("."), "is not an object"));
        };
        if i + 1 == keys.len() {
            map.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = map
            .entry((*key).to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("path has at least one segment")
}

/// Builds the configuration: defaults, then `file`, then `overrides` as
/// `(dotted.key, value)` pairs in order.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig, CliError> {
    let mut tree = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("<file>", format!("{}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config("<file>", format!("{}: {e}", path.display())))?;
        if !value.is_object() {
            return Err(CliError::config("<file>", "top level must be a JSON object"));
        }
        merge(&mut tree, value);
    }
    for (key, value) in overrides {
        let mut patch = Value::Object(Map::new());
        set_path(&mut patch, key, value.clone())?;
        merge(&mut tree, patch);
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(tree).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(key, e.into_inner().to_string())
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let p = &cfg.params;
    if !(p.m > 0.0 && p.m.is_finite()) {
        return Err(CliError::config("params.m", "must be > 0"));
    }
    if !(p.mass > 0.0 && p.mass.is_finite()) {
        return Err(CliError::config("params.mass", "must be > 0"));
    }
    if let Some(h) = p.height {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::config("params.height", "must be > 0"));
        }
    }
    if cfg.grid.n < thinfilm::grid::MIN_POINTS {
        return Err(CliError::config(
            "grid.n",
            format!("needs at least {} points", thinfilm::grid::MIN_POINTS),
        ));
    }
    if let Some(x) = cfg.grid.half_width {
        if !(x > 0.0 && x.is_finite()) {
            return Err(CliError::config("grid.half_width", "must be > 0"));
        }
    }
    cfg.solver
        .validate()
        .map_err(|e| CliError::config("solver", e.to_string()))?;

    let critical = p.m == 3.0;
    const FAMILY: &str = "m = 3 is mass critical: steady states form a one-parameter family, \
                          every height giving mass M_c, so a height must be chosen";
    if critical && cfg.command == Command::Steady && p.height.is_none() {
        return Err(CliError::config("params.height", FAMILY));
    }
    let dilation_uses_mass = matches!(cfg.initial, InitialSpec::DilatedSteady { height: None, .. });
    if critical && matches!(cfg.command, Command::Evolve) && dilation_uses_mass {
        return Err(CliError::config("initial.height", FAMILY));
    }
    if matches!(cfg.command, Command::Classify | Command::Sweep) {
        let ms: Vec<f64> = match cfg.command {
            Command::Sweep => cfg.sweep.m_list.clone(),
            _ => vec![p.m],
        };
        if let Some(m) = ms.iter().find(|&&m| m <= 3.0) {
            let key = if cfg.command == Command::Sweep { "sweep.m_list" } else { "params.m" };
            return Err(CliError::config(key, format!("classification needs m > 3, got {m}")));
        }
    }
    Ok(())
}
