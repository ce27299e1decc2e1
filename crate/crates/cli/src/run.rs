//! Command execution and run-directory output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use thinfilm::classify::{self, Confirmation, SweepPlan, VerdictRow, SWEEP_HEADER};
use thinfilm::evolve::{self, InitialSpec, RunRecord, Termination};
use thinfilm::sharp::SharpConstants;
use thinfilm::steady::{self, ValidationTolerances};
use thinfilm::{io, Field64, Grid64, ModelParams64};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

const PROFILE_TOL: f64 = 1e-12;

/// Output directory of one run; tracks the files written into it.
pub struct RunDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl RunDir {
    /// Creates `root`, refusing a non-empty directory unless `overwrite`.
    pub fn create(root: &Path, overwrite: bool) -> Result<Self, CliError> {
        let ctx = |what: &str| format!("{what} {}", root.display());
        if root.exists() {
            let mut entries = fs::read_dir(root).map_err(|e| CliError::io(ctx("reading"), e))?;
            if entries.next().is_some() {
                if !overwrite {
                    return Err(CliError::OutputExists(root.to_path_buf()));
                }
                let snaps = root.join("snapshots");
                if snaps.is_dir() {
                    for entry in fs::read_dir(&snaps).map_err(|e| CliError::io(ctx("reading"), e))? {
                        let path = entry.map_err(|e| CliError::io(ctx("reading"), e))?.path();
                        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                        if name.starts_with("snap_") && name.ends_with(".csv") {
                            fs::remove_file(&path).map_err(|e| CliError::io(format!("removing {}", path.display()), e))?;
                        }
                    }
                }
            }
        }
        fs::create_dir_all(root).map_err(|e| CliError::io(ctx("creating"), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("payloads serialize") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.record(path);
        Ok(())
    }

    fn relative(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.strip_prefix(&self.root).unwrap_or(p).display().to_string())
            .collect()
    }
}

/// Executes `cfg`, writing outputs and `manifest.json` into its output directory.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut dir = RunDir::create(&cfg.output_dir, cfg.overwrite)?;
    let result = match cfg.command {
        Command::Constants => constants(cfg, &mut dir),
        Command::Steady => steady_cmd(cfg, &mut dir),
        Command::Evolve => evolve_cmd(cfg, &mut dir),
        Command::Classify => classify_cmd(cfg, &mut dir),
        Command::Sweep => sweep_cmd(cfg, &mut dir),
    };
    let manifest = json!({
        "command": cfg.command,
        "config": cfg,
        "versions": {
            "thinfilm": env!("CARGO_PKG_VERSION"),
        },
        "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "outputs": dir.relative(),
        "status": match &result {
            Ok(()) => "ok".to_string(),
            Err(e) => e.to_string(),
        },
    });
    dir.write_json("manifest.json", &manifest)?;
    result
}

fn params(cfg: &RunConfig) -> Result<ModelParams64, CliError> {
    Ok(ModelParams64::new(cfg.params.m, cfg.params.mass)?)
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("payloads serialize"));
}

fn constants(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let report = SharpConstants::new(cfg.params.m, Some(cfg.params.mass))?.report();
    dir.write_json("constants.json", &report)?;
    print_json(&report);
    Ok(())
}

fn steady_cmd(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let m = cfg.params.m;
    let profile = match cfg.params.height {
        Some(h) => steady::profile_from_height(m, h, PROFILE_TOL)?,
        None => steady::solve_for_mass(m, cfg.params.mass, PROFILE_TOL)?,
    };
    let half = cfg
        .grid
        .half_width
        .unwrap_or(steady::DEFAULT_MARGIN * profile.half_width);
    let grid = Grid64::centered(half, cfg.grid.n, cfg.solver.bc)?;
    let samples = profile.sample(&grid);
    let profile = profile.with_samples(samples);
    let report = steady::validate(&profile, ValidationTolerances::default())?;

    let csv = dir.path("profile.csv");
    io::write_snapshot(&csv, &profile.samples, m)?;
    dir.record(csv);
    dir.write_json("validation.json", &report)?;
    print_json(&json!({
        "m": m,
        "h": profile.h,
        "mass": profile.mass,
        "half_width": profile.half_width,
        "norm_m1": profile.norm_m1,
        "validation_pass": report.pass,
    }));
    if report.pass {
        Ok(())
    } else {
        Err(CliError::RunFailed("steady-state validation failed, see validation.json".into()))
    }
}

/// Initial field for `evolve` and `classify`, on a box sized from the data
/// unless `grid.half_width` is given.
fn initial_field(cfg: &RunConfig, params: &ModelParams64) -> Result<Field64, CliError> {
    let t_end = cfg.solver.t_end;
    let half = match (&cfg.initial, cfg.grid.half_width) {
        (_, Some(x)) => x,
        (InitialSpec::DilatedSteady { lambda, height }, None) => {
            classify::auto_half_width(params, *lambda, *height, t_end)?
        }
        (InitialSpec::Gaussian { mass, sigma }, None) => (evolve::SUPPORT_MARGIN * 3.0 * sigma)
            .max(classify::SPREADING_SLACK * classify::spreading_front(*mass, t_end)),
        (InitialSpec::FromFile { .. }, None) => 1.0,
    };
    let grid = Grid64::centered(half, cfg.grid.n, cfg.solver.bc)?;
    Ok(evolve::prepare_initial(&cfg.initial, params, &grid)?)
}

fn finish_run(dir: &mut RunDir, record: &RunRecord<f64>) -> Result<(), CliError> {
    for path in io::write_run(&dir.root, record)? {
        dir.record(path);
    }
    if record.termination == Termination::NumericalFailure {
        return Err(CliError::RunFailed(
            record.failure.clone().unwrap_or_else(|| "non-finite state".into()),
        ));
    }
    Ok(())
}

fn evolve_cmd(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let params = params(cfg)?;
    let u0 = initial_field(cfg, &params)?;
    let record = evolve::evolve(&u0, &params, &cfg.solver)?;
    print_json(&io::RunResult::of(&record));
    finish_run(dir, &record)
}

fn classify_cmd(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let params = params(cfg)?;
    let (lambda, confirmation): (f64, Confirmation<f64>) = match cfg.initial {
        InitialSpec::DilatedSteady { lambda, height: None } => (
            lambda,
            classify::confirm_dilation(&params, lambda, cfg.grid.n, cfg.grid.half_width, &cfg.solver)?,
        ),
        _ => {
            let u0 = initial_field(cfg, &params)?;
            (f64::NAN, classify::confirm(&u0, &params, &cfg.solver)?)
        }
    };
    let row = VerdictRow::new(params.m(), lambda, &confirmation.verdict);
    dir.write_json("verdict.json", &row)?;
    print_json(&row);
    finish_run(dir, &confirmation.record)
}

fn sweep_cmd(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let plan = SweepPlan {
        m_list: cfg.sweep.m_list.clone(),
        lambda_list: cfg.sweep.lambda_list.clone(),
        mass: cfg.params.mass,
        n: cfg.grid.n,
        half_width: cfg.grid.half_width,
        config: cfg.solver.clone(),
    };
    let path = dir.path("sweep.csv");
    let file = File::create(&path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| thinfilm::Error::Io(e);
    writeln!(out, "{SWEEP_HEADER}").map_err(io_err)?;
    out.flush().map_err(io_err)?;
    dir.record(path);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::config("jobs", e.to_string()))?;
    let rows = pool.install(|| {
        classify::sweep(&plan, |row| {
            writeln!(out, "{}", row.csv_line())?;
            out.flush()?;
            Ok(())
        })
    })?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let agreed = rows.iter().filter(|r| r.agreement == Some(true)).count();
    print_json(&json!({ "cells": rows.len(), "agreement": agreed, "errors": failed }));
    Ok(())
}
