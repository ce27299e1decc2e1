//! Snapshot and series files.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! snapshot read back and written again is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{RunRecord, SeriesRow, Termination};
use crate::grid::{Boundary, Field, Grid};
use crate::num::Scalar;

pub const SERIES_HEADER: &str = "t,dt,mass,F,m2,norm_m1,grad_l2,fisher,u_max,u_min";

fn snapshot_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Snapshot {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn snapshot_string<T: Scalar>(f: &Field<T>, m: T) -> String {
    let mut s = String::with_capacity(f.len() * 40);
    writeln!(s, "# t={} m={}", f.time(), m).unwrap();
    s.push_str("x,u\n");
    for (i, &u) in f.values().iter().enumerate() {
        writeln!(s, "{},{}", f.grid().x(i), u).unwrap();
    }
    s
}

pub fn write_snapshot<T: Scalar>(path: &Path, f: &Field<T>, m: T) -> Result<()> {
    fs::write(path, snapshot_string(f, m))?;
    Ok(())
}

fn parse_num<T: Scalar>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| snapshot_error(path, format!("line {line}: cannot parse {s:?}")))
}

/// Parses snapshot text; `path` is only used in error messages.
pub fn parse_snapshot<T: Scalar>(text: &str, path: &Path, boundary: Boundary) -> Result<(Field<T>, T)> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| snapshot_error(path, "empty file"))?;
    let rest = head
        .strip_prefix("# ")
        .ok_or_else(|| snapshot_error(path, "missing '# t=<time> m=<m>' header"))?;
    let mut t = None;
    let mut m = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("t=") {
            t = Some(parse_num::<T>(path, 1, v)?);
        } else if let Some(v) = tok.strip_prefix("m=") {
            m = Some(parse_num::<T>(path, 1, v)?);
        }
    }
    let (t, m) = match (t, m) {
        (Some(t), Some(m)) => (t, m),
        _ => return Err(snapshot_error(path, "header needs both t= and m=")),
    };
    match lines.next() {
        Some((_, l)) if l.trim() == "x,u" => {}
        _ => return Err(snapshot_error(path, "missing 'x,u' column header")),
    }
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| snapshot_error(path, format!("line {}: expected 'x,u'", k + 1)))?;
        xs.push(parse_num::<T>(path, k + 1, a)?);
        us.push(parse_num::<T>(path, k + 1, b)?);
    }
    if xs.len() < 2 {
        return Err(snapshot_error(path, "fewer than two rows"));
    }
    let grid = Grid::new(xs[0], xs[xs.len() - 1], xs.len(), boundary)?;
    let tol = grid.dx() * T::lit(1e-6);
    if let Some(i) = (0..xs.len()).find(|&i| (xs[i] - grid.x(i)).abs() > tol) {
        return Err(snapshot_error(path, format!("row {i}: x is not on a uniform grid")));
    }
    Ok((Field::new(grid, us, t)?, m))
}

/// Reads a snapshot; returns the field and the `m` from its header.
pub fn read_snapshot<T: Scalar>(path: &Path, boundary: Boundary) -> Result<(Field<T>, T)> {
    let text = fs::read_to_string(path).map_err(|e| snapshot_error(path, e.to_string()))?;
    parse_snapshot(&text, path, boundary)
}

pub fn series_string<T: Scalar>(rows: &[SeriesRow<T>]) -> String {
    let mut s = String::with_capacity(rows.len() * 200 + 64);
    s.push_str(SERIES_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t, r.dt, r.mass, r.free_energy, r.m2, r.norm_m1, r.grad_l2, r.fisher, r.u_max, r.u_min
        )
        .unwrap();
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub termination: Termination,
    pub t_w_estimate: Option<f64>,
    pub t_final: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub epsilon: f64,
    pub min_value: f64,
    pub undershoot_flagged: bool,
    pub edge_ratio: f64,
    pub failure: Option<String>,
}

impl RunResult {
    pub fn of<T: Scalar>(r: &RunRecord<T>) -> Self {
        Self {
            termination: r.termination,
            t_w_estimate: r.t_w_estimate.map(Scalar::as_f64),
            t_final: r.final_state().time().as_f64(),
            steps_accepted: r.steps_accepted,
            steps_rejected: r.steps_rejected,
            epsilon: r.config.epsilon.map(Scalar::as_f64).unwrap_or(0.0),
            min_value: r.min_value.as_f64(),
            undershoot_flagged: r.undershoot_flagged,
            edge_ratio: r.edge_ratio.as_f64(),
            failure: r.failure.clone(),
        }
    }
}

/// Writes `series.csv`, `result.json` and `snapshots/snap_NNNN.csv` into `dir`.
pub fn write_run<T: Scalar>(dir: &Path, record: &RunRecord<T>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("snapshots"))?;
    let mut written = Vec::new();
    let series = dir.join("series.csv");
    fs::write(&series, series_string(&record.series))?;
    written.push(series);
    let result = dir.join("result.json");
    fs::write(&result, serde_json::to_string_pretty(&RunResult::of(record))? + "\n")?;
    written.push(result);
    for (k, snap) in record.snapshots.iter().enumerate() {
        let p = dir.join("snapshots").join(format!("snap_{k:04}.csv"));
        write_snapshot(&p, snap, record.params.m())?;
        written.push(p);
    }
    Ok(written)
}
