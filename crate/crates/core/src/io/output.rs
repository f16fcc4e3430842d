//! Text formats written and read back by the run drivers.
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so files round-trip exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{NsacError, Result};
use crate::representation::ReprResult;
use crate::state::{FieldState, Grid};
use crate::timestepper::History;

pub const SERIES_HEADER: &str = "t,mass,total_energy,lyapunov,W,theta_bar,min_v,max_v,min_theta,max_theta,min_chi,max_chi,sobolev_E,repr_residual";
pub const SNAPSHOT_HEADER: &str = "x,v,u,chi,theta,mu";
pub const REPR_HEADER: &str = "t,x,v_sim,v_repr,diff";

/// Shortest round-trip decimal; scientific notation outside a readable range.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| NsacError::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| NsacError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| NsacError::io(path, e))
}

pub fn series_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(256 * (records.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in records {
        let cols = [
            r.t,
            r.mass,
            r.total_energy,
            r.lyapunov,
            r.w,
            r.theta_bar,
            r.min_v,
            r.max_v,
            r.min_theta,
            r.max_theta,
            r.min_chi,
            r.max_chi,
            r.sobolev_e,
            r.repr_residual.unwrap_or(f64::NAN),
        ];
        let line: Vec<String> = cols.iter().map(|&c| fmt_f64(c)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_series_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    write_file(path, &series_csv(records))
}

/// Parses a series file; `NaN` in the last column means "not evaluated".
pub fn parse_series_csv(text: &str) -> std::result::Result<Vec<DiagnosticsRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SERIES_HEADER => {}
        Some(h) => return Err(format!("unexpected header '{h}'")),
        None => return Err("empty file".into()),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("row {}: {e}", i + 1))?;
        if vals.len() != 14 {
            return Err(format!("row {}: expected 14 columns, got {}", i + 1, vals.len()));
        }
        out.push(DiagnosticsRecord {
            t: vals[0],
            mass: vals[1],
            total_energy: vals[2],
            lyapunov: vals[3],
            w: vals[4],
            theta_bar: vals[5],
            min_v: vals[6],
            max_v: vals[7],
            min_theta: vals[8],
            max_theta: vals[9],
            min_chi: vals[10],
            max_chi: vals[11],
            sobolev_e: vals[12],
            repr_residual: if vals[13].is_nan() { None } else { Some(vals[13]) },
        });
    }
    Ok(out)
}

pub fn read_series_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    parse_series_csv(&read_file(path)?).map_err(|message| NsacError::Parse { path: path.into(), message })
}

pub fn write_snapshot_csv(path: &Path, grid: &Grid, state: &FieldState) -> Result<()> {
    grid.check_len(&state.v)?;
    let mut out = String::new();
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for (i, x) in grid.nodes().iter().enumerate() {
        let row = [*x, state.v[i], state.u[i], state.chi[i], state.theta[i], state.mu[i]];
        let cols: Vec<String> = row.iter().map(|&c| fmt_f64(c)).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn write_repr_csv(path: &Path, grid: &Grid, results: &[ReprResult]) -> Result<()> {
    let mut out = String::new();
    out.push_str(REPR_HEADER);
    out.push('\n');
    for r in results {
        for (i, x) in grid.nodes().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(*x),
                fmt_f64(r.v_sim[i]),
                fmt_f64(r.v_repr[i]),
                fmt_f64(r.v_repr[i] - r.v_sim[i])
            );
        }
    }
    write_file(path, &out)
}

/// Writes ordered `key=value` pairs, one per line.
pub fn write_key_values(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}={v}");
    }
    write_file(path, &out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_file(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| NsacError::Parse {
            path: path.into(),
            message: format!("line {}: expected key=value", i + 1),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn write_history(path: &Path, history: &History) -> Result<()> {
    write_file(path, &serde_json::to_string(history)?)
}

pub fn read_history(path: &Path) -> Result<History> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| NsacError::Parse { path: path.into(), message: e.to_string() })
}
