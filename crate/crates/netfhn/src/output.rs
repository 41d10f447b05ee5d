//! Deterministic output serialization: trajectory CSV, jump-event NDJSON,
//! check-report JSON, and eigenvalue CSV.
//!
//! All floating-point numbers are written with 17 significant digits, so a
//! fixed `(config, seed)` pair produces byte-identical files and a CSV
//! round-trip reproduces the in-memory values exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::mesh::{Mesh, StateVector};
use crate::spectral::SpectralDecomposition;
use crate::verify::CheckReport;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: &str = "t,dof_kind,edge_or_vertex_id,x_position_or_blank,value";

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV row per degree of freedom per recorded time: vertex rows first
/// (blank position), then interior edge rows with their x in (0, 1).
/// Identified endpoints appear once, as their vertex row.
pub fn trajectory_csv(mesh: &Mesh, traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    let cells = mesh.cells_per_edge();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let ts = fmt_float(*t);
        for i in 0..mesh.n_vertices() {
            let _ = writeln!(out, "{ts},vertex,{},,{}", i + 1, fmt_float(state[i]));
        }
        for j in 0..mesh.n_edges() {
            for k in 1..cells {
                let dof = mesh.node_index(j, k);
                let x = k as f64 / cells as f64;
                let _ = writeln!(
                    out,
                    "{ts},edge,{},{},{}",
                    j + 1,
                    fmt_float(x),
                    fmt_float(state[dof])
                );
            }
        }
    }
    out
}

/// Inverse of `trajectory_csv`: recovers recorded times and full state
/// vectors. Exact for files produced by this module.
pub fn parse_trajectory_csv(mesh: &Mesh, text: &str) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRAJECTORY_HEADER => {}
        other => {
            return Err(Error::Parameter(format!(
                "unexpected trajectory CSV header: {other:?}"
            )))
        }
    }
    let cells = mesh.cells_per_edge();
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<StateVector> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parameter(format!(
                "trajectory CSV line {}: expected 5 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Parameter(format!("trajectory CSV line {}: {e}", lineno + 2)))
        };
        let t = parse(fields[0])?;
        if times.last() != Some(&t) {
            times.push(t);
            states.push(mesh.zero_state());
        }
        let state = states.last_mut().expect("just pushed");
        let id: usize = fields[2]
            .parse()
            .map_err(|e| Error::Parameter(format!("trajectory CSV line {}: {e}", lineno + 2)))?;
        let value = parse(fields[4])?;
        match fields[1] {
            "vertex" => state[id - 1] = value,
            "edge" => {
                let x = parse(fields[3])?;
                let k = (x * cells as f64).round() as usize;
                state[mesh.node_index(id - 1, k)] = value;
            }
            other => {
                return Err(Error::Parameter(format!(
                    "trajectory CSV line {}: unknown dof_kind {other:?}",
                    lineno + 2
                )))
            }
        }
    }
    Ok((times, states))
}

/// One JSON object per line: the jump time and the vertex amplitude vector
/// actually injected into the state (noise matrix applied).
pub fn jumps_ndjson(traj: &Trajectory) -> String {
    let mut out = String::new();
    for (t, amplitudes) in &traj.jump_log {
        let amps: Vec<String> = amplitudes.iter().map(|&v| fmt_float(v)).collect();
        let _ = writeln!(
            out,
            "{{\"schema_version\":{SCHEMA_VERSION},\"t\":{},\"node_amplitudes\":[{}]}}",
            fmt_float(*t),
            amps.join(",")
        );
    }
    out
}

/// The machine-readable verification report.
pub fn report_json(reports: &[CheckReport]) -> Result<String> {
    let all_passed = reports.iter().all(|r| r.passed);
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "all_passed": all_passed,
        "checks": reports,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Eigenvalues of the generator, most slowly decaying first.
pub fn spectrum_csv(dec: &SpectralDecomposition) -> String {
    let mut out = String::from("index,lambda\n");
    for (i, lam) in dec.eigenvalues().iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, fmt_float(*lam));
    }
    out
}
