//! File formats: trajectory CSV (shared schema for simulator and solver
//! output so comparators are format-agnostic), binary spin-configuration
//! files, JSON reports, and a structural validator for the JSON manifests
//! documented in docs/manifest-schema.md.

use crate::kmc::Trajectory;
use crate::lattice::{LatticeError, SpinConfig};
use crate::pde::{DiscreteTrajectory, SpaceGrid};
use crate::thermo::DensityPair;
use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Column order of every trajectory CSV: time, cell index (site or grid
/// node), magnetization, concentration.
pub const CSV_HEADER: [&str; 4] = ["t", "cell", "m", "phi"];

/// Manifest schema identifiers (see docs/manifest-schema.md).
pub const SCHEMA_RUN: &str = "bwabc/run/1";
pub const SCHEMA_COMPARISON: &str = "bwabc/comparison/1";
pub const SCHEMA_LDP: &str = "bwabc/ldp/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("expected header t,cell,m,phi")]
    BadHeader,
    #[error("bad row: {0}")]
    BadRow(String),
    #[error("node count {0} does not fit a grid (need odd ≥ 3)")]
    BadNodeCount(usize),
}

/// Write time-stamped frames in the shared CSV schema. Values use the
/// shortest round-tripping decimal form, so reading back is exact.
pub fn write_frames_csv(
    path: &Path,
    times: &[f64],
    frames: &[Vec<DensityPair>],
) -> Result<(), IoError> {
    assert_eq!(times.len(), frames.len());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for (t, frame) in times.iter().zip(frames) {
        for (cell, rho) in frame.iter().enumerate() {
            w.write_record([
                t.to_string(),
                cell.to_string(),
                rho.m.to_string(),
                rho.phi.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read frames back: rows grouped by consecutive equal times, cell indices
/// checked to run 0..len within each block.
pub fn read_frames_csv(path: &Path) -> Result<(Vec<f64>, Vec<Vec<DensityPair>>), IoError> {
    let mut r = csv::Reader::from_path(path)?;
    {
        let headers = r.headers()?;
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(IoError::BadHeader);
        }
    }
    let mut times: Vec<f64> = Vec::new();
    let mut frames: Vec<Vec<DensityPair>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(IoError::BadRow(format!("{} fields", rec.len())));
        }
        let parse = |i: usize| -> Result<f64, IoError> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| IoError::BadRow(format!("field {}: {e}", CSV_HEADER[i])))
        };
        let t = parse(0)?;
        let cell: usize = rec[1]
            .parse()
            .map_err(|e| IoError::BadRow(format!("field cell: {e}")))?;
        let rho = DensityPair::new(parse(2)?, parse(3)?);
        if times.last() != Some(&t) {
            times.push(t);
            frames.push(Vec::new());
        }
        let frame = frames.last_mut().expect("just pushed");
        if cell != frame.len() {
            return Err(IoError::BadRow(format!(
                "cell {cell} out of order (expected {})",
                frame.len()
            )));
        }
        frame.push(rho);
    }
    if let Some(first) = frames.first() {
        if frames.iter().any(|f| f.len() != first.len()) {
            return Err(IoError::BadRow("ragged frame lengths".into()));
        }
    }
    Ok((times, frames))
}

pub fn write_kmc_csv(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    write_frames_csv(path, &traj.times, &traj.frames)
}

pub fn write_grid_csv(path: &Path, traj: &DiscreteTrajectory) -> Result<(), IoError> {
    write_frames_csv(path, &traj.times, &traj.fields)
}

/// Rebuild a grid trajectory from CSV; the grid size is inferred from the
/// node count 2M+1.
pub fn read_grid_csv(path: &Path) -> Result<DiscreteTrajectory, IoError> {
    let (times, fields) = read_frames_csv(path)?;
    let nodes = fields.first().map(|f| f.len()).unwrap_or(0);
    if nodes < 3 || nodes % 2 == 0 {
        return Err(IoError::BadNodeCount(nodes));
    }
    Ok(DiscreteTrajectory::new(
        SpaceGrid::new((nodes - 1) / 2),
        times,
        fields,
    ))
}

pub fn save_spin_config(path: &Path, sigma: &SpinConfig) -> Result<(), IoError> {
    fs::write(path, sigma.to_bytes())?;
    Ok(())
}

pub fn load_spin_config(path: &Path) -> Result<SpinConfig, IoError> {
    Ok(SpinConfig::from_bytes(&fs::read(path)?)?)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Str,
    Num,
    Bool,
    Arr,
}

fn kind_ok(v: &Value, k: Kind) -> bool {
    match k {
        Kind::Str => v.is_string(),
        Kind::Num => v.is_number(),
        Kind::Bool => v.is_boolean(),
        Kind::Arr => v.is_array(),
    }
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Str => "string",
        Kind::Num => "number",
        Kind::Bool => "boolean",
        Kind::Arr => "array",
    }
}

/// Structural validation of an emitted manifest against the documented
/// schema for its `schema` identifier. Returns every problem found.
pub fn validate_manifest(v: &Value) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    let Some(obj) = v.as_object() else {
        return Err(vec!["manifest must be a JSON object".into()]);
    };
    let schema = match obj.get("schema").and_then(|s| s.as_str()) {
        Some(s) => s,
        None => {
            return Err(vec!["missing string key 'schema'".into()]);
        }
    };
    let required: &[(&str, Kind)] = match schema {
        SCHEMA_RUN => &[
            ("command", Kind::Str),
            ("seed", Kind::Num),
            ("n", Kind::Num),
            ("d", Kind::Num),
            ("replicas", Kind::Num),
            ("params_hash", Kind::Str),
            ("wall_time_s", Kind::Num),
            ("outputs", Kind::Arr),
        ],
        SCHEMA_COMPARISON => &[
            ("command", Kind::Str),
            ("seed", Kind::Num),
            ("epsilon", Kind::Num),
            ("ns", Kind::Arr),
            ("times", Kind::Arr),
            ("rows", Kind::Arr),
            ("slope_l1", Kind::Num),
            ("pass", Kind::Bool),
        ],
        SCHEMA_LDP => &[
            ("Q", Kind::Num),
            ("I_from_tilt", Kind::Num),
            ("lower_bound", Kind::Num),
            ("family_size", Kind::Num),
            ("delta", Kind::Num),
            ("grid", Kind::Num),
            ("duality_gap", Kind::Num),
            ("pass", Kind::Bool),
        ],
        other => {
            return Err(vec![format!("unknown schema '{other}'")]);
        }
    };
    for (key, kind) in required {
        match obj.get(*key) {
            None => errors.push(format!("missing key '{key}'")),
            Some(val) if !kind_ok(val, *kind) => {
                errors.push(format!("key '{key}' must be a {}", kind_name(*kind)))
            }
            _ => {}
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
