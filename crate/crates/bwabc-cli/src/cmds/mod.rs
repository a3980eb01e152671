//! Subcommand implementations plus helpers shared across them.

pub mod ldp;
pub mod simulate;
pub mod solve;
pub mod thermo;
pub mod verify;

use crate::Failure;
use bwabc::pde::{DiscreteTrajectory, PdeError};
use bwabc::thermo::DensityPair;
use serde_json::Value;
use std::path::Path;

pub fn io_fail(e: bwabc::io::IoError) -> Failure {
    Failure::config(format!("i/o: {e}"))
}

/// Solver errors split by exit code: leaving the admissible region is a
/// numerical-tolerance failure, everything else is bad configuration.
pub fn pde_fail(e: PdeError) -> Failure {
    match e {
        PdeError::SchemeInstability { .. } => Failure::Tolerance(format!("solver: {e}")),
        other => Failure::config(format!("solver: {other}")),
    }
}

/// Validate against the documented schema, then write. A validation error
/// here is an internal inconsistency, surfaced loudly rather than papered
/// over.
pub fn write_manifest(path: &Path, value: &Value) -> Result<(), Failure> {
    if let Err(errs) = bwabc::io::validate_manifest(value) {
        return Err(Failure::Config(
            errs.into_iter()
                .map(|e| format!("internal manifest inconsistency: {e}"))
                .collect(),
        ));
    }
    bwabc::io::write_json(path, value).map_err(io_fail)
}

pub fn print_report(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable report"));
}

/// Pick the recorded frame nearest to each requested snapshot time. The
/// match tolerance is half the recording interval, so a frame always
/// exists; the emitted rows carry the requested labels.
pub fn frames_at(
    traj: &DiscreteTrajectory,
    snapshots: &[f64],
) -> Result<Vec<Vec<DensityPair>>, Failure> {
    let spacing = traj
        .times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    let tol = 0.5 * spacing + 1e-9;
    snapshots
        .iter()
        .map(|&t| {
            traj.frame_at_time(t, tol)
                .map(|k| traj.frame(k).to_vec())
                .ok_or_else(|| {
                    Failure::config(format!(
                        "internal: no solver frame within {tol:.3e} of t = {t}"
                    ))
                })
        })
        .collect()
}

/// Mean of per-replica node fields (frame-by-frame, node-by-node).
pub fn mean_fields(per_replica: &[Vec<Vec<DensityPair>>]) -> Vec<Vec<DensityPair>> {
    let r = per_replica.len() as f64;
    let n_frames = per_replica[0].len();
    (0..n_frames)
        .map(|k| {
            let nodes = per_replica[0][k].len();
            (0..nodes)
                .map(|j| {
                    let (mut m, mut phi) = (0.0, 0.0);
                    for rep in per_replica {
                        m += rep[k][j].m;
                        phi += rep[k][j].phi;
                    }
                    DensityPair::new(m / r, phi / r)
                })
                .collect()
        })
        .collect()
}
