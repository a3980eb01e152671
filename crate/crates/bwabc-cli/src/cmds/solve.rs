//! `solve`: march the limiting PDE system and write the solution CSV plus a
//! run manifest. With `run.snapshots` set, only those frames are emitted;
//! otherwise all recorded frames (thinned to `grid.max_frames`) are.

use crate::cmds::{frames_at, io_fail, pde_fail, print_report, write_manifest};
use crate::experiment::{self, ensure_out_dir, Experiment, Needs};
use crate::{CmdResult, CommonArgs};
use bwabc::io::{write_frames_csv, SCHEMA_RUN};
use bwabc::pde::{solve_system, SolveOutput, SolveSettings, SpaceGrid};
use serde_json::json;
use std::collections::BTreeMap;
use std::time::Instant;

/// Build solver settings from the grid block: CFL-safe step unless
/// `grid.dt` overrides it, recording thinned to about `grid.max_frames`
/// frames.
pub fn settings_from(exp: &Experiment) -> SolveSettings {
    let grid = SpaceGrid::new(exp.grid_m);
    let mut s = SolveSettings::cfl(grid, exp.horizon);
    if let Some(dt) = exp.dt {
        s.dt_max = dt;
    }
    let n_est = (exp.horizon / s.dt_max).ceil().max(1.0) as usize;
    s.with_record_every((n_est / exp.max_frames).max(1))
}

/// Run the solver for an experiment (shared with the verify commands).
pub fn solve_for(exp: &Experiment, tilted: bool) -> Result<SolveOutput, crate::Failure> {
    let gamma = exp.gamma.as_ref().expect("gamma required upstream");
    let tilt = if tilted { exp.tilt.as_ref() } else { None };
    solve_system(
        gamma,
        exp.model.b.left_trace(),
        exp.e_axis(),
        tilt,
        &settings_from(exp),
    )
    .map_err(pde_fail)
}

pub fn run(map: BTreeMap<String, String>, args: &CommonArgs) -> CmdResult {
    let exp = experiment::read(
        map,
        args,
        Needs {
            gamma: true,
            ..Needs::default()
        },
    )?;
    ensure_out_dir(&exp)?;

    let t0 = Instant::now();
    let out = solve_for(&exp, true)?;
    let (times, frames) = if exp.snapshots.is_empty() {
        (out.traj.times.clone(), out.traj.fields.clone())
    } else {
        (exp.snapshots.clone(), frames_at(&out.traj, &exp.snapshots)?)
    };
    write_frames_csv(&exp.out.join("solution.csv"), &times, &frames).map_err(io_fail)?;

    let manifest = json!({
        "schema": SCHEMA_RUN,
        "command": "solve",
        "seed": exp.seed,
        // For solver runs `n` records the grid size M (see the schema doc).
        "n": exp.grid_m,
        "d": 1,
        "replicas": 0,
        "params_hash": exp.run_hash("solve"),
        "wall_time_s": t0.elapsed().as_secs_f64(),
        "outputs": ["solution.csv"],
        "horizon": exp.horizon,
        "tilted": exp.tilt.is_some(),
        "dt": out.stats.dt,
        "steps": out.stats.n_steps,
        "max_clamp": out.stats.max_clamp,
        "trace_mismatch": out.stats.trace_mismatch,
        "frames_emitted": times.len(),
    });
    write_manifest(&exp.out.join("run.json"), &manifest)?;
    print_report(&manifest);
    Ok(())
}
