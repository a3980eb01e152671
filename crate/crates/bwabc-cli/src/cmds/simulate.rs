//! `simulate`: run the exact continuous-time simulator for every configured
//! lattice size, replicas fanned out over the worker pool, and write
//! per-replica trajectory CSVs, final spin configurations, and one run
//! manifest per size.

use crate::cmds::{io_fail, print_report, write_manifest};
use crate::experiment::{self, ensure_out_dir, Needs};
use crate::{CmdResult, CommonArgs, Failure};
use bwabc::io::{save_spin_config, write_kmc_csv, SCHEMA_RUN};
use bwabc::kmc::{run_replica, SimParams, Trajectory};
use bwabc::lattice::{Lattice, SpinConfig};
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeMap;
use std::time::Instant;

pub fn run(map: BTreeMap<String, String>, args: &CommonArgs) -> CmdResult {
    let exp = experiment::read(
        map,
        args,
        Needs {
            gamma: true,
            n_list: true,
            ..Needs::default()
        },
    )?;
    let gamma = exp.gamma.as_ref().expect("required by Needs");
    ensure_out_dir(&exp)?;

    let snapshots = if exp.snapshots.is_empty() {
        vec![exp.horizon]
    } else {
        exp.snapshots.clone()
    };

    let mut manifests = Vec::new();
    for &n in &exp.n_list {
        let t0 = Instant::now();
        let lat = Lattice::new(n, exp.d);
        let base = SimParams {
            model: exp.model.clone(),
            tilt: exp.tilt.clone(),
            horizon: exp.horizon,
            snapshots: snapshots.clone(),
            seed: exp.seed,
            stream: 0,
            boundary_enabled: exp.boundary_enabled,
        };
        let runs: Result<Vec<(Trajectory, SpinConfig)>, _> = (0..exp.replicas)
            .into_par_iter()
            .map(|r| {
                let mut p = base.clone();
                p.stream = r as u64;
                run_replica(gamma, lat, &p)
            })
            .collect();
        let runs = runs.map_err(|e| Failure::config(format!("simulation at N = {n}: {e}")))?;

        let mut outputs = Vec::new();
        let mut events_total = 0u64;
        let mut weak_stats = false;
        for (r, (traj, final_sigma)) in runs.iter().enumerate() {
            let csv = format!("sim_N{n}_r{r}.csv");
            write_kmc_csv(&exp.out.join(&csv), traj).map_err(io_fail)?;
            let spins = format!("final_N{n}_r{r}.spins");
            save_spin_config(&exp.out.join(&spins), final_sigma).map_err(io_fail)?;
            outputs.push(csv);
            outputs.push(spins);
            events_total += traj.meta.events;
            weak_stats |= traj.meta.weak_left_boundary_stats || traj.meta.weak_right_boundary_stats;
        }

        let manifest = json!({
            "schema": SCHEMA_RUN,
            "command": "simulate",
            "seed": exp.seed,
            "n": n,
            "d": exp.d,
            "replicas": exp.replicas,
            "params_hash": exp.run_hash("simulate"),
            "wall_time_s": t0.elapsed().as_secs_f64(),
            "outputs": outputs,
            "horizon": exp.horizon,
            "snapshots": snapshots,
            "tilted": exp.tilt.is_some(),
            "boundary_enabled": exp.boundary_enabled,
            "events_total": events_total,
            "weak_boundary_stats": weak_stats,
        });
        write_manifest(&exp.out.join(format!("run_N{n}.json")), &manifest)?;
        manifests.push(manifest);
    }

    print_report(&json!({ "command": "simulate", "runs": manifests }));
    Ok(())
}
