//! `hydro-verify` / `perturbed-verify`: simulate across the configured
//! lattice sizes, coarse-grain the empirical fields onto the solver grid,
//! and check convergence toward the solved limit — the tilted limit when a
//! tilt is configured. Emits per-size replica-mean field CSVs, the solver
//! field CSVs, and a comparison manifest; exit 3 when the distances fail to
//! shrink (or, tilted, when the empirical path is not closer to the tilted
//! limit than to the untilted one at the largest size).

use crate::cmds::solve::solve_for;
use crate::cmds::{frames_at, io_fail, mean_fields, print_report, write_manifest};
use crate::experiment::{self, ensure_out_dir, Needs};
use crate::{CmdResult, CommonArgs, Failure};
use bwabc::compare::{field_distance, kmc_to_grid, log_slope, mean_se, window_half_width};
use bwabc::io::{write_frames_csv, SCHEMA_COMPARISON};
use bwabc::kmc::{run_replica, SimParams};
use bwabc::lattice::Lattice;
use bwabc::ldp::validate_m0_frames;
use bwabc::pde::SpaceGrid;
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeMap;
use std::time::Instant;

pub fn run(map: BTreeMap<String, String>, args: &CommonArgs, perturbed: bool) -> CmdResult {
    let exp = experiment::read(
        map,
        args,
        Needs {
            gamma: true,
            n_list: true,
            snapshots: true,
            forbid_tilt: !perturbed,
            ..Needs::default()
        },
    )?;
    if exp.n_list.len() < 2 {
        return Err(Failure::config(
            "run.N_list needs at least two sizes to measure convergence",
        ));
    }
    let gamma = exp.gamma.as_ref().expect("required by Needs");
    ensure_out_dir(&exp)?;
    let command = if perturbed { "perturbed-verify" } else { "hydro-verify" };
    let t0 = Instant::now();

    let grid = SpaceGrid::new(exp.grid_m);
    let sol = solve_for(&exp, true)?;
    let pde_frames = frames_at(&sol.traj, &exp.snapshots)?;
    let mut outputs = vec!["pde_fields.csv".to_string()];
    write_frames_csv(&exp.out.join("pde_fields.csv"), &exp.snapshots, &pde_frames)
        .map_err(io_fail)?;

    // Tilted runs also solve the untilted system: the empirical path must
    // end up closer to the tilted limit than to this one.
    let untilted_frames = if perturbed && exp.tilt.is_some() {
        let sol0 = solve_for(&exp, false)?;
        let frames = frames_at(&sol0.traj, &exp.snapshots)?;
        write_frames_csv(&exp.out.join("pde_untilted.csv"), &exp.snapshots, &frames)
            .map_err(io_fail)?;
        outputs.push("pde_untilted.csv".to_string());
        Some(frames)
    } else {
        None
    };

    let n_times = exp.snapshots.len();
    // l1_mean[t_idx][n_idx], filled size by size.
    let mut l1_mean = vec![Vec::new(); n_times];
    let mut rows = Vec::new();
    let mut m0_pass = true;
    let mut separation_pass = true;

    for &n in &exp.n_list {
        let lat = Lattice::new(n, exp.d);
        let ell = window_half_width(exp.epsilon, n);
        let base = SimParams {
            model: exp.model.clone(),
            tilt: if perturbed { exp.tilt.clone() } else { None },
            horizon: exp.horizon,
            snapshots: exp.snapshots.clone(),
            seed: exp.seed,
            stream: 0,
            boundary_enabled: exp.boundary_enabled,
        };
        let per_replica: Result<Vec<_>, _> = (0..exp.replicas)
            .into_par_iter()
            .map(|r| {
                let mut p = base.clone();
                p.stream = r as u64;
                run_replica(gamma, lat, &p).map(|(traj, _)| kmc_to_grid(&traj, &grid, ell))
            })
            .collect();
        let per_replica =
            per_replica.map_err(|e| Failure::config(format!("simulation at N = {n}: {e}")))?;

        let coarse: Vec<Vec<Vec<_>>> = per_replica.into_iter().map(|d| d.fields).collect();
        for fields in &coarse {
            m0_pass &= validate_m0_frames(fields).pass;
        }

        let mean = mean_fields(&coarse);
        let csv = format!("empirical_N{n}.csv");
        write_frames_csv(&exp.out.join(&csv), &exp.snapshots, &mean).map_err(io_fail)?;
        outputs.push(csv);

        for (k, &t) in exp.snapshots.iter().enumerate() {
            let l1s: Vec<f64> = coarse
                .iter()
                .map(|fields| field_distance(&fields[k], &pde_frames[k], &grid).l1)
                .collect();
            let l2s: Vec<f64> = coarse
                .iter()
                .map(|fields| field_distance(&fields[k], &pde_frames[k], &grid).l2)
                .collect();
            let linfs: Vec<f64> = coarse
                .iter()
                .map(|fields| field_distance(&fields[k], &pde_frames[k], &grid).linf)
                .collect();
            let l1 = mean_se(&l1s);
            l1_mean[k].push(l1.mean);

            let mut row = json!({
                "n": n,
                "t": t,
                "l1_mean": l1.mean,
                "l1_se": l1.se,
                "l2_mean": mean_se(&l2s).mean,
                "linf_mean": mean_se(&linfs).mean,
            });
            if let Some(unt) = &untilted_frames {
                let l1u: Vec<f64> = coarse
                    .iter()
                    .map(|fields| field_distance(&fields[k], &unt[k], &grid).l1)
                    .collect();
                let l1u = mean_se(&l1u);
                row["l1_untilted_mean"] = json!(l1u.mean);
                if n == *exp.n_list.last().expect("nonempty") && l1.mean >= l1u.mean {
                    separation_pass = false;
                }
            }
            rows.push(row);
        }
    }

    // Convergence checks: strictly decreasing replica-mean L¹ at every
    // snapshot time, and a pooled slope for the report.
    let mut failures = Vec::new();
    for (k, &t) in exp.snapshots.iter().enumerate() {
        let means = &l1_mean[k];
        if means.windows(2).any(|w| w[1] >= w[0]) {
            failures.push(format!(
                "mean L1 distance not strictly decreasing in N at t = {t}: {means:?}"
            ));
        }
    }
    if !m0_pass {
        failures.push("coarse-grained empirical fields left |m| <= phi <= 1".into());
    }
    if !separation_pass {
        failures.push(
            "at the largest N the empirical path is not closer to the tilted limit than to the untilted one"
                .into(),
        );
    }

    let ns_f64: Vec<f64> = exp.n_list.iter().map(|&n| n as f64).collect();
    let pooled: Vec<f64> = (0..exp.n_list.len())
        .map(|i| l1_mean.iter().map(|per_t| per_t[i]).sum::<f64>() / n_times as f64)
        .collect();
    let slope_l1 = log_slope(&ns_f64, &pooled);

    let pass = failures.is_empty();
    let manifest = json!({
        "schema": SCHEMA_COMPARISON,
        "command": command,
        "seed": exp.seed,
        "epsilon": exp.epsilon,
        "ns": exp.n_list,
        "times": exp.snapshots,
        "rows": rows,
        "slope_l1": slope_l1,
        "pass": pass,
        "replicas": exp.replicas,
        "grid_m": exp.grid_m,
        "tilted": perturbed && exp.tilt.is_some(),
        "m0_pass": m0_pass,
        "separation_pass": separation_pass,
        "params_hash": exp.run_hash(command),
        "wall_time_s": t0.elapsed().as_secs_f64(),
        "outputs": outputs,
    });
    write_manifest(&exp.out.join("comparison.json"), &manifest)?;
    print_report(&manifest);

    if pass {
        Ok(())
    } else {
        Err(Failure::Tolerance(failures.join("; ")))
    }
}
