//! `thermo-check`: sweep the single-site thermodynamics over a grid of
//! states and potentials, verify roundtrips, closed-form identities, and
//! mobility-matrix structure, and print the report as JSON.

use crate::cmds::print_report;
use crate::experiment::{self, Needs};
use crate::{CmdResult, CommonArgs, Failure};
use bwabc::thermo::{chem_potentials, mobility, single_site_moments, ChemPot, DensityPair};
use serde_json::json;
use std::collections::BTreeMap;

pub fn run(map: BTreeMap<String, String>, args: &CommonArgs) -> CmdResult {
    let exp = experiment::read(map, args, Needs::default())?;
    let k = exp.thermo.grid;

    // State-space sweep: moment roundtrip ρ → â → ρ and mobility structure.
    let mut max_moment_roundtrip = 0.0f64;
    let mut max_mobility_det_err = 0.0f64;
    let mut min_mobility_eig = f64::INFINITY;
    let mut states = 0usize;
    for i in 1..k {
        let phi = i as f64 / k as f64;
        for j in 0..=k {
            let m = 0.95 * phi * (2.0 * j as f64 / k as f64 - 1.0);
            let rho = DensityPair::new(m, phi);
            if !rho.is_interior(1e-9) {
                continue;
            }
            states += 1;
            let a = chem_potentials(rho)
                .map_err(|e| Failure::config(format!("interior state rejected: {e}")))?;
            let back = single_site_moments(a)
                .map_err(|e| Failure::config(format!("potential rejected: {e}")))?;
            max_moment_roundtrip = max_moment_roundtrip
                .max((back.m - rho.m).abs())
                .max((back.phi - rho.phi).abs());

            let s = mobility(rho);
            if s.b != s.c {
                return Err(Failure::Tolerance("mobility matrix asymmetric".into()));
            }
            let det_identity = 4.0 * (1.0 - phi) * (phi * phi - m * m);
            max_mobility_det_err = max_mobility_det_err.max((s.det() - det_identity).abs());
            min_mobility_eig = min_mobility_eig.min(s.sym_eigenvalues()[0]);
        }
    }

    // Potential-space sweep: â → ρ → â roundtrip and the explicit-sum
    // identity (library values vs a direct three-term Boltzmann sum).
    let mut max_potential_roundtrip = 0.0f64;
    let mut max_identity_err = 0.0f64;
    for i in 0..=k {
        let a1 = -3.0 + 6.0 * i as f64 / k as f64;
        for j in 0..=k {
            let a2 = -3.0 + 6.0 * j as f64 / k as f64;
            let a = ChemPot { a1, a2 };
            let rho = single_site_moments(a)
                .map_err(|e| Failure::config(format!("potential rejected: {e}")))?;
            let back = chem_potentials(rho)
                .map_err(|e| Failure::config(format!("moment image rejected: {e}")))?;
            max_potential_roundtrip = max_potential_roundtrip
                .max((back.a1 - a1).abs())
                .max((back.a2 - a2).abs());

            let w_up = (a1 + a2).exp();
            let w_down = (-a1 + a2).exp();
            let z = 1.0 + w_up + w_down;
            max_identity_err = max_identity_err
                .max((rho.m - (w_up - w_down) / z).abs())
                .max((rho.phi - (w_up + w_down) / z).abs());
        }
    }

    let pass = max_moment_roundtrip <= exp.thermo.tol_roundtrip
        && max_potential_roundtrip <= exp.thermo.tol_roundtrip
        && max_identity_err <= exp.thermo.tol_identity
        && max_mobility_det_err <= exp.thermo.tol_identity
        && min_mobility_eig >= -1e-14;

    let report = json!({
        "command": "thermo-check",
        "grid": k,
        "states_checked": states,
        "max_moment_roundtrip": max_moment_roundtrip,
        "max_potential_roundtrip": max_potential_roundtrip,
        "max_identity_err": max_identity_err,
        "max_mobility_det_err": max_mobility_det_err,
        "min_mobility_eig": min_mobility_eig,
        "tol_roundtrip": exp.thermo.tol_roundtrip,
        "tol_identity": exp.thermo.tol_identity,
        "pass": pass,
    });
    print_report(&report);

    if pass {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "thermodynamic identity sweep failed (roundtrip {:.3e}/{:.3e}, identity {:.3e})",
            max_moment_roundtrip, max_potential_roundtrip, max_identity_err
        )))
    }
}
