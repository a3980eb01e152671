//! Weak-form residual of the drift–diffusion system and a Grönwall-type
//! stability diagnostic.
//!
//! For a test pair Ĝ vanishing on the left face, the weak characterization
//! of a solution trajectory ρ̂ with initial datum γ̂, left Dirichlet datum b̂,
//! drift Ê and optional tilt Ĥ reads ℓ_Ĝ(ρ̂) = 0 with
//!
//!   ℓ_Ĝ = ⟨ρ̂_T, Ĝ_T⟩ − ⟨γ̂, Ĝ_0⟩ − ∫⟨ρ̂, ∂_tĜ⟩ − ∫⟨ρ̂, ΔĜ⟩
//!         − ∫ Σ_i b̂_i ∂₁G_i(t,−1) + ∫ Σ_i ρ̂_i(t,1) ∂₁G_i(t,1)
//!         − ½∫⟨∂₁Ĝ, Σ(ρ̂)Ê⟩  [ − ∫⟨∂₁Ĝ, Σ(ρ̂)∂₁Ĥ⟩ when tilted ].
//!
//! All integrals are trapezoid sums: in space over the trajectory grid, in
//! time over the recorded frames; test-field derivatives are analytic.

use super::{DiscreteTrajectory, PdeError};
use crate::fields::FieldPair;
use crate::thermo::{mobility, DensityPair};
use serde::{Deserialize, Serialize};

/// Residual of the weak formulation, using the trajectory's first frame as
/// the initial datum and its left-node values as the Dirichlet datum.
pub fn weak_residual(
    traj: &DiscreteTrajectory,
    g: &FieldPair,
    e_axis: [f64; 2],
    tilt: Option<&FieldPair>,
) -> Result<f64, PdeError> {
    weak_form(traj, g, e_axis, tilt, None)
}

/// Shared implementation: `gamma` overrides the initial datum when given
/// (the linear functional of the cost machinery takes γ̂ explicitly).
pub(crate) fn weak_form(
    traj: &DiscreteTrajectory,
    g: &FieldPair,
    e_axis: [f64; 2],
    tilt: Option<&FieldPair>,
    gamma: Option<&[DensityPair]>,
) -> Result<f64, PdeError> {
    if traj.n_frames() < 2 {
        return Err(PdeError::TooFewFrames);
    }
    let grid = traj.grid;
    let nn = grid.num_nodes();
    if let Some(gm) = gamma {
        if gm.len() != nn {
            return Err(PdeError::GridMismatch);
        }
    }
    // The field family vanishes at u = -1 by construction; keep an explicit
    // numeric guard so the class contract is checked, not assumed.
    let t_end = traj.t_end();
    for &t in &[traj.times[0], 0.5 * t_end, t_end] {
        if g.eval(0, t, -1.0).abs() > 1e-12 || g.eval(1, t, -1.0).abs() > 1e-12 {
            return Err(PdeError::TestFieldNotLeftZero);
        }
    }
    let tilt = tilt.filter(|h| !h.is_zero());

    let inner = |field: &[DensityPair], f: &mut dyn FnMut(usize, f64) -> f64| -> f64 {
        let vals: Vec<f64> = (0..nn)
            .map(|j| {
                let u = grid.node(j);
                field[j].m * f(0, u) + field[j].phi * f(1, u)
            })
            .collect();
        grid.trapezoid(&vals)
    };

    // Time-boundary terms.
    let t0 = traj.times[0];
    let mut val = inner(traj.final_frame(), &mut |c, u| g.eval(c, t_end, u));
    let gamma_field = gamma.unwrap_or_else(|| traj.frame(0));
    val -= inner(gamma_field, &mut |c, u| g.eval(c, t0, u));

    // −∫⟨ρ̂, ∂_tĜ⟩ − ∫⟨ρ̂, ΔĜ⟩.
    val -= traj.time_integral(|k| {
        let t = traj.times[k];
        inner(traj.frame(k), &mut |c, u| g.dt(c, t, u) + g.lap(c, t, u))
    });

    // Surface terms: Dirichlet datum read off the pinned left node; trace of
    // the solution at the right node.
    val -= traj.time_integral(|k| {
        let t = traj.times[k];
        let b = traj.frame(k)[0];
        b.m * g.grad1(0, t, -1.0) + b.phi * g.grad1(1, t, -1.0)
    });
    val += traj.time_integral(|k| {
        let t = traj.times[k];
        let r = traj.frame(k)[nn - 1];
        r.m * g.grad1(0, t, 1.0) + r.phi * g.grad1(1, t, 1.0)
    });

    // Drift and tilt terms: −∫⟨∂₁Ĝ, Σ(ρ̂)(½Ê + ∂₁Ĥ)⟩.
    val -= traj.time_integral(|k| {
        let t = traj.times[k];
        let frame = traj.frame(k);
        let vals: Vec<f64> = (0..nn)
            .map(|j| {
                let u = grid.node(j);
                let mut drive = [0.5 * e_axis[0], 0.5 * e_axis[1]];
                if let Some(h) = tilt {
                    drive[0] += h.grad1(0, t, u);
                    drive[1] += h.grad1(1, t, u);
                }
                let sv = mobility(frame[j]).mul_vec(drive);
                g.grad1(0, t, u) * sv[0] + g.grad1(1, t, u) * sv[1]
            })
            .collect();
        grid.trapezoid(&vals)
    });

    Ok(val)
}

/// Grönwall diagnostic for two trajectories on the same grid and times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub times: Vec<f64>,
    /// G(t) = ‖m_A − m_B‖²_{L²} + ‖φ_A − φ_B‖²_{L²} per frame.
    pub g: Vec<f64>,
    /// Smallest C with G(t) ≤ G(0) + C ∫₀ᵗ G on the grid (0 when the gap
    /// never grows).
    pub c: f64,
}

pub fn gronwall_monitor(
    a: &DiscreteTrajectory,
    b: &DiscreteTrajectory,
) -> Result<GronwallReport, PdeError> {
    if a.grid != b.grid
        || a.n_frames() != b.n_frames()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return Err(PdeError::GridMismatch);
    }
    let grid = a.grid;
    let g: Vec<f64> = (0..a.n_frames())
        .map(|k| {
            let dm: Vec<f64> = a
                .frame(k)
                .iter()
                .zip(b.frame(k))
                .map(|(x, y)| (x.m - y.m) * (x.m - y.m))
                .collect();
            let dphi: Vec<f64> = a
                .frame(k)
                .iter()
                .zip(b.frame(k))
                .map(|(x, y)| (x.phi - y.phi) * (x.phi - y.phi))
                .collect();
            grid.trapezoid(&dm) + grid.trapezoid(&dphi)
        })
        .collect();

    let mut c = 0.0f64;
    let mut cum = 0.0;
    for k in 1..g.len() {
        cum += 0.5 * (a.times[k] - a.times[k - 1]) * (g[k] + g[k - 1]);
        let num = g[k] - g[0];
        if num > 0.0 {
            c = if cum > 0.0 { c.max(num / cum) } else { f64::INFINITY };
        }
    }
    Ok(GronwallReport {
        times: a.times.clone(),
        g,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{SpaceShape, TimeShape};
    use crate::pde::{sample_profile, solve_system, SolveSettings, SpaceGrid};
    use crate::thermo::{Profile, ProfileKind};

    fn test_field(t_end: f64) -> FieldPair {
        FieldPair::single(0, 0.7, SpaceShape::Eigen { n1: 1 }, TimeShape::HalfSine { t_end })
            .plus(&FieldPair::single(1, -0.4, SpaceShape::Sine { k: 2 }, TimeShape::Const))
    }

    fn bump_profile() -> Profile {
        Profile::new(
            ProfileKind::SineBump {
                m0: 0.05,
                phi0: 0.55,
                m_amp: 0.1,
                phi_amp: 0.15,
            },
            0.0,
            0.99,
        )
    }

    #[test]
    fn zero_test_field_gives_zero() {
        let gamma = bump_profile();
        let s = SolveSettings::cfl(SpaceGrid::new(12), 0.1).with_record_every(8);
        let out = solve_system(&gamma, gamma.left_trace(), [0.5, 0.0], None, &s).unwrap();
        let r = weak_residual(&out.traj, &FieldPair::zero(), [0.5, 0.0], None).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn constant_trajectory_residual_is_quadrature_small() {
        // ρ̂ ≡ b̂ with zero drift satisfies the equation exactly; the residual
        // is pure quadrature error, O(Δx² + Δt_frame²).
        let grid = SpaceGrid::new(64);
        let field = vec![DensityPair::new(0.1, 0.6); grid.num_nodes()];
        let traj = DiscreteTrajectory::constant_in_time(grid, field, 0.5, 201);
        let g = test_field(0.5);
        let r = weak_residual(&traj, &g, [0.0, 0.0], None).unwrap();
        assert!(r.abs() < 2e-4, "residual {r}");
    }

    #[test]
    fn solver_output_has_small_residual_that_refines() {
        let gamma = bump_profile();
        let e = [1.0, 0.0];
        let run = |m: usize| {
            let s = SolveSettings::cfl(SpaceGrid::new(m), 0.3);
            let out = solve_system(&gamma, gamma.left_trace(), e, None, &s).unwrap();
            weak_residual(&out.traj, &test_field(0.3), e, None)
                .unwrap()
                .abs()
        };
        let coarse = run(16);
        let fine = run(32);
        assert!(coarse < 5e-3, "coarse residual {coarse}");
        assert!(
            fine < coarse / 2.0,
            "no refinement: coarse {coarse}, fine {fine}"
        );
    }

    #[test]
    fn tilted_solver_output_consistent_with_tilted_form() {
        let gamma = bump_profile();
        let e = [0.5, 0.0];
        let h = FieldPair::eigen_bump(0.4, -0.2, 0, TimeShape::Const);
        let s = SolveSettings::cfl(SpaceGrid::new(32), 0.25);
        let out = solve_system(&gamma, gamma.left_trace(), e, Some(&h), &s).unwrap();
        let with_tilt = weak_residual(&out.traj, &test_field(0.25), e, Some(&h)).unwrap();
        let without = weak_residual(&out.traj, &test_field(0.25), e, None).unwrap();
        assert!(with_tilt.abs() < 2e-3, "tilted residual {with_tilt}");
        // Dropping the tilt term must leave a visible gap (the trajectory
        // solves the tilted equation, not the plain one).
        assert!(without.abs() > 10.0 * with_tilt.abs());
    }

    #[test]
    fn gronwall_identical_is_zero() {
        let gamma = bump_profile();
        let s = SolveSettings::cfl(SpaceGrid::new(10), 0.05).with_record_every(4);
        let out = solve_system(&gamma, gamma.left_trace(), [0.0, 0.0], None, &s).unwrap();
        let rep = gronwall_monitor(&out.traj, &out.traj).unwrap();
        assert!(rep.g.iter().all(|&x| x == 0.0));
        assert_eq!(rep.c, 0.0);
    }

    #[test]
    fn gronwall_time_refinement_is_second_order_in_gap() {
        // Gap between Δt and Δt/2 runs scales like Δt in the fields, so the
        // squared-distance monitor scales like Δt².
        let gamma = bump_profile();
        let grid = SpaceGrid::new(16);
        let dx = grid.dx();
        let base_dt = 0.25 * dx * dx;
        let t_end = 0.2;
        let run = |dt: f64, every: usize| {
            let s = SolveSettings {
                grid,
                dt_max: dt,
                t_end,
                record_every: every,
            };
            solve_system(&gamma, gamma.left_trace(), [1.5, -0.5], None, &s)
                .unwrap()
                .traj
        };
        // Record at the same physical times so the monitor can align frames.
        let a = run(base_dt, 64);
        let b = run(base_dt / 2.0, 128);
        let c = run(base_dt / 4.0, 256);
        let g_ab = gronwall_monitor(&a, &b).unwrap().g.last().copied().unwrap();
        let g_bc = gronwall_monitor(&b, &c).unwrap().g.last().copied().unwrap();
        // Halving Δt quarters the field gap's square… the gap itself halves,
        // its square quarters: expect roughly factor 4, accept ≥ 2.5.
        assert!(
            g_ab > 2.5 * g_bc,
            "expected ≈4× shrink, got {} vs {}",
            g_ab,
            g_bc
        );
    }

    #[test]
    fn gronwall_bound_holds_for_distinct_initial_data() {
        let gamma_a = bump_profile();
        let gamma_b = Profile::new(
            ProfileKind::SineBump {
                m0: 0.05,
                phi0: 0.55,
                m_amp: -0.05,
                phi_amp: 0.1,
            },
            0.0,
            0.99,
        );
        let grid = SpaceGrid::new(20);
        let s = SolveSettings::cfl(grid, 0.2).with_record_every(16);
        let b = DensityPair::new(0.05, 0.55);
        let ta = solve_system(&gamma_a, b, [1.0, 0.0], None, &s).unwrap().traj;
        let tb = solve_system(&gamma_b, b, [1.0, 0.0], None, &s).unwrap().traj;
        let rep = gronwall_monitor(&ta, &tb).unwrap();
        assert!(rep.c.is_finite());
        assert!(rep.g[0] > 0.0);
        // By construction of C the integral bound holds on every frame.
        let mut cum = 0.0;
        for k in 1..rep.g.len() {
            cum += 0.5 * (rep.times[k] - rep.times[k - 1]) * (rep.g[k] + rep.g[k - 1]);
            assert!(rep.g[k] <= rep.g[0] + rep.c * cum + 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let gamma = bump_profile();
        let sa = SolveSettings::cfl(SpaceGrid::new(8), 0.05).with_record_every(2);
        let sb = SolveSettings::cfl(SpaceGrid::new(10), 0.05).with_record_every(2);
        let ta = solve_system(&gamma, gamma.left_trace(), [0.0, 0.0], None, &sa)
            .unwrap()
            .traj;
        let tb = solve_system(&gamma, gamma.left_trace(), [0.0, 0.0], None, &sb)
            .unwrap()
            .traj;
        assert_eq!(
            gronwall_monitor(&ta, &tb).unwrap_err(),
            PdeError::GridMismatch
        );
    }

    #[test]
    fn single_frame_rejected() {
        let grid = SpaceGrid::new(4);
        let field = sample_profile(&Profile::constant(0.0, 0.5), &grid);
        let traj = DiscreteTrajectory::new(grid, vec![0.0], vec![field]);
        assert_eq!(
            weak_residual(&traj, &FieldPair::zero(), [0.0, 0.0], None).unwrap_err(),
            PdeError::TooFewFrames
        );
    }
}
