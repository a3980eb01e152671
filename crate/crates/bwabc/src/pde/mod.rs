//! Finite-difference solution of the coupled drift–diffusion system
//!
//!   ∂_t ρ̂ = Δρ̂ − ∇·(½ Σ(ρ̂)(Ê + 2∇Ĥ)),   ρ̂ = (m, φ),
//!
//! on the segment [-1, 1] with the density pinned to a datum b̂ at the left
//! face and zero total flux through the right face. The optional field Ĥ is
//! the perturbation generating tilted trajectories.
//!
//! The scheme is explicit and in flux form: with nodes u_j = -1 + j/M and
//! face fluxes F_{j+1/2} = (ρ̂_{j+1} − ρ̂_j)/Δx − ½ Σ(ρ̂_{j+1/2})(Ê + 2∂₁Ĥ),
//! interior nodes update by (Δt/Δx)(F_{j+1/2} − F_{j−1/2}), the left node is
//! pinned, and the right node is a half-width cell updated by
//! (2Δt/Δx)(0 − F_{2M−1/2}) so the zero-flux condition enters at second
//! order and the discrete conservation ledger closes exactly.

pub mod spectral;
pub mod weak;

pub use spectral::{eigenmode, heat_spectral, EigenMode};
pub use weak::{gronwall_monitor, weak_residual, GronwallReport};

use crate::fields::FieldPair;
use crate::thermo::{mobility, DensityPair, Profile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fields may leave the closed admissible region by at most this much per
/// step before the solve aborts as unstable; smaller excursions are clamped.
pub const CLAMP_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum PdeError {
    #[error("time step {dt} violates the stability bound {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("scheme instability: node {node} left the admissible region by {excess} at t = {t}")]
    SchemeInstability { t: f64, node: usize, excess: f64 },
    #[error("initial profile outside I")]
    InitialProfileOutsideI,
    #[error("boundary datum outside I")]
    BoundaryDatumOutsideI,
    #[error("mode cutoff must be at least 1")]
    ModeCutoffTooSmall,
    #[error("lift must have zero right-face slope")]
    BadLift,
    #[error("trajectories disagree in grid or times")]
    GridMismatch,
    #[error("trajectory needs at least two frames")]
    TooFewFrames,
    #[error("test field must vanish at the left face")]
    TestFieldNotLeftZero,
}

/// Uniform 1-d grid of 2M+1 nodes u_j = -1 + j/M covering [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub m: usize,
}

impl SpaceGrid {
    pub fn new(m: usize) -> SpaceGrid {
        assert!(m >= 1, "grid needs at least one interval per half");
        SpaceGrid { m }
    }

    pub fn num_nodes(&self) -> usize {
        2 * self.m + 1
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.dx()
    }

    /// Center of the face between nodes j and j+1.
    pub fn face(&self, j: usize) -> f64 {
        -1.0 + (j as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|j| self.node(j)).collect()
    }

    /// Trapezoid quadrature of node samples over [-1, 1].
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.num_nodes());
        let dx = self.dx();
        let interior: f64 = values[1..values.len() - 1].iter().sum();
        dx * (0.5 * (values[0] + values[values.len() - 1]) + interior)
    }
}

/// Space-time field of density pairs on a [`SpaceGrid`]: frame k holds the
/// node values at `times[k]`. Times are nondecreasing; solver output is
/// uniformly spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTrajectory {
    pub grid: SpaceGrid,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<DensityPair>>,
}

impl DiscreteTrajectory {
    pub fn new(grid: SpaceGrid, times: Vec<f64>, fields: Vec<Vec<DensityPair>>) -> Self {
        assert_eq!(times.len(), fields.len());
        for f in &fields {
            assert_eq!(f.len(), grid.num_nodes());
        }
        DiscreteTrajectory {
            grid,
            times,
            fields,
        }
    }

    /// Constant-in-time trajectory holding one field over [0, T] with
    /// `frames` uniformly spaced frames.
    pub fn constant_in_time(grid: SpaceGrid, field: Vec<DensityPair>, t_end: f64, frames: usize) -> Self {
        assert!(frames >= 2);
        let times = (0..frames)
            .map(|k| t_end * k as f64 / (frames - 1) as f64)
            .collect();
        let fields = vec![field; frames];
        DiscreteTrajectory::new(grid, times, fields)
    }

    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    pub fn frame(&self, k: usize) -> &[DensityPair] {
        &self.fields[k]
    }

    pub fn final_frame(&self) -> &[DensityPair] {
        self.fields.last().expect("nonempty trajectory")
    }

    /// Index of the frame closest to time `t` (within `tol`), if any.
    pub fn frame_at_time(&self, t: f64, tol: f64) -> Option<usize> {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &tk)| (tk - t).abs() <= tol)
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
            .map(|(k, _)| k)
    }

    /// Trapezoid integral over time of frame functional `f`.
    pub fn time_integral(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.times.len() {
            let dt = self.times[k] - self.times[k - 1];
            acc += 0.5 * dt * (f(k - 1) + f(k));
        }
        acc
    }
}

/// Sample an analytic profile onto grid nodes.
pub fn sample_profile(p: &Profile, grid: &SpaceGrid) -> Vec<DensityPair> {
    (0..grid.num_nodes()).map(|j| p.eval(grid.node(j))).collect()
}

/// Solver controls. `dt_max` is an upper bound on the step; the solver picks
/// the largest step ≤ dt_max that divides `t_end` into a whole number of
/// steps, rounded up to a multiple of `record_every` so recorded frames are
/// uniformly spaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub grid: SpaceGrid,
    pub dt_max: f64,
    pub t_end: f64,
    /// Record every k-th step (frame 0 always recorded).
    pub record_every: usize,
}

impl SolveSettings {
    /// CFL-safe default step Δx²/4 with every step recorded.
    pub fn cfl(grid: SpaceGrid, t_end: f64) -> SolveSettings {
        let dx = grid.dx();
        SolveSettings {
            grid,
            dt_max: 0.25 * dx * dx,
            t_end,
            record_every: 1,
        }
    }

    pub fn with_record_every(mut self, k: usize) -> SolveSettings {
        self.record_every = k.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub dt: f64,
    pub n_steps: usize,
    /// Largest single-step projection back onto the closed region.
    pub max_clamp: f64,
    /// |γ̂(-1) − b̂| in sup norm: nonzero means incompatible Dirichlet data.
    pub trace_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub traj: DiscreteTrajectory,
    pub stats: SolveStats,
}

/// March the system from the profile γ̂ with left Dirichlet datum `b`,
/// constant drift field `e_axis` = (Ê¹₁, Ê²₁) along the axis, and optional
/// tilt Ĥ.
pub fn solve_system(
    gamma: &Profile,
    b: DensityPair,
    e_axis: [f64; 2],
    tilt: Option<&FieldPair>,
    s: &SolveSettings,
) -> Result<SolveOutput, PdeError> {
    let grid = s.grid;
    let dx = grid.dx();
    let nn = grid.num_nodes();

    if !(b.m.abs() < b.phi && b.phi < 1.0) {
        return Err(PdeError::BoundaryDatumOutsideI);
    }

    let record_every = s.record_every.max(1);
    let mut n_steps = (s.t_end / s.dt_max).ceil().max(1.0) as usize;
    n_steps = record_every * n_steps.div_ceil(record_every);
    let dt = s.t_end / n_steps as f64;
    let limit = 0.25 * dx * dx;
    if dt > limit * (1.0 + 1e-12) {
        return Err(PdeError::CflViolation { dt, limit });
    }

    let mut state = sample_profile(gamma, &grid);
    for rho in &state {
        if !(rho.m.abs() < rho.phi && rho.phi < 1.0) {
            return Err(PdeError::InitialProfileOutsideI);
        }
    }
    let g_left = gamma.left_trace();
    let trace_mismatch = (g_left.m - b.m).abs().max((g_left.phi - b.phi).abs());
    state[0] = b;

    let mut times = vec![0.0];
    let mut fields = vec![state.clone()];
    let mut flux = vec![[0.0f64; 2]; nn - 1];
    let mut max_clamp = 0.0f64;
    let tilt = tilt.filter(|h| !h.is_zero());

    for step in 0..n_steps {
        let t = step as f64 * dt;
        for (j, f) in flux.iter_mut().enumerate() {
            let a = state[j];
            let c = state[j + 1];
            let mid = DensityPair::new(0.5 * (a.m + c.m), 0.5 * (a.phi + c.phi));
            let sig = mobility(mid);
            let mut drive = e_axis;
            if let Some(h) = tilt {
                let uf = grid.face(j);
                drive[0] += 2.0 * h.grad1(0, t, uf);
                drive[1] += 2.0 * h.grad1(1, t, uf);
            }
            let sv = sig.mul_vec(drive);
            f[0] = (c.m - a.m) / dx - 0.5 * sv[0];
            f[1] = (c.phi - a.phi) / dx - 0.5 * sv[1];
        }
        let r = dt / dx;
        for j in 1..nn - 1 {
            state[j].m += r * (flux[j][0] - flux[j - 1][0]);
            state[j].phi += r * (flux[j][1] - flux[j - 1][1]);
        }
        state[nn - 1].m += 2.0 * r * (0.0 - flux[nn - 2][0]);
        state[nn - 1].phi += 2.0 * r * (0.0 - flux[nn - 2][1]);
        state[0] = b;

        for (j, rho) in state.iter_mut().enumerate() {
            let excess = rho.clamp_to_closure();
            if excess > CLAMP_TOL {
                return Err(PdeError::SchemeInstability {
                    t: (step + 1) as f64 * dt,
                    node: j,
                    excess,
                });
            }
            max_clamp = max_clamp.max(excess);
        }

        if (step + 1) % record_every == 0 {
            times.push((step + 1) as f64 * dt);
            fields.push(state.clone());
        }
    }

    Ok(SolveOutput {
        traj: DiscreteTrajectory::new(grid, times, fields),
        stats: SolveStats {
            dt,
            n_steps,
            max_clamp,
            trace_mismatch,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::ProfileKind;

    fn sup_distance(a: &[DensityPair], b: &[DensityPair]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x.m - y.m).abs().max((x.phi - y.phi).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_matched_data_is_exact_fixed_point() {
        let gamma = Profile::constant(0.1, 0.5);
        let b = DensityPair::new(0.1, 0.5);
        let s = SolveSettings::cfl(SpaceGrid::new(16), 0.3).with_record_every(64);
        let out = solve_system(&gamma, b, [0.0, 0.0], None, &s).unwrap();
        let first = out.traj.frame(0).to_vec();
        for frame in &out.traj.fields {
            assert_eq!(frame, &first, "flat zero-drift state must not move");
        }
        assert_eq!(out.stats.max_clamp, 0.0);
        assert_eq!(out.stats.trace_mismatch, 0.0);
    }

    #[test]
    fn relaxes_to_constant_datum() {
        // Zero drift: any initial bump decays to the flat datum; with the
        // bump amplitude 0.02 the slowest mode leaves < 1e-3 by t = 5.
        let b = DensityPair::new(0.0, 2.0 / 3.0);
        let gamma = Profile::new(
            ProfileKind::EigenBump {
                m0: 0.0,
                phi0: 2.0 / 3.0,
                m_amp: 0.01,
                phi_amp: 0.02,
                n1: 0,
            },
            0.01,
            0.95,
        );
        let grid = SpaceGrid::new(100);
        let s = SolveSettings::cfl(grid, 5.0).with_record_every(100_000);
        let out = solve_system(&gamma, b, [0.0, 0.0], None, &s).unwrap();
        let flat = vec![b; grid.num_nodes()];
        let dist = sup_distance(out.traj.final_frame(), &flat);
        assert!(dist < 1e-3, "steady-state distance {dist}");
    }

    #[test]
    fn zero_drift_fields_never_clamp() {
        // Pure diffusion with CFL step is a convex combination of node
        // values, so the admissible region is preserved exactly.
        for (m_amp, phi_amp) in [(0.15, 0.1), (-0.2, 0.25), (0.0, -0.3)] {
            let gamma = Profile::new(
                ProfileKind::SineBump {
                    m0: 0.1,
                    phi0: 0.55,
                    m_amp,
                    phi_amp,
                },
                0.0,
                0.99,
            );
            let s = SolveSettings::cfl(SpaceGrid::new(24), 0.5).with_record_every(1000);
            let out = solve_system(&gamma, gamma.left_trace(), [0.0, 0.0], None, &s).unwrap();
            assert_eq!(out.stats.max_clamp, 0.0, "amp ({m_amp},{phi_amp})");
        }
    }

    #[test]
    fn discrete_mass_ledger_closes() {
        // One step: trapezoid mass change equals -Δt × (flux through the
        // first face), exactly as floating point allows.
        let gamma = Profile::new(
            ProfileKind::SineBump {
                m0: 0.05,
                phi0: 0.5,
                m_amp: 0.1,
                phi_amp: 0.2,
            },
            0.0,
            0.99,
        );
        let grid = SpaceGrid::new(20);
        let dx = grid.dx();
        let e = [0.8, -0.3];
        let s = SolveSettings {
            grid,
            dt_max: 0.25 * dx * dx,
            t_end: 0.25 * dx * dx,
            record_every: 1,
        };
        let out = solve_system(&gamma, gamma.left_trace(), e, None, &s).unwrap();
        let mass = |frame: &[DensityPair], pick: fn(&DensityPair) -> f64| {
            grid.trapezoid(&frame.iter().map(pick).collect::<Vec<_>>())
        };
        // Recompute the first-face flux from the recorded initial frame.
        let f0 = out.traj.frame(0);
        let dt = out.stats.dt;
        for (pick, comp) in [
            ((|r: &DensityPair| r.m) as fn(&DensityPair) -> f64, 0),
            (|r: &DensityPair| r.phi, 1),
        ] {
            let a = f0[0];
            let c = f0[1];
            let mid = DensityPair::new(0.5 * (a.m + c.m), 0.5 * (a.phi + c.phi));
            let sv = mobility(mid).mul_vec(e);
            let f_half = match comp {
                0 => (c.m - a.m) / dx - 0.5 * sv[0],
                _ => (c.phi - a.phi) / dx - 0.5 * sv[1],
            };
            let delta = mass(out.traj.frame(1), pick) - mass(f0, pick);
            assert!(
                (delta + dt * f_half).abs() < 1e-14,
                "ledger drift {}",
                (delta + dt * f_half).abs()
            );
        }
    }

    #[test]
    fn cfl_violation_rejected() {
        let gamma = Profile::constant(0.0, 0.5);
        let grid = SpaceGrid::new(10);
        let s = SolveSettings {
            grid,
            dt_max: 1.0,
            t_end: 1.0,
            record_every: 1,
        };
        match solve_system(&gamma, gamma.left_trace(), [0.0, 0.0], None, &s) {
            Err(PdeError::CflViolation { .. }) => {}
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn bad_data_rejected() {
        let gamma = Profile::constant(0.0, 0.5);
        let s = SolveSettings::cfl(SpaceGrid::new(8), 0.1);
        // Datum on the boundary of the admissible region.
        assert_eq!(
            solve_system(&gamma, DensityPair::new(0.5, 0.5), [0.0, 0.0], None, &s).unwrap_err(),
            PdeError::BoundaryDatumOutsideI
        );
        // Initial profile touching the boundary.
        let flat_edge = Profile::new(ProfileKind::Constant { m: 0.3, phi: 0.3 }, 0.0, 0.5);
        assert_eq!(
            solve_system(&flat_edge, DensityPair::new(0.0, 0.5), [0.0, 0.0], None, &s).unwrap_err(),
            PdeError::InitialProfileOutsideI
        );
    }

    #[test]
    fn violent_drift_reports_instability() {
        // A strong magnetization drift moves m past phi at the flux boundary
        // within the first step, far beyond the clamp tolerance.
        let gamma = Profile::constant(0.5, 0.6);
        let s = SolveSettings::cfl(SpaceGrid::new(50), 0.5);
        match solve_system(&gamma, DensityPair::new(0.5, 0.6), [100.0, 0.0], None, &s) {
            Err(PdeError::SchemeInstability { excess, .. }) => {
                assert!(excess > CLAMP_TOL);
            }
            Err(other) => panic!("expected instability, got error {other:?}"),
            Ok(out) => panic!(
                "expected instability, solve succeeded with max clamp {:.3e}",
                out.stats.max_clamp
            ),
        }
    }

    #[test]
    fn trace_mismatch_reported() {
        let gamma = Profile::constant(0.0, 0.5);
        let s = SolveSettings::cfl(SpaceGrid::new(8), 0.05);
        let out = solve_system(&gamma, DensityPair::new(0.0, 0.6), [0.0, 0.0], None, &s).unwrap();
        assert!((out.stats.trace_mismatch - 0.1).abs() < 1e-12);
    }

    #[test]
    fn recorded_frames_uniform_and_complete() {
        let gamma = Profile::constant(0.0, 0.5);
        let s = SolveSettings::cfl(SpaceGrid::new(8), 0.1).with_record_every(7);
        let out = solve_system(&gamma, gamma.left_trace(), [0.0, 0.0], None, &s).unwrap();
        assert_eq!(out.stats.n_steps % 7, 0);
        assert_eq!(out.traj.n_frames(), out.stats.n_steps / 7 + 1);
        let times = &out.traj.times;
        assert_eq!(times[0], 0.0);
        assert!((out.traj.t_end() - 0.1).abs() < 1e-12);
        let spacing = times[1] - times[0];
        for w in times.windows(2) {
            assert!((w[1] - w[0] - spacing).abs() < 1e-12);
        }
    }
}
