//! Numerically evaluable large-deviations objects for trajectories of the
//! density pair: mobility-weighted inner products, the Dirichlet energy Q,
//! the linear and quadratic trajectory functionals, rate values from a known
//! generating tilt, variational lower bounds over test-field families, the
//! admissible-region validator, and the drift-comparison inequality.
//!
//! The rate of a tilted trajectory is evaluated in closed form as half the
//! Σ-weighted H¹ norm of the generating tilt; everything else only bounds
//! the rate from below via the quadratic functional J.

use crate::fields::{FieldPair, SpaceShape, TimeShape};
use crate::pde::weak::weak_form;
use crate::pde::{DiscreteTrajectory, PdeError};
use crate::thermo::{mobility_inverse, mobility_reg, DensityPair, Mat2};
use serde::{Deserialize, Serialize};

/// Default Σ-regularization for inverse weights: below scheme error for
/// interior trajectories, keeps Σ⁻¹ bounded near the region boundary.
pub const DEFAULT_DELTA: f64 = 1e-6;

/// Symmetric evaluation of x·(S y) for symmetric S; literally invariant
/// under swapping x and y, so inner-product symmetry holds to the last bit.
fn s_form(s: &Mat2, x: [f64; 2], y: [f64; 2]) -> f64 {
    debug_assert_eq!(s.b, s.c);
    s.a * x[0] * y[0] + s.b * (x[0] * y[1] + x[1] * y[0]) + s.d * x[1] * y[1]
}

/// Space-time inner product ⟪F, Σ_δ(ρ̂)G⟫ = ∫₀ᵀ∫ F·Σ_δ(ρ̂_t)G du dt, with the
/// trajectory supplying the weight field.
pub fn weighted_inner(
    f: &FieldPair,
    g: &FieldPair,
    weight: &DiscreteTrajectory,
    delta: f64,
) -> f64 {
    quadrature(weight, |t, u, rho| {
        let s = mobility_reg(rho, delta);
        s_form(&s, f.eval_pair(t, u), g.eval_pair(t, u))
    })
}

/// Gradient (H¹) form Σ_k ⟪∂_kF, Σ_δ(ρ̂)∂_kG⟫; the fields vary along the
/// axis only, so k = 1 carries everything.
pub fn h1_inner(f: &FieldPair, g: &FieldPair, weight: &DiscreteTrajectory, delta: f64) -> f64 {
    quadrature(weight, |t, u, rho| {
        let s = mobility_reg(rho, delta);
        s_form(&s, f.grad1_pair(t, u), g.grad1_pair(t, u))
    })
}

/// S-weight of a constant vector field: ∫₀ᵀ∫ v·Σ_δ(ρ̂)v du dt.
pub fn const_field_weight(v: [f64; 2], weight: &DiscreteTrajectory, delta: f64) -> f64 {
    quadrature(weight, |_t, _u, rho| s_form(&mobility_reg(rho, delta), v, v))
}

/// Trapezoid space-time quadrature of a pointwise function of (t, u, ρ̂).
fn quadrature(traj: &DiscreteTrajectory, f: impl Fn(f64, f64, DensityPair) -> f64) -> f64 {
    let grid = traj.grid;
    traj.time_integral(|k| {
        let t = traj.times[k];
        let vals: Vec<f64> = (0..grid.num_nodes())
            .map(|j| f(t, grid.node(j), traj.frame(k)[j]))
            .collect();
        grid.trapezoid(&vals)
    })
}

/// Dirichlet energy ½ Σ_k ⟪∂_kρ̂, Σ_δ(ρ̂)⁻¹ ∂_kρ̂⟫ with face-centered
/// gradients and the inverse mobility at face midpoints. Finite for every
/// δ > 0; at δ = 0 a face on the region boundary makes the value +∞.
pub fn energy_q(traj: &DiscreteTrajectory, delta: f64) -> f64 {
    let grid = traj.grid;
    let dx = grid.dx();
    traj.time_integral(|k| {
        let frame = traj.frame(k);
        let mut acc = 0.0;
        for j in 0..grid.num_nodes() - 1 {
            let a = frame[j];
            let b = frame[j + 1];
            let grad = [(b.m - a.m) / dx, (b.phi - a.phi) / dx];
            let mid = DensityPair::new(0.5 * (a.m + b.m), 0.5 * (a.phi + b.phi));
            match mobility_inverse(mid, delta) {
                Ok(inv) => acc += 0.5 * dx * s_form(&inv, grad, grad),
                Err(_) => return f64::INFINITY,
            }
        }
        acc
    })
}

/// Linear trajectory functional ℓ_Ĝ(ρ̂ | γ̂) with the initial datum given
/// explicitly; same quadrature path as the weak-form residual, without any
/// tilt term.
pub fn ell(
    traj: &DiscreteTrajectory,
    g: &FieldPair,
    e_axis: [f64; 2],
    gamma: &[DensityPair],
) -> Result<f64, PdeError> {
    weak_form(traj, g, e_axis, None, Some(gamma))
}

/// Quadratic functional J_Ĝ = ℓ_Ĝ − ½Σ_k⟪∂_kĜ, Σ(ρ̂)∂_kĜ⟫. Trajectories
/// outside the admissible region map to +∞ (marker, not an error).
pub fn j_functional(
    traj: &DiscreteTrajectory,
    g: &FieldPair,
    e_axis: [f64; 2],
    gamma: &[DensityPair],
) -> Result<f64, PdeError> {
    if !validate_m0(traj).pass {
        return Ok(f64::INFINITY);
    }
    let lin = ell(traj, g, e_axis, gamma)?;
    Ok(lin - 0.5 * h1_inner(g, g, traj, 0.0))
}

/// Rate of the trajectory generated by tilt Ĥ: ½‖Ĥ‖²_{1,Σ(ρ̂)}.
pub fn rate_from_tilt(traj: &DiscreteTrajectory, h: &FieldPair) -> f64 {
    0.5 * h1_inner(h, h, traj, 0.0)
}

/// Variational lower bound: max of J over a nonempty test-field family.
pub fn rate_lower_bound(
    traj: &DiscreteTrajectory,
    family: &[FieldPair],
    e_axis: [f64; 2],
    gamma: &[DensityPair],
) -> Result<f64, PdeError> {
    assert!(!family.is_empty(), "test-field family must be nonempty");
    let mut best = f64::NEG_INFINITY;
    for g in family {
        best = best.max(j_functional(traj, g, e_axis, gamma)?);
    }
    Ok(best)
}

/// J maximized over scalar rescalings of a single shape: J(βG) = βℓ − β²q
/// peaks at β = ℓ/2q with value ℓ²/4q.
pub fn best_scaled_j(
    traj: &DiscreteTrajectory,
    g: &FieldPair,
    e_axis: [f64; 2],
    gamma: &[DensityPair],
) -> Result<f64, PdeError> {
    if !validate_m0(traj).pass {
        return Ok(f64::INFINITY);
    }
    let lin = ell(traj, g, e_axis, gamma)?;
    let q = 0.5 * h1_inner(g, g, traj, 0.0);
    if q <= 0.0 {
        return Ok(0.0);
    }
    Ok(lin * lin / (4.0 * q))
}

/// Admissibility report: exact pointwise check |m| ≤ φ ≤ 1 on every node of
/// every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M0Report {
    pub pass: bool,
    /// Largest violation of |m| ≤ φ ≤ 1 (0 when pass).
    pub worst_excess: f64,
    pub frame: Option<usize>,
    pub node: Option<usize>,
}

pub fn validate_m0(traj: &DiscreteTrajectory) -> M0Report {
    validate_m0_frames(&traj.fields)
}

/// Same check for any per-frame node fields (simulator snapshots included).
pub fn validate_m0_frames(frames: &[Vec<DensityPair>]) -> M0Report {
    let mut worst = 0.0f64;
    let mut at = None;
    for (k, frame) in frames.iter().enumerate() {
        for (j, rho) in frame.iter().enumerate() {
            let excess = (rho.m.abs() - rho.phi).max(rho.phi - 1.0).max(-rho.phi).max(0.0);
            if excess > worst {
                worst = excess;
                at = Some((k, j));
            }
        }
    }
    M0Report {
        pass: at.is_none(),
        worst_excess: worst,
        frame: at.map(|x| x.0),
        node: at.map(|x| x.1),
    }
}

/// Drift-comparison inequality on a tilted trajectory: the rate with drift
/// Ê is bounded by twice the drift-free rate (tilt absorbed through the
/// ramp) plus a quarter of the Σ-weight of Ê. Holds pointwise by positive
/// semidefiniteness, so quadrature preserves it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// ½‖Ĥ‖²_{1,Σ}: rate with the drift present.
    pub i_e: f64,
    /// ½‖Ĥ + ramp(Ê)‖²_{1,Σ}: rate of the same trajectory read drift-free.
    pub i_zero: f64,
    /// ⟪Ê, Σ(ρ̂)Ê⟫.
    pub e_weight: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

pub fn comparison_check(
    traj: &DiscreteTrajectory,
    h: &FieldPair,
    e_axis: [f64; 2],
    tol: f64,
) -> ComparisonReport {
    let i_e = rate_from_tilt(traj, h);
    let h_zero = h.plus(&FieldPair::drift_ramp(e_axis));
    let i_zero = rate_from_tilt(traj, &h_zero);
    let e_weight = const_field_weight(e_axis, traj, 0.0);
    let bound = 2.0 * i_zero + 0.25 * e_weight;
    ComparisonReport {
        i_e,
        i_zero,
        e_weight,
        bound,
        slack: bound - i_e,
        holds: i_e <= bound + tol,
    }
}

/// Left-vanishing test family: eigen shapes on each component with a
/// half-sine time factor.
pub fn eigen_time_family(n_modes: usize, t_end: f64, amp: f64) -> Vec<FieldPair> {
    let mut fam = Vec::new();
    for n1 in 0..n_modes {
        for comp in 0..2 {
            fam.push(FieldPair::single(
                comp,
                amp,
                SpaceShape::Eigen { n1 },
                TimeShape::HalfSine { t_end },
            ));
        }
    }
    fam
}

/// Compactly supported test family: even sine shapes (zero at both faces)
/// with half-sine time factors (zero at both time ends).
pub fn compact_family(n_modes: usize, t_end: f64, amp: f64) -> Vec<FieldPair> {
    let mut fam = Vec::new();
    for k in 1..=n_modes {
        for comp in 0..2 {
            fam.push(FieldPair::single(
                comp,
                amp,
                SpaceShape::Sine { k: 2 * k },
                TimeShape::HalfSine { t_end },
            ));
        }
    }
    fam
}

/// Scalar rescalings αĜ over a grid of α values.
pub fn alpha_family(g: &FieldPair, alphas: &[f64]) -> Vec<FieldPair> {
    alphas.iter().map(|&a| g.scaled(a)).collect()
}
