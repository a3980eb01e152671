//! Eigenbasis of the Laplacian under the mixed boundary conditions (zero
//! value on the left face, zero slope on the right face, periodic in the
//! transverse directions) and the exact heat-flow solution built from it.

use super::{PdeError, SpaceGrid};
use crate::thermo::{DensityPair, Profile};
use std::f64::consts::PI;

/// Number of intervals of the internal quadrature grid used for spectral
/// coefficients; deliberately much finer than any solver grid so the two
/// discretizations stay decorrelated.
const QUAD_INTERVALS: usize = 8192;

/// One eigenmode of -Δ with the mixed boundary conditions: a product of a
/// sin((n₁+½)(π/2)(u₁+1)) axis factor and sin(π(n_i+1)(u_i+1)) transverse
/// factors; eigenvalue = sum of squared wavenumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    pub n: Vec<usize>,
    /// Per-direction wavenumbers k_i.
    pub wavenumbers: Vec<f64>,
    /// Per-direction eigenvalue contributions k_i².
    pub directional: Vec<f64>,
    /// Total eigenvalue λ_n.
    pub lambda: f64,
}

/// Construct the eigenmode for a multi-index (n₁, n₂, …).
pub fn eigenmode(n: &[usize]) -> EigenMode {
    assert!(!n.is_empty(), "mode index must have at least one entry");
    let mut wavenumbers = Vec::with_capacity(n.len());
    wavenumbers.push((n[0] as f64 + 0.5) * PI / 2.0);
    for &ni in &n[1..] {
        wavenumbers.push(PI * (ni as f64 + 1.0));
    }
    let directional: Vec<f64> = wavenumbers.iter().map(|k| k * k).collect();
    EigenMode {
        n: n.to_vec(),
        lambda: directional.iter().sum(),
        wavenumbers,
        directional,
    }
}

impl EigenMode {
    pub fn dim(&self) -> usize {
        self.n.len()
    }

    /// Value at a point (u₁, …, u_d), each coordinate in [-1, 1].
    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        self.wavenumbers
            .iter()
            .zip(u)
            .map(|(k, ui)| (k * (ui + 1.0)).sin())
            .product()
    }

    /// Partial derivative along direction `axis`.
    pub fn grad(&self, axis: usize, u: &[f64]) -> f64 {
        self.wavenumbers
            .iter()
            .zip(u)
            .enumerate()
            .map(|(i, (k, ui))| {
                if i == axis {
                    k * (k * (ui + 1.0)).cos()
                } else {
                    (k * (ui + 1.0)).sin()
                }
            })
            .product()
    }

    /// Axis-only evaluation for d = 1 work.
    pub fn eval1(&self, u: f64) -> f64 {
        (self.wavenumbers[0] * (u + 1.0)).sin()
    }
}

fn fine_nodes() -> Vec<f64> {
    (0..=QUAD_INTERVALS)
        .map(|q| -1.0 + 2.0 * q as f64 / QUAD_INTERVALS as f64)
        .collect()
}

fn fine_trapezoid(values: &[f64]) -> f64 {
    let h = 2.0 / QUAD_INTERVALS as f64;
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// Exact solution of ∂_t v = Δv on [-1, 1] with v(-1) fixed, ∂₁v(1) = 0,
/// initial datum γ̂, expanded through a lift θ̂ (a profile with the same left
/// trace as the boundary datum and zero right-face slope):
///
///   v(t) = θ̂ + Σ_n e^{-λ_n t} ⟨γ̂-θ̂, V_n⟩ V_n
///              + Σ_n (1-e^{-λ_n t})/λ_n ⟨Δθ̂, V_n⟩ V_n,
///
/// truncated at mode index `n_max` (inclusive) per component. Spectral
/// coefficients use a fine internal quadrature grid; output is sampled on
/// `grid`. Truncation error decays like e^{-λ_n t}, so accuracy at t = 0 is
/// limited for data outside the span of the retained modes.
pub fn heat_spectral(
    gamma: &Profile,
    lift: &Profile,
    t: f64,
    n_max: usize,
    grid: &SpaceGrid,
) -> Result<Vec<DensityPair>, PdeError> {
    if n_max < 1 {
        return Err(PdeError::ModeCutoffTooSmall);
    }
    let d1_right = lift.eval_d1(1.0);
    if d1_right.0.abs() > 1e-9 || d1_right.1.abs() > 1e-9 {
        return Err(PdeError::BadLift);
    }

    let fine = fine_nodes();
    let gamma_f: Vec<DensityPair> = fine.iter().map(|&u| gamma.eval(u)).collect();
    let lift_f: Vec<DensityPair> = fine.iter().map(|&u| lift.eval(u)).collect();
    let lift_lap_f: Vec<(f64, f64)> = fine.iter().map(|&u| lift.eval_lap(u)).collect();

    let mut out: Vec<DensityPair> = (0..grid.num_nodes())
        .map(|j| lift.eval(grid.node(j)))
        .collect();

    for n1 in 0..=n_max {
        let mode = eigenmode(&[n1]);
        let v_f: Vec<f64> = fine.iter().map(|&u| mode.eval1(u)).collect();
        let decay = (-mode.lambda * t).exp();
        let force_weight = (1.0 - decay) / mode.lambda;

        let c_m = fine_trapezoid(
            &v_f.iter()
                .zip(gamma_f.iter().zip(&lift_f))
                .map(|(v, (g, l))| v * (g.m - l.m))
                .collect::<Vec<_>>(),
        );
        let c_phi = fine_trapezoid(
            &v_f.iter()
                .zip(gamma_f.iter().zip(&lift_f))
                .map(|(v, (g, l))| v * (g.phi - l.phi))
                .collect::<Vec<_>>(),
        );
        let d_m = fine_trapezoid(
            &v_f.iter()
                .zip(&lift_lap_f)
                .map(|(v, lap)| v * lap.0)
                .collect::<Vec<_>>(),
        );
        let d_phi = fine_trapezoid(
            &v_f.iter()
                .zip(&lift_lap_f)
                .map(|(v, lap)| v * lap.1)
                .collect::<Vec<_>>(),
        );

        for (j, rho) in out.iter_mut().enumerate() {
            let v = mode.eval1(grid.node(j));
            rho.m += (decay * c_m + force_weight * d_m) * v;
            rho.phi += (decay * c_phi + force_weight * d_phi) * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::ProfileKind;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lowest_mode_values() {
        let mode = eigenmode(&[0]);
        assert_abs_diff_eq!(mode.lambda, PI * PI / 16.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mode.eval1(-1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mode.grad(0, &[1.0]), 0.0, epsilon = 1e-14);
        // V(u) = sin(π(u+1)/4).
        assert_abs_diff_eq!(mode.eval1(0.3), (PI * 1.3 / 4.0).sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(mode.eval1(1.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn modes_orthonormal() {
        let fine = fine_nodes();
        for n in 0..=5usize {
            for m in 0..=5usize {
                let vn = eigenmode(&[n]);
                let vm = eigenmode(&[m]);
                let prod: Vec<f64> = fine.iter().map(|&u| vn.eval1(u) * vm.eval1(u)).collect();
                let want = if n == m { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(fine_trapezoid(&prod), want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn transverse_mode_structure() {
        let mode = eigenmode(&[1, 2]);
        let k1 = 1.5 * PI / 2.0;
        let k2 = 3.0 * PI;
        assert_abs_diff_eq!(mode.lambda, k1 * k1 + k2 * k2, epsilon = 1e-12);
        // Product structure and transverse periodicity (period 2).
        let u = [0.37, -0.41];
        let want = (k1 * (u[0] + 1.0)).sin() * (k2 * (u[1] + 1.0)).sin();
        assert_abs_diff_eq!(mode.eval(&u), want, epsilon = 1e-14);
        assert_abs_diff_eq!(mode.eval(&[0.37, -0.41 + 2.0]), want, epsilon = 1e-10);
        // 2-d orthonormality for a pair of distinct modes.
        let other = eigenmode(&[1, 3]);
        let q = 512;
        let mut ip = 0.0;
        let mut sq = 0.0;
        for i in 0..q {
            for j in 0..q {
                let p = [
                    -1.0 + 2.0 * (i as f64 + 0.5) / q as f64,
                    -1.0 + 2.0 * (j as f64 + 0.5) / q as f64,
                ];
                ip += mode.eval(&p) * other.eval(&p);
                sq += mode.eval(&p) * mode.eval(&p);
            }
        }
        let cell = (2.0 / q as f64) * (2.0 / q as f64);
        assert_abs_diff_eq!(ip * cell, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sq * cell, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn eigen_relation_at_quadrature_nodes() {
        // Central second difference reproduces -λV to O(h²).
        let h = 1e-4;
        for n in 0..=5usize {
            let mode = eigenmode(&[n]);
            for &u in &[-0.7, -0.2, 0.4, 0.9] {
                let lap = (mode.eval1(u + h) - 2.0 * mode.eval1(u) + mode.eval1(u - h)) / (h * h);
                assert_abs_diff_eq!(-lap, mode.lambda * mode.eval1(u), epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn gradient_identity_on_eigen_combinations() {
        // For f, g in the span of the modes: ∫ f'g' = Σ_n λ_n ⟨f,V_n⟩⟨g,V_n⟩.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let modes: Vec<EigenMode> = (0..=8).map(|n| eigenmode(&[n])).collect();
        let cf: Vec<f64> = (0..modes.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cg: Vec<f64> = (0..modes.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fine = fine_nodes();
        let grad_prod: Vec<f64> = fine
            .iter()
            .map(|&u| {
                let df: f64 = modes
                    .iter()
                    .zip(&cf)
                    .map(|(m, c)| c * m.grad(0, &[u]))
                    .sum();
                let dg: f64 = modes
                    .iter()
                    .zip(&cg)
                    .map(|(m, c)| c * m.grad(0, &[u]))
                    .sum();
                df * dg
            })
            .collect();
        let lhs = fine_trapezoid(&grad_prod);
        let rhs: f64 = modes
            .iter()
            .zip(cf.iter().zip(&cg))
            .map(|(m, (a, b))| m.lambda * a * b)
            .sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-6);
    }

    #[test]
    fn harmonic_lift_is_stationary() {
        // γ̂ = θ̂ with Δθ̂ = 0: the solution is θ̂ for all times.
        let theta = Profile::constant(0.1, 0.6);
        let grid = SpaceGrid::new(40);
        for &t in &[0.0, 0.5, 3.0] {
            let field = heat_spectral(&theta, &theta, t, 32, &grid).unwrap();
            for (j, rho) in field.iter().enumerate() {
                assert_abs_diff_eq!(rho.m, 0.1, epsilon = 1e-12);
                assert_abs_diff_eq!(rho.phi, 0.6, epsilon = 1e-12);
                let _ = j;
            }
        }
    }

    fn bump(amp_m: f64, amp_phi: f64) -> Profile {
        Profile::new(
            ProfileKind::EigenBump {
                m0: 0.0,
                phi0: 0.5,
                m_amp: amp_m,
                phi_amp: amp_phi,
                n1: 0,
            },
            0.01,
            0.95,
        )
    }

    #[test]
    fn single_mode_decays_at_its_eigenrate() {
        // γ̂ - θ̂ = amp·V₀ decays by e^{-π²t/16}.
        let gamma = bump(0.05, 0.1);
        let theta = Profile::constant(0.0, 0.5);
        let grid = SpaceGrid::new(64);
        let t = 0.8;
        let decay = (-PI * PI * t / 16.0).exp();
        let field = heat_spectral(&gamma, &theta, t, 48, &grid).unwrap();
        let mode = eigenmode(&[0]);
        for (j, rho) in field.iter().enumerate() {
            let v = mode.eval1(grid.node(j));
            assert_abs_diff_eq!(rho.m, 0.05 * decay * v, epsilon = 1e-9);
            assert_abs_diff_eq!(rho.phi, 0.5 + 0.1 * decay * v, epsilon = 1e-9);
        }
    }

    #[test]
    fn forcing_path_matches_decay_path() {
        // Using the bump itself as the lift exercises the Δθ̂ forcing term;
        // the result must agree with the plain-decay expansion around the
        // constant lift.
        let gamma = bump(0.04, 0.08);
        let flat = Profile::constant(0.0, 0.5);
        let grid = SpaceGrid::new(32);
        for &t in &[0.1, 0.7] {
            let via_force = heat_spectral(&gamma, &gamma, t, 48, &grid).unwrap();
            let via_decay = heat_spectral(&gamma, &flat, t, 48, &grid).unwrap();
            for (a, b) in via_force.iter().zip(&via_decay) {
                assert_abs_diff_eq!(a.m, b.m, epsilon = 1e-9);
                assert_abs_diff_eq!(a.phi, b.phi, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn long_time_envelope() {
        let gamma = Profile::new(
            ProfileKind::SineBump {
                m0: 0.0,
                phi0: 0.5,
                m_amp: 0.1,
                phi_amp: 0.15,
            },
            0.01,
            0.95,
        );
        let theta = Profile::constant(0.0, 0.5);
        let grid = SpaceGrid::new(32);
        let lambda0 = PI * PI / 16.0;
        for &t in &[1.0, 2.0, 4.0] {
            let field = heat_spectral(&gamma, &theta, t, 48, &grid).unwrap();
            let sup = field
                .iter()
                .map(|r| r.m.abs().max((r.phi - 0.5).abs()))
                .fold(0.0, f64::max);
            assert!(
                sup <= 1.0 * (-lambda0 * t).exp(),
                "t = {t}: sup {sup} above envelope"
            );
        }
    }

    #[test]
    fn guards() {
        let theta = Profile::constant(0.0, 0.5);
        let grid = SpaceGrid::new(8);
        assert_eq!(
            heat_spectral(&theta, &theta, 0.1, 0, &grid).unwrap_err(),
            PdeError::ModeCutoffTooSmall
        );
        // A sine bump has slope -π/2·amp at the right face: invalid lift.
        let bad_lift = Profile::new(
            ProfileKind::SineBump {
                m0: 0.0,
                phi0: 0.5,
                m_amp: 0.0,
                phi_amp: 0.1,
            },
            0.01,
            0.95,
        );
        assert_eq!(
            heat_spectral(&theta, &bad_lift, 0.1, 8, &grid).unwrap_err(),
            PdeError::BadLift
        );
    }
}
