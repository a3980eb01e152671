//! Single-site thermodynamics of the three-state spin.
//!
//! A site carries s ∈ {-1, 0, +1} with Gibbs weight exp(a1·s + a2·s²). The
//! two order parameters are the magnetization m = ⟨s⟩ and the concentration
//! φ = ⟨s²⟩. The map (a1, a2) ↦ (m, φ) is a bijection onto the open region
//! I = {|m| < φ < 1}; its inverse has logarithmic singularities on ∂I.
//!
//! The mobility (compressibility) matrix Σ(m, φ) couples the two macroscopic
//! equations; it is symmetric, positive semidefinite on the closure of I and
//! degenerate exactly on its boundary. Σ_δ is the regularization used when an
//! inverse is needed near ∂I; it dominates Σ for every δ ≥ 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Margin below which [`chem_potentials`] refuses to invert (distance to ∂I).
pub const DEFAULT_INTERIOR_MARGIN: f64 = 1e-9;

/// Chemical-potential pair (a1 couples to s, a2 to s²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChemPot {
    pub a1: f64,
    pub a2: f64,
}

/// Macroscopic density pair: magnetization m and concentration phi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPair {
    pub m: f64,
    pub phi: f64,
}

impl DensityPair {
    pub fn new(m: f64, phi: f64) -> Self {
        DensityPair { m, phi }
    }

    /// Strict interior of the admissible region: |m| + margin ≤ φ ≤ 1 − margin.
    pub fn is_interior(&self, margin: f64) -> bool {
        self.m.abs() + margin <= self.phi && self.phi <= 1.0 - margin
    }

    /// Closed admissible region |m| ≤ φ ≤ 1, up to `tol` slack.
    pub fn in_closure(&self, tol: f64) -> bool {
        self.m.abs() <= self.phi + tol && self.phi <= 1.0 + tol && self.phi >= -tol
    }

    /// Project onto the closed region; returns the sup-norm adjustment made.
    pub fn clamp_to_closure(&mut self) -> f64 {
        let phi0 = self.phi;
        let m0 = self.m;
        self.phi = self.phi.clamp(0.0, 1.0);
        self.m = self.m.clamp(-self.phi, self.phi);
        (self.phi - phi0).abs().max((self.m - m0).abs())
    }
}

/// 2×2 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2 {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        })
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a * v[0] + self.b * v[1],
            self.c * v[0] + self.d * v[1],
        ]
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// v·(M v), the quadratic form.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        let mv = self.mul_vec(v);
        v[0] * mv[0] + v[1] * mv[1]
    }

    /// Eigenvalues of the symmetrized matrix (used for PSD checks).
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let off = 0.5 * (self.b + self.c);
        let tr = self.a + self.d;
        let disc = (0.25 * (self.a - self.d).powi(2) + off * off).sqrt();
        [0.5 * tr - disc, 0.5 * tr + disc]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ThermoError {
    #[error("chemical potential out of numeric range")]
    ChemPotOutOfRange,
    #[error("profile on boundary of I")]
    OnBoundaryOfI,
    #[error("singular mobility; pass delta > 0")]
    SingularMobility,
}

/// Moments (m, φ) of the single-site Gibbs law with weights exp(a1·s + a2·s²).
///
/// m = 2 e^{a2} sinh(a1) / Z, φ = 2 e^{a2} cosh(a1) / Z,
/// Z = 1 + 2 e^{a2} cosh(a1). The result always lies in the open region I.
pub fn single_site_moments(a: ChemPot) -> Result<DensityPair, ThermoError> {
    if a.a1.abs() > 700.0 || a.a2.abs() > 700.0 {
        return Err(ThermoError::ChemPotOutOfRange);
    }
    let w = 2.0 * a.a2.exp();
    let z = 1.0 + w * a.a1.cosh();
    Ok(DensityPair {
        m: w * a.a1.sinh() / z,
        phi: w * a.a1.cosh() / z,
    })
}

/// Inverse of [`single_site_moments`] with the default interior margin.
pub fn chem_potentials(rho: DensityPair) -> Result<ChemPot, ThermoError> {
    chem_potentials_with_margin(rho, DEFAULT_INTERIOR_MARGIN)
}

/// Inverse of [`single_site_moments`]:
/// a1 = ½ log((φ+m)/(φ−m)), a2 = ½ log((φ²−m²)/(4(1−φ)²)).
///
/// Requires |m| + margin ≤ φ ≤ 1 − margin; the logarithms blow up on ∂I.
pub fn chem_potentials_with_margin(
    rho: DensityPair,
    margin: f64,
) -> Result<ChemPot, ThermoError> {
    if !rho.is_interior(margin) {
        return Err(ThermoError::OnBoundaryOfI);
    }
    let a1 = 0.5 * ((rho.phi + rho.m) / (rho.phi - rho.m)).ln();
    let a2 = 0.5 * ((rho.phi * rho.phi - rho.m * rho.m) / (4.0 * (1.0 - rho.phi).powi(2))).ln();
    Ok(ChemPot { a1, a2 })
}

/// Mobility (compressibility) matrix
/// Σ(m, φ) = 2 [[φ − m², m(1−φ)], [m(1−φ), φ(1−φ)]].
///
/// Symmetric, PSD on the closure of I, det Σ = 4(1−φ)(φ²−m²).
pub fn mobility(rho: DensityPair) -> Mat2 {
    mobility_reg(rho, 0.0)
}

/// Regularized mobility Σ_δ(m, φ) = 2 [[φ − m² + δ, m(1−φ)], [m(1−φ), (φ+δ)(1−φ+δ)]].
///
/// Σ_δ − Σ = 2 diag(δ, δ(1+δ)) ⪰ 0, so Σ_δ dominates Σ; δ = 0 recovers Σ.
pub fn mobility_reg(rho: DensityPair, delta: f64) -> Mat2 {
    let off = rho.m * (1.0 - rho.phi);
    Mat2 {
        a: 2.0 * (rho.phi - rho.m * rho.m + delta),
        b: 2.0 * off,
        c: 2.0 * off,
        d: 2.0 * (rho.phi + delta) * (1.0 - rho.phi + delta),
    }
}

/// Inverse of Σ (δ = 0) or of Σ_δ (δ > 0).
///
/// With δ = 0 the matrix is singular on ∂I (det Σ = 4(1−φ)(φ²−m²)); callers
/// near the boundary must pass δ > 0.
pub fn mobility_inverse(rho: DensityPair, delta: f64) -> Result<Mat2, ThermoError> {
    let sigma = mobility_reg(rho, delta);
    let det = sigma.det();
    if det.abs() < 1e-300 {
        return Err(ThermoError::SingularMobility);
    }
    Ok(sigma.inverse().ok_or(ThermoError::SingularMobility)?)
}

/// Smooth admissible profile u ↦ (θ1(u), θ2(u)) on the closed segment
/// [-1, 1] (constant in the transverse directions), with margin constants:
/// |θ1(u)| + c_star < θ2(u) ≤ big_c < 1 must hold on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    /// Lower margin c*: requires |θ1| + c* < θ2.
    pub c_star: f64,
    /// Upper cap C* < 1: requires θ2 ≤ C*.
    pub big_c: f64,
}

/// Analytic profile families. All are functions of the axis coordinate
/// u ∈ [-1, 1] only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// θ ≡ (m, φ).
    Constant { m: f64, phi: f64 },
    /// Linear interpolation between the two faces.
    Linear {
        m_left: f64,
        m_right: f64,
        phi_left: f64,
        phi_right: f64,
    },
    /// (m0 + m_amp·sin(π(u+1)/2), φ0 + phi_amp·sin(π(u+1)/2)):
    /// a half-sine bump vanishing at both faces.
    SineBump {
        m0: f64,
        phi0: f64,
        m_amp: f64,
        phi_amp: f64,
    },
    /// (m0 + m_amp·V(u), φ0 + phi_amp·V(u)) where V is the lowest
    /// mixed-boundary eigenmode sin((n+½)·(π/2)·(u+1)); V(-1) = 0 and
    /// V'(+1) = 0, so the bump is flux-free at the right face.
    EigenBump {
        m0: f64,
        phi0: f64,
        m_amp: f64,
        phi_amp: f64,
        n1: usize,
    },
}

impl Profile {
    pub fn new(kind: ProfileKind, c_star: f64, big_c: f64) -> Self {
        assert!(c_star >= 0.0, "margin c* must be nonnegative");
        assert!(big_c > 0.0 && big_c < 1.0, "cap C* must lie in (0, 1)");
        Profile { kind, c_star, big_c }
    }

    pub fn constant(m: f64, phi: f64) -> Self {
        Profile::new(ProfileKind::Constant { m, phi }, 0.05, 0.95)
    }

    pub fn eval(&self, u: f64) -> DensityPair {
        match &self.kind {
            ProfileKind::Constant { m, phi } => DensityPair::new(*m, *phi),
            ProfileKind::Linear {
                m_left,
                m_right,
                phi_left,
                phi_right,
            } => {
                let s = 0.5 * (u + 1.0);
                DensityPair::new(
                    m_left + s * (m_right - m_left),
                    phi_left + s * (phi_right - phi_left),
                )
            }
            ProfileKind::SineBump {
                m0,
                phi0,
                m_amp,
                phi_amp,
            } => {
                let b = (std::f64::consts::PI * (u + 1.0) / 2.0).sin();
                DensityPair::new(m0 + m_amp * b, phi0 + phi_amp * b)
            }
            ProfileKind::EigenBump {
                m0,
                phi0,
                m_amp,
                phi_amp,
                n1,
            } => {
                let k = (*n1 as f64 + 0.5) * std::f64::consts::PI / 2.0;
                let b = (k * (u + 1.0)).sin();
                DensityPair::new(m0 + m_amp * b, phi0 + phi_amp * b)
            }
        }
    }

    /// Exact first derivative in the axis coordinate, (θ1'(u), θ2'(u)).
    pub fn eval_d1(&self, u: f64) -> (f64, f64) {
        match &self.kind {
            ProfileKind::Constant { .. } => (0.0, 0.0),
            ProfileKind::Linear {
                m_left,
                m_right,
                phi_left,
                phi_right,
            } => (0.5 * (m_right - m_left), 0.5 * (phi_right - phi_left)),
            ProfileKind::SineBump { m_amp, phi_amp, .. } => {
                let k = std::f64::consts::PI / 2.0;
                let c = k * (k * (u + 1.0)).cos();
                (m_amp * c, phi_amp * c)
            }
            ProfileKind::EigenBump {
                m_amp,
                phi_amp,
                n1,
                ..
            } => {
                let k = (*n1 as f64 + 0.5) * std::f64::consts::PI / 2.0;
                let c = k * (k * (u + 1.0)).cos();
                (m_amp * c, phi_amp * c)
            }
        }
    }

    /// Exact second derivative in the axis coordinate, (θ1''(u), θ2''(u)).
    pub fn eval_lap(&self, u: f64) -> (f64, f64) {
        match &self.kind {
            ProfileKind::Constant { .. } | ProfileKind::Linear { .. } => (0.0, 0.0),
            ProfileKind::SineBump { m_amp, phi_amp, .. } => {
                let k = std::f64::consts::PI / 2.0;
                let s = -k * k * (k * (u + 1.0)).sin();
                (m_amp * s, phi_amp * s)
            }
            ProfileKind::EigenBump {
                m_amp,
                phi_amp,
                n1,
                ..
            } => {
                let k = (*n1 as f64 + 0.5) * std::f64::consts::PI / 2.0;
                let s = -k * k * (k * (u + 1.0)).sin();
                (m_amp * s, phi_amp * s)
            }
        }
    }

    /// Trace at the left face u = -1 (the Dirichlet datum).
    pub fn left_trace(&self) -> DensityPair {
        self.eval(-1.0)
    }

    /// Trace at the right face u = +1.
    pub fn right_trace(&self) -> DensityPair {
        self.eval(1.0)
    }
}

/// Outcome of [`validate_profile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileReport {
    pub pass: bool,
    /// min over the grid of min(θ2 − |θ1| − c*, C* − θ2); negative on failure.
    pub margin: f64,
    /// Grid point attaining the worst margin.
    pub worst_u: f64,
}

/// Check |θ1(u)| + c* < θ2(u) ≤ C* at every grid point; reports the worst
/// margin (negative margin = largest violation) and where it occurs.
pub fn validate_profile(p: &Profile, grid: &[f64]) -> ProfileReport {
    let mut margin = f64::INFINITY;
    let mut worst_u = f64::NAN;
    for &u in grid {
        let rho = p.eval(u);
        let lower = rho.phi - rho.m.abs() - p.c_star;
        let upper = p.big_c - rho.phi;
        let local = lower.min(upper);
        if local < margin {
            margin = local;
            worst_u = u;
        }
    }
    ProfileReport {
        pass: margin > 0.0,
        margin,
        worst_u,
    }
}

/// Uniformly spaced grid of n+1 nodes covering [-1, 1] (for profile checks).
pub fn axis_grid(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (0..=n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect()
}
