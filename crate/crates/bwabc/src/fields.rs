//! Analytic space-time field pairs.
//!
//! One type serves two roles:
//!
//! * tilt fields H = (H1, H2) driving the perturbed dynamics — required to
//!   vanish on the left face for all t;
//! * test fields G = (G1, G2) fed to the weak-form and cost functionals —
//!   either the left-vanishing class, or the compactly supported class
//!   (zero near both faces and near t ∈ {0, T}).
//!
//! Every shape is analytic, so time derivatives, axis gradients, and
//! Laplacians are exact; no finite-difference error enters the functionals
//! through the test functions.
//!
//! A field component is a sum of separable terms amp · X(u) · s(t). Sums and
//! scalar rescalings stay in the family, which is what the quadratic-in-G
//! algebra of the cost functional and the drift-absorbing ramp construction
//! rely on.

use serde::{Deserialize, Serialize};

/// Spatial factor X(u) on the axis u ∈ [-1, 1]. All shapes vanish at u = -1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpaceShape {
    /// Mixed-boundary eigenmode sin((n1+½)(π/2)(u+1)): zero at the left
    /// face, zero axis-derivative at the right face.
    Eigen { n1: usize },
    /// sin(kπ(u+1)/2), k ≥ 1: zero at the left face; also zero at the right
    /// face iff k is even (used for the compact-support class).
    Sine { k: usize },
    /// u + 1: zero at the left face, unit slope. Absorbs a constant drift
    /// into a tilt (H ↦ H + (E/2)·Ramp maps between drift conventions).
    Ramp,
}

impl SpaceShape {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SpaceShape::Eigen { .. } => (self.wavenumber() * (u + 1.0)).sin(),
            SpaceShape::Sine { k } => {
                debug_assert!(*k >= 1);
                (self.wavenumber() * (u + 1.0)).sin()
            }
            SpaceShape::Ramp => u + 1.0,
        }
    }

    pub fn d1(&self, u: f64) -> f64 {
        match self {
            SpaceShape::Eigen { .. } | SpaceShape::Sine { .. } => {
                let w = self.wavenumber();
                w * (w * (u + 1.0)).cos()
            }
            SpaceShape::Ramp => 1.0,
        }
    }

    pub fn lap(&self, u: f64) -> f64 {
        match self {
            SpaceShape::Eigen { .. } | SpaceShape::Sine { .. } => {
                let w = self.wavenumber();
                -w * w * (w * (u + 1.0)).sin()
            }
            SpaceShape::Ramp => 0.0,
        }
    }

    fn wavenumber(&self) -> f64 {
        match self {
            SpaceShape::Eigen { n1 } => (*n1 as f64 + 0.5) * std::f64::consts::PI / 2.0,
            SpaceShape::Sine { k } => *k as f64 * std::f64::consts::PI / 2.0,
            SpaceShape::Ramp => 0.0,
        }
    }

    /// Exactly zero at the right face u = +1?
    pub fn vanishes_right(&self) -> bool {
        match self {
            SpaceShape::Eigen { .. } => false,
            SpaceShape::Sine { k } => k % 2 == 0,
            SpaceShape::Ramp => false,
        }
    }
}

/// Temporal factor s(t) on [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeShape {
    /// s ≡ 1. Time-homogeneous tilts simulate exactly (no re-rating).
    Const,
    /// sin(πt/T): a half-wave vanishing at t = 0 and t = T.
    HalfSine { t_end: f64 },
}

impl TimeShape {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeShape::Const => 1.0,
            TimeShape::HalfSine { t_end } => (std::f64::consts::PI * t / t_end).sin(),
        }
    }

    pub fn dt(&self, t: f64) -> f64 {
        match self {
            TimeShape::Const => 0.0,
            TimeShape::HalfSine { t_end } => {
                let w = std::f64::consts::PI / t_end;
                w * (w * t).cos()
            }
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, TimeShape::Const)
    }

    pub fn vanishes_at_time_ends(&self) -> bool {
        matches!(self, TimeShape::HalfSine { .. })
    }
}

/// One separable term amp · X(u) · s(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldTerm {
    pub amp: f64,
    pub space: SpaceShape,
    pub time: TimeShape,
}

/// A pair of space-time fields (component 1 couples to the magnetization
/// channel, component 2 to the concentration channel), each a sum of
/// separable terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldPair {
    pub comps: [Vec<FieldTerm>; 2],
}

impl FieldPair {
    pub fn zero() -> Self {
        FieldPair::default()
    }

    /// Single-term field on one component.
    pub fn single(comp: usize, amp: f64, space: SpaceShape, time: TimeShape) -> Self {
        let mut f = FieldPair::zero();
        f.comps[comp].push(FieldTerm { amp, space, time });
        f
    }

    /// Eigenmode bump tilt: component i = amp_i · V_{n1}(u) · s(t).
    pub fn eigen_bump(amp1: f64, amp2: f64, n1: usize, time: TimeShape) -> Self {
        let mut f = FieldPair::zero();
        for (comp, amp) in [(0usize, amp1), (1usize, amp2)] {
            if amp != 0.0 {
                f.comps[comp].push(FieldTerm {
                    amp,
                    space: SpaceShape::Eigen { n1 },
                    time,
                });
            }
        }
        f
    }

    /// The ramp (E1/2, E2/2)·(u+1) whose gradient is half the axis drift;
    /// adding it to a tilt converts a drift-E problem into a drift-free one.
    pub fn drift_ramp(e_axis: [f64; 2]) -> Self {
        let mut f = FieldPair::zero();
        for (comp, e) in e_axis.iter().enumerate() {
            if *e != 0.0 {
                f.comps[comp].push(FieldTerm {
                    amp: 0.5 * e,
                    space: SpaceShape::Ramp,
                    time: TimeShape::Const,
                });
            }
        }
        f
    }

    pub fn is_zero(&self) -> bool {
        self.comps[0].is_empty() && self.comps[1].is_empty()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for comp in &mut out.comps {
            for term in comp.iter_mut() {
                term.amp *= alpha;
            }
            if alpha == 0.0 {
                comp.clear();
            }
        }
        out
    }

    pub fn plus(&self, other: &FieldPair) -> Self {
        let mut out = self.clone();
        for c in 0..2 {
            out.comps[c].extend(other.comps[c].iter().copied());
        }
        out
    }

    /// Component value H_i(t, u).
    pub fn eval(&self, comp: usize, t: f64, u: f64) -> f64 {
        self.comps[comp]
            .iter()
            .map(|term| term.amp * term.space.eval(u) * term.time.eval(t))
            .sum()
    }

    /// ∂_t H_i(t, u).
    pub fn dt(&self, comp: usize, t: f64, u: f64) -> f64 {
        self.comps[comp]
            .iter()
            .map(|term| term.amp * term.space.eval(u) * term.time.dt(t))
            .sum()
    }

    /// Axis gradient ∂_1 H_i(t, u).
    pub fn grad1(&self, comp: usize, t: f64, u: f64) -> f64 {
        self.comps[comp]
            .iter()
            .map(|term| term.amp * term.space.d1(u) * term.time.eval(t))
            .sum()
    }

    /// Laplacian ΔH_i(t, u) (axis direction only; terms are transversally
    /// constant).
    pub fn lap(&self, comp: usize, t: f64, u: f64) -> f64 {
        self.comps[comp]
            .iter()
            .map(|term| term.amp * term.space.lap(u) * term.time.eval(t))
            .sum()
    }

    /// Both components at once.
    pub fn eval_pair(&self, t: f64, u: f64) -> [f64; 2] {
        [self.eval(0, t, u), self.eval(1, t, u)]
    }

    pub fn grad1_pair(&self, t: f64, u: f64) -> [f64; 2] {
        [self.grad1(0, t, u), self.grad1(1, t, u)]
    }

    /// True for every shape in the family: all spatial factors vanish at the
    /// left face, the class constraint for both tilts and weak-form test
    /// functions.
    pub fn vanishes_left(&self) -> bool {
        true
    }

    /// Compact-support class: zero near both faces and at t ∈ {0, T}.
    pub fn is_compact_class(&self) -> bool {
        self.comps.iter().flatten().all(|term| {
            term.space.vanishes_right() && term.time.vanishes_at_time_ends()
        })
    }

    /// True when no term depends on time; such tilts need no re-rating.
    pub fn is_time_const(&self) -> bool {
        self.comps.iter().flatten().all(|term| term.time.is_const())
    }

    /// Largest |amp| over all terms (overflow guard for exponential rates).
    pub fn max_amp(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .map(|t| t.amp.abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigen_shape_boundary_values() {
        let v0 = SpaceShape::Eigen { n1: 0 };
        assert_eq!(v0.eval(-1.0), 0.0);
        // V_0(u) = sin(π(u+1)/4): flat at the right face.
        assert_abs_diff_eq!(v0.d1(1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v0.eval(1.0), 1.0, epsilon = 1e-15);
        // -V'' = λ V with λ = π²/16.
        let u = 0.37;
        assert_abs_diff_eq!(
            -v0.lap(u),
            std::f64::consts::PI.powi(2) / 16.0 * v0.eval(u),
            epsilon = 1e-14
        );
    }

    #[test]
    fn sine_shape_parity() {
        assert!(SpaceShape::Sine { k: 2 }.vanishes_right());
        assert!(!SpaceShape::Sine { k: 3 }.vanishes_right());
        assert_abs_diff_eq!(SpaceShape::Sine { k: 2 }.eval(1.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ramp_is_linear() {
        assert_eq!(SpaceShape::Ramp.eval(-1.0), 0.0);
        assert_eq!(SpaceShape::Ramp.eval(1.0), 2.0);
        assert_eq!(SpaceShape::Ramp.d1(0.3), 1.0);
        assert_eq!(SpaceShape::Ramp.lap(0.3), 0.0);
    }

    #[test]
    fn time_shapes() {
        let hs = TimeShape::HalfSine { t_end: 2.0 };
        assert_abs_diff_eq!(hs.eval(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hs.eval(2.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hs.eval(1.0), 1.0, epsilon = 1e-15);
        // d/dt sin(πt/T) at t = 0 is π/T.
        assert_abs_diff_eq!(hs.dt(0.0), std::f64::consts::PI / 2.0, epsilon = 1e-15);
        assert!(TimeShape::Const.is_const() && !hs.is_const());
    }

    #[test]
    fn pair_algebra() {
        let h = FieldPair::eigen_bump(0.5, -0.25, 0, TimeShape::Const);
        let scaled = h.scaled(2.0);
        let (t, u) = (0.3, 0.4);
        for c in 0..2 {
            assert_abs_diff_eq!(scaled.eval(c, t, u), 2.0 * h.eval(c, t, u), epsilon = 1e-15);
        }
        let sum = h.plus(&h.scaled(-1.0));
        for c in 0..2 {
            assert_abs_diff_eq!(sum.eval(c, t, u), 0.0, epsilon = 1e-15);
        }
        assert!(h.is_time_const());
        assert!(!h.is_compact_class());
        assert!(FieldPair::zero().is_zero());
        assert_eq!(h.max_amp(), 0.5);
    }

    #[test]
    fn drift_ramp_gradient_is_half_drift() {
        let ramp = FieldPair::drift_ramp([1.0, -0.4]);
        assert_abs_diff_eq!(ramp.grad1(0, 0.0, 0.2), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ramp.grad1(1, 0.0, 0.2), -0.2, epsilon = 1e-15);
        assert_eq!(ramp.eval(0, 0.0, -1.0), 0.0);
    }

    #[test]
    fn compact_class_detection() {
        let g = FieldPair::single(
            0,
            1.0,
            SpaceShape::Sine { k: 2 },
            TimeShape::HalfSine { t_end: 1.0 },
        );
        assert!(g.is_compact_class());
        let g = FieldPair::single(0, 1.0, SpaceShape::Sine { k: 2 }, TimeShape::Const);
        assert!(!g.is_compact_class());
    }
}
