//! Bridging simulator output and solver output: coarse-graining empirical
//! site fields onto the solver grid, trajectory distances, and small
//! statistical helpers for replica studies.

use crate::kmc::Trajectory;
use crate::lattice::Lattice;
use crate::pde::{DiscreteTrajectory, SpaceGrid};
use crate::thermo::DensityPair;
use serde::{Deserialize, Serialize};

/// L¹ / L² / L∞ distances between two node fields. The two components are
/// combined additively for L¹, in quadrature for L², by max for L∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceTriple {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn field_distance(a: &[DensityPair], b: &[DensityPair], grid: &SpaceGrid) -> DistanceTriple {
    assert_eq!(a.len(), grid.num_nodes());
    assert_eq!(b.len(), grid.num_nodes());
    let abs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x.m - y.m).abs() + (x.phi - y.phi).abs())
        .collect();
    let sq: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x.m - y.m).powi(2) + (x.phi - y.phi).powi(2))
        .collect();
    let linf = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x.m - y.m).abs().max((x.phi - y.phi).abs()))
        .fold(0.0, f64::max);
    DistanceTriple {
        l1: grid.trapezoid(&abs),
        l2: grid.trapezoid(&sq).sqrt(),
        linf,
    }
}

/// Coarse-graining window half-width ℓ = ⌊εN⌋.
pub fn window_half_width(epsilon: f64, n: u32) -> usize {
    (epsilon * n as f64).floor().max(0.0) as usize
}

/// Average a per-site field over the axis window |x₁ − round(u_j·N)| ≤ ℓ
/// (truncated at the faces) and over the full transverse torus, for every
/// grid node u_j. The solver fields are transversally constant, so full
/// transverse averaging is the right projection.
pub fn coarse_grain_frame(
    frame: &[DensityPair],
    lat: &Lattice,
    grid: &SpaceGrid,
    ell: usize,
) -> Vec<DensityPair> {
    assert_eq!(frame.len(), lat.num_sites());
    let n = lat.n as i64;
    let tv = lat.transverse_volume();
    (0..grid.num_nodes())
        .map(|j| {
            let center = (grid.node(j) * n as f64).round() as i64;
            let lo = (center - ell as i64).max(-n);
            let hi = (center + ell as i64).min(n);
            let mut m = 0.0;
            let mut phi = 0.0;
            let mut count = 0.0;
            for x1 in lo..=hi {
                let row = (x1 + n) as usize * tv;
                for site in row..row + tv {
                    m += frame[site].m;
                    phi += frame[site].phi;
                    count += 1.0;
                }
            }
            DensityPair::new(m / count, phi / count)
        })
        .collect()
}

/// Project a full simulator trajectory onto the solver grid.
pub fn kmc_to_grid(traj: &Trajectory, grid: &SpaceGrid, ell: usize) -> DiscreteTrajectory {
    let fields = traj
        .frames
        .iter()
        .map(|frame| coarse_grain_frame(frame, &traj.lattice, grid, ell))
        .collect();
    DiscreteTrajectory::new(*grid, traj.times.clone(), fields)
}

/// Mean and standard error over replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaStats {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> ReplicaStats {
    let n = xs.len();
    assert!(n >= 1);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n >= 2 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    ReplicaStats { mean, se, n }
}

/// Least-squares slope of log y against log x (convergence-order estimate).
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}
