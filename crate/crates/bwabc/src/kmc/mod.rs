//! Exact continuous-time simulation of the spin system.
//!
//! The generator has three parts: bulk exchanges at rate N²·C(x,y;σ), left
//! reservoir flips at rate N^{2-a_l}·c(x;σ), right reservoir flips at rate
//! N^{2-a_r}·c(x;σ). With a tilt field H the bulk rates carry the extra
//! factor exp(-Σ_i Δσ^i ΔH_i) (ΔH between the two sites) and the boundary
//! rates the factor exp(-Σ_i Δ(σ^i) H_i) evaluated at the flipped site, as
//! the tilted boundary generator is written.
//!
//! Sampling is Gillespie (direct method) over a sum tree of all event rates:
//! waiting time exponential in the total rate, event proportional to its
//! rate, O(log M) per event with only locally affected rates recomputed.
//! Time-dependent tilts are handled by freezing the rates on a fixed
//! re-rating grid of spacing min(0.1/N², T/10⁴) and refreshing the table at
//! each tick; redrawing the waiting time at a tick is exact for the frozen
//! process by memorylessness. Time-constant tilts skip re-rating entirely.

mod sum_tree;

pub use sum_tree::SumTree;

use crate::fields::FieldPair;
use crate::lattice::{
    boundary_events_for, exchange_rate_local, Face, Lattice, LatticeError, ModelParams,
    SpinConfig,
};
use crate::thermo::{DensityPair, Profile};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use thiserror::Error;

/// Rebuild the sum tree after this many local updates to cap rounding drift.
const REBUILD_INTERVAL: u64 = 1_000_000;

/// Flag runs whose expected boundary event count is below this as
/// statistically unverifiable at that face.
pub const WEAK_BOUNDARY_STATS_THRESHOLD: u64 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum KmcError {
    #[error("initial profile outside I")]
    InitialProfileOutsideI,
    #[error("snapshot times must lie in [0, T] and be sorted")]
    BadSnapshots,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Full simulation parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub model: ModelParams,
    /// Optional tilt field (must vanish on the left face, which every
    /// [`FieldPair`] shape does).
    pub tilt: Option<FieldPair>,
    /// Macroscopic time horizon T (the generator already carries the N²
    /// speedup, so no further rescaling).
    pub horizon: f64,
    /// Sorted snapshot times within [0, T].
    pub snapshots: Vec<f64>,
    pub seed: u64,
    /// Replica index: selects an independent RNG stream for the same seed.
    pub stream: u64,
    /// Disable reservoir events (bulk-only runs conserve Σσ and Σσ² exactly).
    pub boundary_enabled: bool,
}

impl SimParams {
    pub fn new(model: ModelParams, horizon: f64) -> Self {
        SimParams {
            model,
            tilt: None,
            horizon,
            snapshots: Vec::new(),
            seed: 0,
            stream: 0,
            boundary_enabled: true,
        }
    }

    /// Stable hash of the parameter set (recorded in trajectory metadata).
    pub fn params_hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("params serialize");
        let mut h = DefaultHasher::new();
        json.hash(&mut h);
        h.finish()
    }

    /// Spacing of the rate-freezing grid for time-dependent tilts.
    pub fn rerate_interval(&self, n: u32) -> f64 {
        (0.1 / (n as f64 * n as f64)).min(self.horizon / 1e4)
    }
}

/// Counter-based splittable stream: ChaCha8 keyed by seed, stream selected
/// by the replica index.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Recorded run: snapshot times, per-site empirical pairs, and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub lattice: Lattice,
    pub times: Vec<f64>,
    /// frames[k][site] = (σ, σ²) at times[k].
    pub frames: Vec<Vec<DensityPair>>,
    pub meta: TrajectoryMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub n: u32,
    pub d: u32,
    pub seed: u64,
    pub stream: u64,
    pub params_hash: u64,
    pub events: u64,
    pub boundary_events_left: u64,
    pub boundary_events_right: u64,
    /// Set when the expected statistics at a face are too thin to verify
    /// convergence there (slowed faces with N^{2-a} small).
    pub weak_left_boundary_stats: bool,
    pub weak_right_boundary_stats: bool,
}

/// What a single step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Exchange { a: usize, b: usize },
    BoundaryFlip { site: usize, new_spin: i8 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub dt: f64,
    pub kind: EventKind,
}

/// All enabled events with their current rates.
///
/// Slot layout: one slot per bond (rate 0 when the two spins are equal, so
/// equal-spin exchanges carry no probability), then two slots per boundary
/// site (the two outgoing reservoir transitions of the current spin).
pub struct EventTable {
    tree: SumTree,
    bonds: Vec<(usize, usize, usize)>,
    /// Incident bond slot ids per site.
    bonds_at: Vec<Vec<u32>>,
    /// Boundary sites in slot order; slots n_bonds + 2k, n_bonds + 2k + 1.
    boundary_sites: Vec<(usize, Face)>,
    /// site -> boundary block index.
    boundary_block_of: Vec<Option<u32>>,
    n_bond_slots: usize,
    /// Time at which tilted rates were last frozen.
    pub frozen_t: f64,
    updates: u64,
}

impl EventTable {
    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn n_events(&self) -> usize {
        self.tree.len()
    }

    pub fn rate(&self, slot: usize) -> f64 {
        self.tree.get(slot)
    }

    /// Number of bond slots with positive rate.
    pub fn active_exchange_events(&self) -> usize {
        (0..self.n_bond_slots).filter(|&i| self.tree.get(i) > 0.0).count()
    }

    /// Number of boundary slots with positive rate.
    pub fn active_boundary_events(&self) -> usize {
        (self.n_bond_slots..self.tree.len())
            .filter(|&i| self.tree.get(i) > 0.0)
            .count()
    }

    pub fn rebuild(&mut self) -> f64 {
        self.tree.rebuild()
    }
}

/// Build the full event table for configuration `sigma` at time `t`
/// (t only matters for time-dependent tilts).
pub fn build_event_table(sigma: &SpinConfig, p: &SimParams, t: f64) -> EventTable {
    let lat = sigma.lattice;
    let bonds = lat.bonds();
    let boundary_sites = if p.boundary_enabled {
        lat.boundary_sites()
    } else {
        Vec::new()
    };

    let mut bonds_at = vec![Vec::new(); lat.num_sites()];
    for (slot, &(a, b, _)) in bonds.iter().enumerate() {
        bonds_at[a].push(slot as u32);
        bonds_at[b].push(slot as u32);
    }
    let mut boundary_block_of = vec![None; lat.num_sites()];
    for (k, &(site, _)) in boundary_sites.iter().enumerate() {
        boundary_block_of[site] = Some(k as u32);
    }

    let n_bond_slots = bonds.len();
    let n_slots = n_bond_slots + 2 * boundary_sites.len();
    let mut table = EventTable {
        tree: SumTree::new(n_slots.max(1)),
        bonds,
        bonds_at,
        boundary_sites,
        boundary_block_of,
        n_bond_slots,
        frozen_t: t,
        updates: 0,
    };
    refresh_all(&mut table, sigma, p, &lat, t);
    table
}

fn refresh_all(table: &mut EventTable, sigma: &SpinConfig, p: &SimParams, lat: &Lattice, t: f64) {
    table.frozen_t = t;
    for slot in 0..table.n_bond_slots {
        let r = bond_rate(table, slot, sigma, p, lat, t);
        table.tree.set(slot, r);
    }
    for k in 0..table.boundary_sites.len() {
        set_boundary_rates(table, k, sigma, p, lat, t);
    }
}

fn bond_rate(
    table: &EventTable,
    slot: usize,
    sigma: &SpinConfig,
    p: &SimParams,
    lat: &Lattice,
    t: f64,
) -> f64 {
    let (a, b, axis) = table.bonds[slot];
    let sa = sigma.get(a);
    let sb = sigma.get(b);
    if sa == sb {
        return 0.0;
    }
    let n2 = (lat.n as f64) * (lat.n as f64);
    let base = exchange_rate_local(sa, sb, p.model.e1[axis], p.model.e2[axis], 1, lat.n);
    let tilt_mult = match &p.tilt {
        Some(h) if !h.is_zero() => {
            // exp(-Σ_i Δσ^i [H_i(t, u_b) - H_i(t, u_a)]); the tilt is
            // transversally constant, so only axis bonds see a difference.
            if axis == 0 {
                let ua = lat.macro_axis(a);
                let ub = lat.macro_axis(b);
                let d1 = (sb - sa) as f64;
                let d2 = (sb as i64 * sb as i64 - sa as i64 * sa as i64) as f64;
                let dh1 = h.eval(0, t, ub) - h.eval(0, t, ua);
                let dh2 = h.eval(1, t, ub) - h.eval(1, t, ua);
                (-(d1 * dh1 + d2 * dh2)).exp()
            } else {
                1.0
            }
        }
        _ => 1.0,
    };
    n2 * base * tilt_mult
}

fn set_boundary_rates(
    table: &mut EventTable,
    block: usize,
    sigma: &SpinConfig,
    p: &SimParams,
    lat: &Lattice,
    t: f64,
) {
    let (site, face) = table.boundary_sites[block];
    let spin = sigma.get(site);
    let datum = p.model.boundary_datum(face);
    let events = boundary_events_for(spin, datum).expect("validated boundary datum");
    let speed = p.model.boundary_speed(face, lat.n);
    let u = lat.macro_axis(site);
    for (j, (target, base)) in events.iter().enumerate() {
        let tilt_mult = match &p.tilt {
            Some(h) if !h.is_zero() => {
                // Boundary tilt factor exp{H-energy(flipped) - H-energy(σ)}
                // = exp(-Σ_i [(s')^i - σ^i] H_i(t, u)); identically 1 on the
                // left face where H vanishes.
                let d1 = (target - spin) as f64;
                let d2 = (*target as i64 * *target as i64 - spin as i64 * spin as i64) as f64;
                (-(d1 * h.eval(0, t, u) + d2 * h.eval(1, t, u))).exp()
            }
            _ => 1.0,
        };
        table
            .tree
            .set(table.n_bond_slots + 2 * block + j, speed * base * tilt_mult);
    }
}

/// What the slot's target spin is right now (boundary slots depend on the
/// current spin at the site).
fn boundary_slot_target(
    table: &EventTable,
    block: usize,
    j: usize,
    sigma: &SpinConfig,
    p: &SimParams,
) -> i8 {
    let (site, face) = table.boundary_sites[block];
    let datum = p.model.boundary_datum(face);
    boundary_events_for(sigma.get(site), datum).expect("validated boundary datum")[j].0
}

/// One simulation: owns the configuration, the event table, the clock, and
/// the RNG stream.
pub struct Engine {
    pub sigma: SpinConfig,
    pub t: f64,
    pub params: SimParams,
    table: EventTable,
    lat: Lattice,
    rng: ChaCha8Rng,
    pub events: u64,
    pub boundary_events_left: u64,
    pub boundary_events_right: u64,
}

impl Engine {
    pub fn new(initial: SpinConfig, params: SimParams) -> Engine {
        let lat = initial.lattice;
        let rng = stream_rng(params.seed, params.stream);
        let table = build_event_table(&initial, &params, 0.0);
        Engine {
            sigma: initial,
            t: 0.0,
            params,
            table,
            lat,
            rng,
            events: 0,
            boundary_events_left: 0,
            boundary_events_right: 0,
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.table.total_rate()
    }

    pub fn table(&self) -> &EventTable {
        &self.table
    }

    /// Draw the next waiting time (∞ when the state is absorbing).
    fn draw_dt(&mut self) -> f64 {
        let total = self.table.total_rate();
        if total <= 0.0 {
            return f64::INFINITY;
        }
        let u: f64 = self.rng.gen();
        -(1.0 - u).ln() / total
    }

    /// Advance by one event. Returns None from an absorbing state (total
    /// rate zero — impossible with an interior reservoir datum enabled).
    pub fn step(&mut self) -> Option<StepEvent> {
        let dt = self.draw_dt();
        if !dt.is_finite() {
            return None;
        }
        let kind = self.fire();
        self.t += dt;
        Some(StepEvent { dt, kind })
    }

    /// Sample and apply one event without advancing the clock (the simulate
    /// loop owns the clock so it can cut windows at snapshots/re-rating).
    fn fire(&mut self) -> EventKind {
        let r = self.rng.gen::<f64>() * self.table.total_rate();
        let slot = self.table.tree.sample(r);
        let kind = if slot < self.table.n_bond_slots {
            let (a, b, _) = self.table.bonds[slot];
            self.sigma.exchange(a, b);
            self.refresh_site(a);
            self.refresh_site(b);
            EventKind::Exchange { a, b }
        } else {
            let rel = slot - self.table.n_bond_slots;
            let (block, j) = (rel / 2, rel % 2);
            let new_spin = boundary_slot_target(&self.table, block, j, &self.sigma, &self.params);
            let (site, face) = self.table.boundary_sites[block];
            self.sigma.set(site, new_spin);
            self.refresh_site(site);
            match face {
                Face::Left => self.boundary_events_left += 1,
                Face::Right => self.boundary_events_right += 1,
            }
            EventKind::BoundaryFlip { site, new_spin }
        };
        self.events += 1;
        self.table.updates += 1;
        if self.table.updates % REBUILD_INTERVAL == 0 {
            self.table.rebuild();
        }
        kind
    }

    /// Recompute every rate that reads the spin at `site`.
    fn refresh_site(&mut self, site: usize) {
        let t = self.table.frozen_t;
        for i in 0..self.table.bonds_at[site].len() {
            let slot = self.table.bonds_at[site][i] as usize;
            let r = bond_rate(&self.table, slot, &self.sigma, &self.params, &self.lat, t);
            self.table.tree.set(slot, r);
        }
        if let Some(block) = self.table.boundary_block_of[site] {
            set_boundary_rates(
                &mut self.table,
                block as usize,
                &self.sigma,
                &self.params,
                &self.lat,
                t,
            );
        }
    }

    /// Refreeze all rates at time `t` (re-rating tick for time-dependent
    /// tilts).
    pub fn refreeze(&mut self, t: f64) {
        let sigma = std::mem::replace(&mut self.sigma, SpinConfig::all_zero(self.lat));
        refresh_all(&mut self.table, &sigma, &self.params, &self.lat, t);
        self.sigma = sigma;
    }
}

/// Run the full simulation: exact Gillespie over [0, T], recording the
/// empirical pair field at each snapshot time. Deterministic given
/// (initial, params): the same seed and stream reproduce the trajectory
/// byte for byte.
pub fn simulate(initial: SpinConfig, p: SimParams) -> Result<(Trajectory, SpinConfig), KmcError> {
    let horizon = p.horizon;
    if p.snapshots.windows(2).any(|w| w[0] > w[1])
        || p.snapshots.iter().any(|&s| !(0.0..=horizon).contains(&s))
    {
        return Err(KmcError::BadSnapshots);
    }

    let lat = initial.lattice;
    // Surface an invalid reservoir datum before running.
    if p.boundary_enabled {
        for face in [Face::Left, Face::Right] {
            let rho = p.model.boundary_datum(face);
            if !(rho.m.abs() < rho.phi && rho.phi < 1.0) {
                return Err(KmcError::Lattice(LatticeError::BoundaryDatumOutsideI));
            }
        }
    }

    let rerate = match &p.tilt {
        Some(h) if !h.is_time_const() => Some(p.rerate_interval(lat.n)),
        _ => None,
    };
    let params_hash = p.params_hash();
    let meta_seed = (p.seed, p.stream);

    let mut engine = Engine::new(initial, p);
    let mut times = Vec::new();
    let mut frames = Vec::new();
    let mut snap_i = 0;
    let snapshots = engine.params.snapshots.clone();
    let mut next_rerate = rerate.map(|d| d).unwrap_or(f64::INFINITY);

    loop {
        // Record any snapshots due at the current clock.
        while snap_i < snapshots.len() && snapshots[snap_i] <= engine.t {
            times.push(snapshots[snap_i]);
            frames.push(crate::lattice::empirical_fields(&engine.sigma));
            snap_i += 1;
        }
        if engine.t >= horizon {
            break;
        }
        let next_snapshot = snapshots.get(snap_i).copied().unwrap_or(f64::INFINITY);
        let window_end = horizon.min(next_snapshot).min(next_rerate);

        let dt = engine.draw_dt();
        if engine.t + dt < window_end {
            engine.t += dt;
            engine.fire();
        } else {
            // Cut the clock at the window boundary; by memorylessness the
            // discarded residual waiting time is statistically irrelevant.
            engine.t = window_end;
            if engine.t >= next_rerate {
                engine.refreeze(engine.t);
                next_rerate += rerate.unwrap();
            }
        }
    }

    let expected_left = expected_boundary_events(&engine, Face::Left, horizon);
    let expected_right = expected_boundary_events(&engine, Face::Right, horizon);
    let meta = TrajectoryMeta {
        n: lat.n,
        d: lat.d,
        seed: meta_seed.0,
        stream: meta_seed.1,
        params_hash,
        events: engine.events,
        boundary_events_left: engine.boundary_events_left,
        boundary_events_right: engine.boundary_events_right,
        weak_left_boundary_stats: expected_left < WEAK_BOUNDARY_STATS_THRESHOLD as f64,
        weak_right_boundary_stats: expected_right < WEAK_BOUNDARY_STATS_THRESHOLD as f64,
    };
    Ok((
        Trajectory {
            lattice: lat,
            times,
            frames,
            meta,
        },
        engine.sigma,
    ))
}

/// Crude expected event count at a face: (number of face sites) × speed ×
/// O(1) base rate × T. Used only to flag thin statistics.
fn expected_boundary_events(engine: &Engine, face: Face, horizon: f64) -> f64 {
    if !engine.params.boundary_enabled {
        return 0.0;
    }
    let lat = engine.lat;
    let sites = lat.transverse_volume() as f64;
    sites * engine.params.model.boundary_speed(face, lat.n) * horizon
}

/// Stream-id offset reserved for initial-condition sampling. Replica r
/// draws its initial configuration on stream `r | INIT_STREAM_OFFSET` and
/// runs its dynamics on stream `r`, so the event sequence is independent
/// of the randomness that produced the starting configuration.
pub const INIT_STREAM_OFFSET: u64 = 1 << 63;

/// Sample an initial configuration from γ̂ and run one replica, with the
/// initial draw on a stream disjoint from the dynamics stream.
pub fn run_replica(
    gamma: &Profile,
    lat: Lattice,
    p: &SimParams,
) -> Result<(Trajectory, SpinConfig), KmcError> {
    let mut rng = stream_rng(p.seed, p.stream | INIT_STREAM_OFFSET);
    let init = sample_initial(gamma, lat, &mut rng)?;
    simulate(init, p.clone())
}

/// Independent per-site draws from the single-site law at γ̂(x/N):
/// P(±1) = (φ±m)/2, P(0) = 1-φ. Errors when γ̂ leaves the open region I.
pub fn sample_initial(
    gamma: &Profile,
    lat: Lattice,
    rng: &mut ChaCha8Rng,
) -> Result<SpinConfig, KmcError> {
    let mut sigma = SpinConfig::all_zero(lat);
    for idx in 0..lat.num_sites() {
        let rho = gamma.eval(lat.macro_axis(idx));
        if !(rho.m.abs() < rho.phi && rho.phi < 1.0) {
            return Err(KmcError::InitialProfileOutsideI);
        }
        let p_up = (rho.phi + rho.m) / 2.0;
        let p_hole = 1.0 - rho.phi;
        let u: f64 = rng.gen();
        let spin = if u < p_up {
            1
        } else if u < p_up + p_hole {
            0
        } else {
            -1
        };
        sigma.set(idx, spin);
    }
    Ok(sigma)
}
