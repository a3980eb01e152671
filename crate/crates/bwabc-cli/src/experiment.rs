//! Assembly of a full experiment from a parsed config plus CLI overrides.
//!
//! Every subcommand reads the same key vocabulary (so one config file can
//! drive the whole pipeline) but declares which blocks it requires; unknown
//! keys are rejected everywhere.

use crate::config::{self, Cfg};
use crate::{CommonArgs, Failure};
use bwabc::fields::FieldPair;
use bwabc::lattice::ModelParams;
use bwabc::thermo::Profile;
use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

/// Which config blocks a subcommand insists on.
#[derive(Default, Clone, Copy)]
pub struct Needs {
    pub gamma: bool,
    pub n_list: bool,
    pub snapshots: bool,
    pub tilt: bool,
    pub forbid_tilt: bool,
}

pub struct LdpCfg {
    pub family: String,
    pub n_modes: usize,
    pub amp: f64,
    pub delta: f64,
    pub gap_tol: f64,
    pub alphas: Vec<f64>,
    pub indicative_n: Option<u32>,
    pub indicative_replicas: usize,
    pub tube_r: f64,
}

pub struct ThermoCfg {
    pub grid: usize,
    pub tol_roundtrip: f64,
    pub tol_identity: f64,
}

pub struct Experiment {
    pub d: u32,
    pub n_list: Vec<u32>,
    pub replicas: usize,
    pub horizon: f64,
    pub snapshots: Vec<f64>,
    pub seed: u64,
    pub epsilon: f64,
    pub grid_m: usize,
    pub dt: Option<f64>,
    pub max_frames: usize,
    pub boundary_enabled: bool,
    pub model: ModelParams,
    pub gamma: Option<Profile>,
    pub tilt: Option<FieldPair>,
    pub ldp: LdpCfg,
    pub thermo: ThermoCfg,
    pub out: PathBuf,
    /// Canonical serialization of the parsed config (hash input, and
    /// recorded next to outputs for reproducibility).
    pub canonical: String,
}

impl Experiment {
    /// Stable 64-bit hash of (canonical config, command, resolved seed),
    /// formatted as hex. Identical runs produce identical hashes.
    pub fn run_hash(&self, command: &str) -> String {
        let mut h = DefaultHasher::new();
        self.canonical.hash(&mut h);
        command.hash(&mut h);
        self.seed.hash(&mut h);
        format!("{:#018x}", h.finish())
    }

    /// Axis drift components (Ê¹₁, Ê²₁) as the solver and the functionals
    /// consume them.
    pub fn e_axis(&self) -> [f64; 2] {
        [self.model.e1[0], self.model.e2[0]]
    }
}

/// Read the full key vocabulary, enforce `needs`, resolve CLI overrides.
/// Collects every problem before reporting.
pub fn read(
    map: BTreeMap<String, String>,
    args: &CommonArgs,
    needs: Needs,
) -> Result<Experiment, Failure> {
    let canonical = config::serialize_map(&map);
    let mut cfg = Cfg::new(map);

    let d = cfg.u64_or("run.d", 1) as u32;
    if !(1..=3).contains(&d) {
        cfg.error(format!("key 'run.d': dimension must be 1, 2 or 3, got {d}"));
    }

    let n_list = cfg.list_u32("run.N_list", &[]);
    if needs.n_list && n_list.is_empty() {
        cfg.error("missing required key 'run.N_list' (comma-separated lattice sizes)");
    }
    if n_list.iter().any(|&n| n < 2) {
        cfg.error("key 'run.N_list': every N must be at least 2");
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        cfg.error("key 'run.N_list': sizes must be strictly increasing");
    }

    let replicas = cfg.usize_or("run.replicas", 1);
    if replicas == 0 {
        cfg.error("key 'run.replicas': must be at least 1");
    }

    let horizon = cfg.f64_or("run.T", 1.0);
    if !(horizon > 0.0) {
        cfg.error(format!("key 'run.T': horizon must be positive, got {horizon}"));
    }

    let snapshots = cfg.list_f64("run.snapshots", &[]);
    if needs.snapshots && snapshots.is_empty() {
        cfg.error("missing required key 'run.snapshots' (comma-separated times)");
    }
    if snapshots.windows(2).any(|w| w[0] > w[1]) {
        cfg.error("key 'run.snapshots': times must be sorted");
    }
    if snapshots.iter().any(|&s| !(0.0..=horizon).contains(&s)) {
        cfg.error("key 'run.snapshots': every time must lie in [0, T]");
    }

    let seed = args.seed.unwrap_or_else(|| cfg.u64_or("run.seed", 0));
    if args.seed.is_some() {
        // Consume the config key so it does not count as unknown.
        cfg.u64_or("run.seed", 0);
    }

    let epsilon = cfg.f64_or("run.epsilon", 0.05);
    if !(epsilon > 0.0 && epsilon < 1.0) {
        cfg.error(format!(
            "key 'run.epsilon': coarse-graining scale must lie in (0, 1), got {epsilon}"
        ));
    }

    let grid_m = cfg.usize_or("grid.M", 64);
    if grid_m < 2 {
        cfg.error(format!("key 'grid.M': need at least 2, got {grid_m}"));
    }
    let dt = cfg.f64_opt("grid.dt");
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            cfg.error(format!("key 'grid.dt': must be positive, got {dt}"));
        }
    }
    let max_frames = cfg.usize_or("grid.max_frames", 512);
    if max_frames < 2 {
        cfg.error(format!("key 'grid.max_frames': need at least 2, got {max_frames}"));
    }

    let boundary_enabled = cfg.bool_or("run.boundary_enabled", true);

    let model = config::read_model(&mut cfg, d);

    let gamma = if needs.gamma || cfg.has("gamma.preset") {
        config::read_profile(&mut cfg, "gamma", None)
    } else {
        None
    };

    let tilt = config::read_tilt(&mut cfg, horizon);
    if needs.tilt && tilt.is_none() {
        cfg.error("this command requires a tilt preset (tilt.name = eigen-bump with amplitudes)");
    }
    if needs.forbid_tilt && tilt.is_some() {
        cfg.error("tilt.* is not accepted here; use perturbed-verify for tilted runs");
    }

    let ldp = LdpCfg {
        family: cfg.choice("ldp.family", &["eigen-time", "compact"], "eigen-time"),
        n_modes: cfg.usize_or("ldp.n_modes", 4),
        amp: cfg.f64_or("ldp.amp", 1.0),
        delta: cfg.f64_or("ldp.delta", bwabc::ldp::DEFAULT_DELTA),
        gap_tol: cfg.f64_or("ldp.gap_tol", 0.02),
        alphas: cfg.list_f64("ldp.alphas", &[0.0, 0.5, 1.0, 1.5, 2.0]),
        indicative_n: {
            let n = cfg.u64_or("ldp.indicative_N", 0) as u32;
            (n > 0).then_some(n)
        },
        indicative_replicas: cfg.usize_or("ldp.indicative_replicas", 32),
        tube_r: cfg.f64_or("ldp.tube_r", 0.3),
    };
    if ldp.n_modes == 0 {
        cfg.error("key 'ldp.n_modes': must be at least 1");
    }
    if !(ldp.delta > 0.0) {
        cfg.error("key 'ldp.delta': regularization must be positive");
    }
    if !(ldp.gap_tol > 0.0) {
        cfg.error("key 'ldp.gap_tol': tolerance must be positive");
    }
    if !(ldp.tube_r > 0.0) {
        cfg.error("key 'ldp.tube_r': tube radius must be positive");
    }

    let thermo = ThermoCfg {
        grid: cfg.usize_or("thermo.grid", 60),
        tol_roundtrip: cfg.f64_or("thermo.tol_roundtrip", 1e-10),
        tol_identity: cfg.f64_or("thermo.tol_identity", 1e-12),
    };
    if thermo.grid < 2 {
        cfg.error("key 'thermo.grid': need at least 2");
    }

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.str_or("run.out", "out")));
    if args.out.is_some() {
        cfg.str_or("run.out", "out");
    }

    cfg.finish().map_err(Failure::Config)?;
    let model = model.expect("finish() returned Ok, so the model block parsed");
    Ok(Experiment {
        d,
        n_list,
        replicas,
        horizon,
        snapshots,
        seed,
        epsilon,
        grid_m,
        dt,
        max_frames,
        boundary_enabled,
        model,
        gamma,
        tilt,
        ldp,
        thermo,
        out,
        canonical,
    })
}

/// Create the output directory and return a closure-friendly path joiner.
pub fn ensure_out_dir(exp: &Experiment) -> Result<(), Failure> {
    std::fs::create_dir_all(&exp.out).map_err(|e| {
        Failure::config(format!(
            "cannot create output directory {}: {e}",
            exp.out.display()
        ))
    })
}
