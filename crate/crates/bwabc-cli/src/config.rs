//! Flat key-value experiment configuration.
//!
//! Syntax: one `key = value` pair per line, dotted keys (`model.E1`,
//! `grid.M`, `tilt.name`), `#` starts a comment, blank lines ignored.
//! Values are bare scalars or comma-separated lists. The format is
//! deliberately flat (no sections, no quoting) so configs diff cleanly.
//!
//! Parsing is two-stage: the text becomes a sorted key → value map, then a
//! [`Cfg`] reader extracts typed values while collecting *all* problems
//! (bad syntax, missing keys, unparsable values, out-of-range values,
//! unknown keys) so a bad config is reported exhaustively before exit.

use bwabc::fields::{FieldPair, TimeShape};
use bwabc::lattice::ModelParams;
use bwabc::thermo::{axis_grid, validate_profile, Profile, ProfileKind};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// Parse config text into a sorted map. Syntax errors are collected per
/// line; duplicate keys are errors (silent override invites typos).
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value'", lineno + 1));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            errors.push(format!("line {}: empty key", lineno + 1));
            continue;
        }
        if key
            .chars()
            .any(|c| !(c.is_ascii_alphanumeric() || c == '.' || c == '_'))
        {
            errors.push(format!(
                "line {}: key '{key}' may only contain [A-Za-z0-9._]",
                lineno + 1
            ));
            continue;
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            errors.push(format!("line {}: duplicate key '{key}'", lineno + 1));
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(errors)
    }
}

/// Canonical serialization: sorted `key = value` lines. `parse_text ∘
/// serialize_map` is the identity on any parsed map.
pub fn serialize_map(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in map {
        writeln!(out, "{k} = {v}").expect("string write");
    }
    out
}

/// Typed reader over a parsed config map. Every accessor records errors
/// instead of failing fast; [`Cfg::finish`] returns the full list plus any
/// keys that no accessor consumed.
pub struct Cfg {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
    errors: Vec<String>,
}

impl Cfg {
    pub fn new(map: BTreeMap<String, String>) -> Cfg {
        Cfg {
            map,
            used: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    pub fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.map.get(key).cloned()
    }

    fn parse_as<T: std::str::FromStr>(&mut self, key: &str, raw: &str, ty: &str) -> Option<T> {
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(format!("key '{key}': cannot parse '{raw}' as {ty}"));
                None
            }
        }
    }

    pub fn f64_opt(&mut self, key: &str) -> Option<f64> {
        let raw = self.raw(key)?;
        let v: Option<f64> = self.parse_as(key, &raw, "a number");
        if let Some(x) = v {
            if !x.is_finite() {
                self.error(format!("key '{key}': value must be finite"));
                return None;
            }
        }
        v
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        self.f64_opt(key).unwrap_or(default)
    }

    pub fn f64_req(&mut self, key: &str) -> f64 {
        match self.f64_opt(key) {
            Some(v) => v,
            None => {
                if !self.map.contains_key(key) {
                    self.error(format!("missing required key '{key}'"));
                }
                f64::NAN
            }
        }
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> u64 {
        match self.raw(key) {
            Some(raw) => self.parse_as(key, &raw, "an unsigned integer").unwrap_or(default),
            None => default,
        }
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> usize {
        match self.raw(key) {
            Some(raw) => self.parse_as(key, &raw, "an unsigned integer").unwrap_or(default),
            None => default,
        }
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            Some(raw) => match raw.as_str() {
                "true" => true,
                "false" => false,
                other => {
                    self.error(format!("key '{key}': expected true/false, got '{other}'"));
                    default
                }
            },
            None => default,
        }
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| default.to_string())
    }

    /// String restricted to a fixed vocabulary.
    pub fn choice(&mut self, key: &str, allowed: &[&str], default: &str) -> String {
        let v = self.str_or(key, default);
        if !allowed.contains(&v.as_str()) {
            self.error(format!(
                "key '{key}': '{v}' is not one of {}",
                allowed.join("|")
            ));
            return default.to_string();
        }
        v
    }

    pub fn list_f64(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.raw(key) {
            None => default.to_vec(),
            Some(raw) if raw.trim().is_empty() => default.to_vec(),
            Some(raw) => raw
                .split(',')
                .filter_map(|s| self.parse_as(key, s.trim(), "a number"))
                .collect(),
        }
    }

    pub fn list_u32(&mut self, key: &str, default: &[u32]) -> Vec<u32> {
        match self.raw(key) {
            None => default.to_vec(),
            Some(raw) if raw.trim().is_empty() => default.to_vec(),
            Some(raw) => raw
                .split(',')
                .filter_map(|s| self.parse_as(key, s.trim(), "an unsigned integer"))
                .collect(),
        }
    }

    /// Unknown-key sweep plus accumulated errors.
    pub fn finish(mut self) -> Result<(), Vec<String>> {
        for key in self.map.keys() {
            if !self.used.contains(key) {
                self.errors.push(format!("unknown key '{key}'"));
            }
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(self.errors)
        }
    }
}

/// Read an analytic profile preset under `prefix.*`. Presets: `constant`
/// (m, phi), `linear` (m_left, m_right, phi_left, phi_right), `sine-bump` /
/// `eigen-bump` (m0, phi0, m_amp, phi_amp[, n1]). Optional validation
/// margins `c_star` (interior margin, default 0) and `big_c` (cap on φ,
/// default 0.999).
pub fn read_profile(cfg: &mut Cfg, prefix: &str, default_preset: Option<&str>) -> Option<Profile> {
    let key = format!("{prefix}.preset");
    let presets = ["constant", "linear", "sine-bump", "eigen-bump"];
    let preset = match (cfg.has(&key), default_preset) {
        (false, None) => {
            cfg.error(format!("missing required key '{key}'"));
            return None;
        }
        (false, Some(d)) => {
            cfg.used.insert(key);
            d.to_string()
        }
        (true, _) => cfg.choice(&key, &presets, "constant"),
    };
    let req = |cfg: &mut Cfg, name: &str| cfg.f64_req(&format!("{prefix}.{name}"));
    let kind = match preset.as_str() {
        "constant" => ProfileKind::Constant {
            m: req(cfg, "m"),
            phi: req(cfg, "phi"),
        },
        "linear" => ProfileKind::Linear {
            m_left: req(cfg, "m_left"),
            m_right: req(cfg, "m_right"),
            phi_left: req(cfg, "phi_left"),
            phi_right: req(cfg, "phi_right"),
        },
        "sine-bump" => ProfileKind::SineBump {
            m0: req(cfg, "m0"),
            phi0: req(cfg, "phi0"),
            m_amp: req(cfg, "m_amp"),
            phi_amp: req(cfg, "phi_amp"),
        },
        "eigen-bump" => ProfileKind::EigenBump {
            m0: req(cfg, "m0"),
            phi0: req(cfg, "phi0"),
            m_amp: req(cfg, "m_amp"),
            phi_amp: req(cfg, "phi_amp"),
            n1: cfg.usize_or(&format!("{prefix}.n1"), 0),
        },
        _ => unreachable!("choice() restricted the vocabulary"),
    };
    let c_star = cfg.f64_or(&format!("{prefix}.c_star"), 0.0);
    let big_c = cfg.f64_or(&format!("{prefix}.big_c"), 0.999);
    if c_star < 0.0 {
        cfg.error(format!("key '{prefix}.c_star': must be >= 0, got {c_star}"));
        return None;
    }
    if !(big_c > 0.0 && big_c < 1.0) {
        cfg.error(format!("key '{prefix}.big_c': must lie in (0, 1), got {big_c}"));
        return None;
    }
    // Any NaN here means a required key was missing (already reported).
    let nan = matches!(&kind,
        ProfileKind::Constant { m, phi } if !(m.is_finite() && phi.is_finite()))
        || matches!(&kind,
        ProfileKind::Linear { m_left, m_right, phi_left, phi_right }
            if ![m_left, m_right, phi_left, phi_right].iter().all(|x| x.is_finite()))
        || matches!(&kind,
        ProfileKind::SineBump { m0, phi0, m_amp, phi_amp }
            if ![m0, phi0, m_amp, phi_amp].iter().all(|x| x.is_finite()))
        || matches!(&kind,
        ProfileKind::EigenBump { m0, phi0, m_amp, phi_amp, .. }
            if ![m0, phi0, m_amp, phi_amp].iter().all(|x| x.is_finite()));
    if nan {
        return None;
    }
    let profile = Profile::new(kind, c_star, big_c);
    let report = validate_profile(&profile, &axis_grid(201));
    if !report.pass {
        cfg.error(format!(
            "profile '{prefix}': leaves the admissible region (worst margin {:.3e} at u = {:.4})",
            report.margin, report.worst_u
        ));
        return None;
    }
    Some(profile)
}

/// Read the tilt preset under `tilt.*`. `tilt.name = none` (default) or
/// `eigen-bump` with `amp1`, `amp2`, `n1` and `time` ∈ {const, half-sine};
/// the half-sine time window spans [0, T].
pub fn read_tilt(cfg: &mut Cfg, horizon: f64) -> Option<FieldPair> {
    let name = cfg.choice("tilt.name", &["none", "eigen-bump"], "none");
    match name.as_str() {
        "none" => {
            for key in ["tilt.amp1", "tilt.amp2", "tilt.n1", "tilt.time"] {
                if cfg.has(key) {
                    cfg.error(format!("key '{key}' given but tilt.name = none"));
                    cfg.used.insert(key.to_string());
                }
            }
            None
        }
        "eigen-bump" => {
            let amp1 = cfg.f64_or("tilt.amp1", 0.0);
            let amp2 = cfg.f64_or("tilt.amp2", 0.0);
            let n1 = cfg.usize_or("tilt.n1", 0);
            let time = match cfg.choice("tilt.time", &["const", "half-sine"], "const").as_str() {
                "half-sine" => TimeShape::HalfSine { t_end: horizon },
                _ => TimeShape::Const,
            };
            let h = FieldPair::eigen_bump(amp1, amp2, n1, time);
            if h.is_zero() {
                None
            } else {
                Some(h)
            }
        }
        _ => unreachable!("choice() restricted the vocabulary"),
    }
}

/// Read the model block: axis drifts `model.E1`/`model.E2`, bulk potentials
/// `model.a1`/`model.a2`, boundary exponents `model.al` ∈ [0,1) and
/// `model.ar` > 1, and the reservoir profile under `boundary.*` (default
/// preset `constant`). Drift acts along the axis; transverse components are
/// zero.
pub fn read_model(cfg: &mut Cfg, d: u32) -> Option<ModelParams> {
    let e1_axis = cfg.f64_or("model.E1", 0.0);
    let e2_axis = cfg.f64_or("model.E2", 0.0);
    let a1 = cfg.f64_or("model.a1", 0.0);
    let a2 = cfg.f64_or("model.a2", 0.0);
    let al = cfg.f64_or("model.al", 0.0);
    let ar = cfg.f64_or("model.ar", 1.5);
    // Reservoir datum: default to the zero-potential single-site values
    // (0, 2/3) when no boundary block is given at all.
    let b = if cfg.has_prefix("boundary.") {
        read_profile(cfg, "boundary", Some("constant"))?
    } else {
        Profile::constant(0.0, 2.0 / 3.0)
    };
    let mut e1 = vec![0.0; d as usize];
    let mut e2 = vec![0.0; d as usize];
    e1[0] = e1_axis;
    e2[0] = e2_axis;
    let model = ModelParams {
        e1,
        e2,
        a1,
        a2,
        b,
        al,
        ar,
    };
    let errs = model.validate(d);
    if errs.is_empty() {
        Some(model)
    } else {
        for e in errs {
            cfg.error(format!("model: {e}"));
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_serialize_roundtrip_is_identity() {
        let text = "b.key = 2\n# comment\na.key = hello world  # trailing\n\nc = 1,2,3\n";
        let map = parse_text(text).unwrap();
        assert_eq!(map.get("a.key").unwrap(), "hello world");
        let canon = serialize_map(&map);
        assert_eq!(canon, "a.key = hello world\nb.key = 2\nc = 1,2,3\n");
        assert_eq!(parse_text(&canon).unwrap(), map);
    }

    #[test]
    fn syntax_errors_reported_per_line() {
        let errs = parse_text("good = 1\nbad line\nweird key! = 2\ngood = 3\n").unwrap_err();
        assert_eq!(errs.len(), 3);
        assert!(errs[0].contains("line 2"));
        assert!(errs[1].contains("line 3"));
        assert!(errs[2].contains("duplicate"));
    }

    #[test]
    fn unknown_keys_and_bad_values_all_reported() {
        let map = parse_text("run.T = abc\nmystery = 1\n").unwrap();
        let mut cfg = Cfg::new(map);
        cfg.f64_req("run.T");
        let errs = cfg.finish().unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().any(|e| e.contains("run.T")));
        assert!(errs.iter().any(|e| e.contains("unknown key 'mystery'")));
    }

    #[test]
    fn profile_presets_parse() {
        let map = parse_text(
            "g.preset = sine-bump\ng.m0 = 0.0\ng.phi0 = 0.6\ng.m_amp = 0.2\ng.phi_amp = 0.2\n",
        )
        .unwrap();
        let mut cfg = Cfg::new(map);
        let p = read_profile(&mut cfg, "g", None).unwrap();
        cfg.finish().unwrap();
        assert!(p.left_trace().m.abs() < 1e-12);
    }

    #[test]
    fn inadmissible_profile_rejected() {
        let map = parse_text("g.preset = constant\ng.m = 0.9\ng.phi = 0.5\n").unwrap();
        let mut cfg = Cfg::new(map);
        assert!(read_profile(&mut cfg, "g", None).is_none());
        assert!(cfg.finish().is_err());
    }

    #[test]
    fn tilt_none_rejects_stray_keys() {
        let map = parse_text("tilt.name = none\ntilt.amp1 = 0.5\n").unwrap();
        let mut cfg = Cfg::new(map);
        assert!(read_tilt(&mut cfg, 1.0).is_none());
        assert!(cfg.finish().is_err());
    }
}
