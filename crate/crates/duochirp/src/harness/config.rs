//! Flat `key = value` configuration and plan files.
//!
//! One key per line, `#` starts a comment, lists are comma-separated. The
//! same syntax carries assignment plans, where each device is one
//! `ed_<id> = kappa1, kappa2` line.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::preamble::{AssignmentPlan, AssignmentPolicy, PreambleAssignment};

/// Everything a Monte Carlo experiment needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sf: u32,
    pub l_antennas: usize,
    pub n_users: usize,
    pub n_preamble: usize,
    pub n_thr: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub policy: AssignmentPolicy,
    pub payload_min: usize,
    pub payload_max: usize,
    /// Mean inter-arrival gap in samples; `None` means one symbol (M).
    pub toa_mean_gap: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sf: 7,
            l_antennas: 32,
            n_users: 5,
            n_preamble: 8,
            n_thr: 4,
            snr_grid_db: (-20..=0).map(f64::from).collect(),
            trials: 2000,
            master_seed: 1,
            policy: AssignmentPolicy::SeededRandom,
            payload_min: 20,
            payload_max: 30,
            toa_mean_gap: None,
        }
    }
}

impl SimConfig {
    pub fn m(&self) -> usize {
        1usize << self.sf
    }

    pub fn mean_gap(&self) -> usize {
        self.toa_mean_gap.unwrap_or_else(|| self.m())
    }

    pub fn validate(&self) -> Result<()> {
        if !(5..=12).contains(&self.sf) {
            return Err(Error::Config(format!("sf {} outside 5..=12", self.sf)));
        }
        if self.l_antennas == 0 || self.n_users == 0 || self.trials == 0 {
            return Err(Error::Config(
                "l_antennas, n_users, and trials must be positive".into(),
            ));
        }
        if self.n_preamble < 2 || self.n_thr == 0 || self.n_thr > self.n_preamble {
            return Err(Error::Config(format!(
                "need 1 <= n_thr <= n_preamble and n_preamble >= 2, got thr {} of {}",
                self.n_thr, self.n_preamble
            )));
        }
        let max_users = self.m() / 2 - 1;
        if self.n_users > max_users {
            return Err(Error::Capacity {
                requested: self.n_users,
                max: max_users,
            });
        }
        if self.payload_min > self.payload_max {
            return Err(Error::Config(format!(
                "payload bounds inverted: {}..{}",
                self.payload_min, self.payload_max
            )));
        }
        if self.toa_mean_gap == Some(0) {
            return Err(Error::Config("toa_mean_gap must be positive".into()));
        }
        Ok(())
    }
}

/// Splits flat key-value text into (key, value) pairs, rejecting malformed
/// lines and duplicate keys.
fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("duplicate key {key:?}")));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key {key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect()
}

/// Parses a configuration, starting from defaults; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    for (key, value) in parse_kv(text)? {
        match key.as_str() {
            "sf" => cfg.sf = parse_num(&key, &value)?,
            "l_antennas" => cfg.l_antennas = parse_num(&key, &value)?,
            "n_users" => cfg.n_users = parse_num(&key, &value)?,
            "n_preamble" => cfg.n_preamble = parse_num(&key, &value)?,
            "n_thr" => cfg.n_thr = parse_num(&key, &value)?,
            "snr_grid_db" => cfg.snr_grid_db = parse_list(&key, &value)?,
            "trials" => cfg.trials = parse_num(&key, &value)?,
            "master_seed" => cfg.master_seed = parse_num(&key, &value)?,
            "policy" => {
                cfg.policy = value
                    .parse()
                    .map_err(|e: crate::Error| Error::Config(format!("key policy: {e}")))?
            }
            "payload_min" => cfg.payload_min = parse_num(&key, &value)?,
            "payload_max" => cfg.payload_max = parse_num(&key, &value)?,
            "toa_mean_gap" => cfg.toa_mean_gap = Some(parse_num(&key, &value)?),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Renders a configuration in the same format `parse_config` accepts.
pub fn serialize_config(cfg: &SimConfig) -> String {
    let grid = cfg
        .snr_grid_db
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(", ");
    let mut s = String::new();
    let _ = writeln!(s, "sf = {}", cfg.sf);
    let _ = writeln!(s, "l_antennas = {}", cfg.l_antennas);
    let _ = writeln!(s, "n_users = {}", cfg.n_users);
    let _ = writeln!(s, "n_preamble = {}", cfg.n_preamble);
    let _ = writeln!(s, "n_thr = {}", cfg.n_thr);
    let _ = writeln!(s, "snr_grid_db = {grid}");
    let _ = writeln!(s, "trials = {}", cfg.trials);
    let _ = writeln!(s, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(s, "policy = {}", cfg.policy);
    let _ = writeln!(s, "payload_min = {}", cfg.payload_min);
    let _ = writeln!(s, "payload_max = {}", cfg.payload_max);
    if let Some(gap) = cfg.toa_mean_gap {
        let _ = writeln!(s, "toa_mean_gap = {gap}");
    }
    s
}

/// Parses an assignment plan: `m`, `n_preamble`, and one `ed_<id>` line per
/// device. Constraint violations are NOT rejected here; `validate_assignment`
/// reports them, so deliberately broken plans can be round-tripped.
pub fn parse_plan(text: &str) -> Result<AssignmentPlan> {
    let mut m: Option<usize> = None;
    let mut n_preamble: usize = crate::preamble::DEFAULT_N_PREAMBLE;
    let mut eds: Vec<(usize, usize, usize)> = Vec::new();
    for (key, value) in parse_kv(text)? {
        match key.as_str() {
            "m" => m = Some(parse_num(&key, &value)?),
            "n_preamble" => n_preamble = parse_num(&key, &value)?,
            _ => {
                let id: usize = key
                    .strip_prefix("ed_")
                    .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))
                    .and_then(|raw| parse_num(&key, raw))?;
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "key {key}: expected `kappa1, kappa2`, got {value:?}"
                    )));
                }
                eds.push((id, parse_num(&key, parts[0])?, parse_num(&key, parts[1])?));
            }
        }
    }
    let m = m.ok_or_else(|| Error::Config("plan is missing the `m` key".into()))?;
    if !m.is_power_of_two() {
        return Err(Error::Config(format!("m = {m} is not a power of two")));
    }
    if eds.is_empty() {
        return Err(Error::Config("plan lists no devices".into()));
    }
    let assignments = eds
        .into_iter()
        .map(|(id, k1, k2)| PreambleAssignment::unvalidated(id, k1, k2, m))
        .collect();
    Ok(AssignmentPlan {
        assignments,
        m,
        n_preamble,
    })
}

/// Renders a plan in the format `parse_plan` accepts.
pub fn serialize_plan(plan: &AssignmentPlan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "m = {}", plan.m);
    let _ = writeln!(s, "n_preamble = {}", plan.n_preamble);
    for a in &plan.assignments {
        let _ = writeln!(s, "ed_{} = {}, {}", a.ed_id, a.kappa1, a.kappa2);
    }
    s
}
