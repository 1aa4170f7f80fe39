//! Monte Carlo experiment driver: seeded trials, detection scoring, PER
//! aggregation, CSV emission, and threshold-crossing readout.

pub mod config;
pub mod scenarios;

pub use config::{parse_config, parse_plan, serialize_config, serialize_plan, SimConfig};

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{draw_channel, draw_toas, synthesize, PacketPlan, ReceptionStream};
use crate::css::build_chirp_table;
use crate::detector::{make_params, run_detection};
use crate::error::{Error, Result};
use crate::preamble::{assign_preambles, AssignmentPlan};

/// Per-trial detection outcome tallies. Every transmitting device lands in
/// exactly one bucket: detected inside its legitimate window (correct), fired
/// elsewhere (wrong), or never fired (missed).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialCounts {
    pub correct: u64,
    pub wrong: u64,
    pub missed: u64,
}

impl TrialCounts {
    fn add(self, other: TrialCounts) -> TrialCounts {
        TrialCounts {
            correct: self.correct + other.correct,
            wrong: self.wrong + other.wrong,
            missed: self.missed + other.missed,
        }
    }

    pub fn users(&self) -> u64 {
        self.correct + self.wrong + self.missed
    }
}

/// One aggregated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PerPoint {
    pub snr_db: f64,
    pub per_overall: f64,
    pub per_missed: f64,
    pub per_wrong: f64,
    pub trials: usize,
    pub ci_halfwidth: f64,
}

/// A PER curve over the SNR grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerResult {
    pub points: Vec<PerPoint>,
}

/// Per-sample SNR convention: unit-power symbols through unit-variance
/// channels, so SNR = 1/sigma^2.
pub fn snr_db_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Decides whether a firing at `sample_index` matches the preamble a device
/// transmitted at `toa`. Legitimate firings land on the device's own
/// symbol-completion grid `toa + k*m - 1`: the earliest match is the instant
/// the first preamble symbol completes (under interference the rule can fire
/// before `n_thr` of the device's own peaks have accumulated; symbol timing
/// is already right and frame sync is delegated to the start-of-frame
/// delimiter), the latest is the last window still holding `n_thr` leading
/// peaks, k = 2n - n_thr. Each grid instant carries m/16 samples of jitter
/// allowance. A firing off this grid is explained by no transmission of this
/// device: resembled firings triggered by other devices' packets inherit
/// those packets' arrival phases and miss the grid.
pub fn matches_transmission(
    toa: usize,
    m: usize,
    n: usize,
    n_thr: usize,
    sample_index: usize,
) -> bool {
    let tol = m / 16;
    let first = toa + m - 1;
    if sample_index + tol < first {
        return false;
    }
    let r = sample_index + tol - first;
    let k = r / m;
    k + 1 <= 2 * n - n_thr && r % m <= 2 * tol
}

/// Synthesizes one seeded trial's reception stream at one SNR point.
///
/// Randomness is split into four independent sub-streams (channels, arrival
/// times, payloads, noise) of one generator seeded by
/// `master_seed + trial_index`, so outcomes are reproducible and the same
/// trial at two SNR points differs only by the noise scale.
pub fn synthesize_trial(
    config: &SimConfig,
    plan: &AssignmentPlan,
    snr_db: f64,
    trial_index: u64,
) -> Result<(ReceptionStream, Vec<usize>)> {
    config.validate()?;
    let m = config.m();
    let n = config.n_preamble;
    let table = build_chirp_table(config.sf)?;
    let noise_var = snr_db_to_noise_var(snr_db);

    let base = ChaCha8Rng::seed_from_u64(config.master_seed.wrapping_add(trial_index));
    let substream = |idx: u64| {
        let mut r = base.clone();
        r.set_stream(idx);
        r
    };
    let mut channel_rng = substream(0);
    let mut toa_rng = substream(1);
    let mut payload_rng = substream(2);
    let mut noise_rng = substream(3);

    let channels: Vec<_> = plan
        .assignments
        .iter()
        .map(|_| draw_channel(config.l_antennas, &mut channel_rng))
        .collect();
    let warmup = n * m;
    let toas = draw_toas(
        plan.assignments.len(),
        config.mean_gap() as f64,
        warmup,
        &mut toa_rng,
    );
    let packets: Vec<PacketPlan> = plan
        .assignments
        .iter()
        .zip(&toas)
        .map(|(a, &toa)| {
            let payload_len = payload_rng.gen_range(config.payload_min..=config.payload_max);
            let payload_symbols = (0..payload_len).map(|_| payload_rng.gen_range(0..m)).collect();
            PacketPlan {
                ed_id: a.ed_id,
                toa,
                payload_symbols,
                assignment: a.clone(),
                n_preamble: n,
            }
        })
        .collect();
    let t = packets
        .iter()
        .map(|p| p.toa + (n + p.payload_symbols.len()) * m)
        .max()
        .unwrap_or(warmup)
        + warmup;

    let stream = synthesize(
        &packets,
        &channels,
        noise_var,
        config.l_antennas,
        t,
        &table,
        &mut noise_rng,
    )?;
    Ok((stream, toas))
}

/// Average received power per sample per antenna: the receiver's estimate of
/// the noise-plus-interference floor its likelihoods should use. Other
/// devices' signals are not modelled individually; they enter the detector as
/// additional Gaussian noise, which this estimate captures.
pub fn estimate_disturbance_power(stream: &ReceptionStream) -> f64 {
    let total: f64 = stream
        .samples
        .iter()
        .flat_map(|lane| lane.iter())
        .map(|s| s.norm_sqr())
        .sum();
    total / (stream.antennas() * stream.t) as f64
}

/// Runs one seeded trial at one SNR point and scores every device.
pub fn run_trial(
    config: &SimConfig,
    plan: &AssignmentPlan,
    snr_db: f64,
    trial_index: u64,
) -> Result<TrialCounts> {
    let m = config.m();
    let n = config.n_preamble;
    let (stream, toas) = synthesize_trial(config, plan, snr_db, trial_index)?;
    let table = build_chirp_table(config.sf)?;
    let floor = estimate_disturbance_power(&stream);
    let params = make_params(m, config.l_antennas, n, floor, config.n_thr)?;
    let events = run_detection(&stream, plan, &params, &table)?;

    let mut counts = TrialCounts::default();
    for (a, &toa) in plan.assignments.iter().zip(&toas) {
        match events.iter().find(|e| e.ed_id == a.ed_id) {
            Some(e) if matches_transmission(toa, m, n, config.n_thr, e.sample_index) => {
                counts.correct += 1
            }
            Some(_) => counts.wrong += 1,
            None => counts.missed += 1,
        }
    }
    Ok(counts)
}

/// Aggregates trials over the SNR grid for an explicit plan.
pub fn run_experiment_with_plan(config: &SimConfig, plan: &AssignmentPlan) -> Result<PerResult> {
    config.validate()?;
    let mut points = Vec::with_capacity(config.snr_grid_db.len());
    for &snr_db in &config.snr_grid_db {
        let total = (0..config.trials as u64)
            .into_par_iter()
            .map(|i| run_trial(config, plan, snr_db, i))
            .try_reduce(TrialCounts::default, |a, b| Ok(a.add(b)))?;
        let users = total.users() as f64;
        let per_overall = (total.wrong + total.missed) as f64 / users;
        let point = PerPoint {
            snr_db,
            per_overall,
            per_missed: total.missed as f64 / users,
            per_wrong: total.wrong as f64 / users,
            trials: config.trials,
            ci_halfwidth: 1.96 * (per_overall * (1.0 - per_overall) / config.trials as f64).sqrt(),
        };
        eprintln!(
            "  snr {:+6.1} dB: per {:.5} (missed {:.5}, wrong {:.5}) over {} trials",
            point.snr_db, point.per_overall, point.per_missed, point.per_wrong, point.trials
        );
        points.push(point);
    }
    Ok(PerResult { points })
}

/// Builds the plan from the config (once per experiment) and aggregates.
pub fn run_experiment(config: &SimConfig) -> Result<PerResult> {
    config.validate()?;
    let plan = assign_preambles(config.n_users, config.m(), config.policy, config.master_seed)?;
    let mut plan = plan;
    plan.n_preamble = config.n_preamble;
    run_experiment_with_plan(config, &plan)
}

/// Renders a result as CSV text: fixed header, one 6-decimal row per point.
pub fn csv_text(result: &PerResult) -> String {
    let mut s = String::from("snr_db, per_overall, per_missed, per_wrong, trials, ci_halfwidth\n");
    for p in &result.points {
        let _ = writeln!(
            s,
            "{:.6}, {:.6}, {:.6}, {:.6}, {}, {:.6}",
            p.snr_db, p.per_overall, p.per_missed, p.per_wrong, p.trials, p.ci_halfwidth
        );
    }
    s
}

/// Writes a result as CSV.
pub fn emit_csv(result: &PerResult, path: &Path) -> Result<()> {
    std::fs::write(path, csv_text(result))?;
    Ok(())
}

/// Parses text produced by `csv_text` back into a result.
pub fn parse_csv(text: &str) -> Result<PerResult> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?;
    if header.trim() != "snr_db, per_overall, per_missed, per_wrong, trials, ci_halfwidth" {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(Error::Config(format!("bad CSV row {line:?}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad CSV field {s:?}")))
        };
        points.push(PerPoint {
            snr_db: num(f[0])?,
            per_overall: num(f[1])?,
            per_missed: num(f[2])?,
            per_wrong: num(f[3])?,
            trials: num(f[4])? as usize,
            ci_halfwidth: num(f[5])?,
        });
    }
    Ok(PerResult { points })
}

/// SNR (dB) at which a PER curve crosses `target`, by log-linear
/// interpolation after a running-minimum monotonization. Zero rates are
/// floored at `floor` (use 0.5 / total draws) so the log scale stays finite.
/// Returns `None` when the curve never reaches the target inside the grid.
pub fn crossing_snr(points: &[(f64, f64)], target: f64, floor: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|&(snr, per)| (snr, per.max(floor)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut run_min = f64::INFINITY;
    for p in pts.iter_mut() {
        run_min = run_min.min(p.1);
        p.1 = run_min;
    }
    if pts.first()?.1 <= target {
        return None; // already below target at the lowest SNR: crossing unseen
    }
    for w in pts.windows(2) {
        let (s0, p0) = w[0];
        let (s1, p1) = w[1];
        if p0 > target && p1 <= target {
            let frac = (p0.ln() - target.ln()) / (p0.ln() - p1.ln());
            return Some(s0 + frac * (s1 - s0));
        }
    }
    None
}
