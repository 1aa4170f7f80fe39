//! Maximum-likelihood detection of double-chirp preambles from streaming
//! correlation values.
//!
//! For each end device the receiver tracks one real scalar per sample
//! instant: the bin-combined correlation `Z` between its two assigned
//! dechirped bins across antennas. Windowing `n` of these values at
//! one-symbol spacing yields a Gaussian vector under every hypothesis
//! (noise only, own preamble partially or fully inside the window, or a
//! resembled preamble from other devices), and the detector fires when the
//! preamble hypothesis beats noise and resemblance combined.

mod likelihood;
mod params;

pub use params::{make_params, CovFamily, DetectorParams, MAX_WINDOW};

use num_complex::Complex64;

use crate::channel::ReceptionStream;
use crate::css::{BinSpectrum, ChirpTable};
use crate::error::{Error, Result};
use crate::preamble::AssignmentPlan;
use crate::sliding_dft::SlidingDftState;

/// Length-`n` vector of correlation values spaced one symbol apart.
#[derive(Debug, Clone, PartialEq)]
pub struct BcpWindow {
    z: Vec<f64>,
}

impl BcpWindow {
    /// Wraps a window vector; the length must match the detector's `n`.
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() || z.len() > MAX_WINDOW {
            return Err(Error::Dimension(format!(
                "window length {} outside 1..={MAX_WINDOW}",
                z.len()
            )));
        }
        Ok(Self { z })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }
}

/// Circular history of correlation values for one end device, deep enough to
/// extract a window of `n` entries spaced `m` samples apart.
#[derive(Debug, Clone)]
pub struct BcpSeries {
    n: usize,
    m: usize,
    depth: usize,
    ring: Vec<f64>,
    count: u64,
}

impl BcpSeries {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 2 || n > MAX_WINDOW || m == 0 {
            return Err(Error::Dimension(format!(
                "series needs window length in 2..={MAX_WINDOW} and positive spacing, got n={n}, m={m}"
            )));
        }
        let depth = (n - 1) * m + 1;
        Ok(Self {
            n,
            m,
            depth,
            ring: vec![0.0; depth],
            count: 0,
        })
    }

    pub fn push(&mut self, z: f64) {
        let idx = (self.count % self.depth as u64) as usize;
        self.ring[idx] = z;
        self.count += 1;
    }

    /// True once enough history exists to form a full window.
    pub fn ready(&self) -> bool {
        self.count >= self.depth as u64
    }

    /// Number of values pushed so far.
    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Copies the current window (oldest to newest, spaced `m`) into `out`.
    /// Returns false if history is still too short.
    pub fn fill_window(&self, out: &mut [f64]) -> bool {
        assert_eq!(out.len(), self.n, "output slice must have length n");
        if !self.ready() {
            return false;
        }
        let newest = self.count - 1;
        for (j, slot) in out.iter_mut().enumerate() {
            let lag = ((self.n - 1 - j) * self.m) as u64;
            *slot = self.ring[((newest - lag) % self.depth as u64) as usize];
        }
        true
    }

    /// The current window as an owned value, if available.
    pub fn window(&self) -> Option<BcpWindow> {
        let mut z = vec![0.0; self.n];
        if self.fill_window(&mut z) {
            Some(BcpWindow { z })
        } else {
            None
        }
    }
}

/// One detection, with the likelihood triple that fired it.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub ed_id: usize,
    /// Index of the newest received sample inside the firing window.
    pub sample_index: usize,
    /// `(preamble, noise, resembled)` log-likelihoods at the decision.
    pub log_likelihoods: (f64, f64, f64),
}

/// Antenna-combined correlation of two corrected bins:
/// `(1/L) * Re{ sum_l conj(V_l[k1]) * V_l[k2] }`.
pub fn bcp(spectra: &[BinSpectrum], kappa1: usize, kappa2: usize) -> f64 {
    bcp_pairs_iter(
        spectra
            .iter()
            .map(|s| (s.corrected[kappa1], s.corrected[kappa2])),
    )
}

/// Same correlation given the two corrected bin values per antenna directly.
pub fn bcp_pairs(bins: &[(Complex64, Complex64)]) -> f64 {
    bcp_pairs_iter(bins.iter().copied())
}

fn bcp_pairs_iter(bins: impl ExactSizeIterator<Item = (Complex64, Complex64)>) -> f64 {
    let l = bins.len();
    assert!(l > 0, "need at least one antenna");
    let acc: Complex64 = bins.map(|(a, b)| a.conj() * b).sum();
    acc.re / l as f64
}

/// Noise-only log-likelihood of a window.
pub fn log_likelihood_noise(window: &BcpWindow, params: &DetectorParams) -> f64 {
    assert_eq!(window.len(), params.n, "window length must equal params.n");
    likelihood::ll_noise_slice(&window.z, params)
}

/// Log-likelihood that the window overlaps the device's own preamble by at
/// least `n_thr` symbols (mixture over block placements).
pub fn log_likelihood_preamble(window: &BcpWindow, params: &DetectorParams) -> f64 {
    assert_eq!(window.len(), params.n, "window length must equal params.n");
    likelihood::ll_preamble_slice(&window.z, params)
}

/// Log-likelihood that the window overlaps a resembled preamble formed by
/// other devices (mixture over block placements, zero mean).
pub fn log_likelihood_resembled(window: &BcpWindow, params: &DetectorParams) -> f64 {
    assert_eq!(window.len(), params.n, "window length must equal params.n");
    likelihood::ll_resembled_slice(&window.z, params)
}

/// Detection rule: preamble likelihood must beat noise and resemblance
/// combined, all in log domain.
pub fn decide(window: &BcpWindow, params: &DetectorParams) -> bool {
    assert_eq!(window.len(), params.n, "window length must equal params.n");
    likelihood::decide_slice(&window.z, params).is_some()
}

/// Renders detection events as CSV with a fixed header.
pub fn events_to_csv(events: &[DetectionEvent]) -> String {
    let mut s =
        String::from("ed_id, sample_index, log_lik_preamble, log_lik_noise, log_lik_resembled\n");
    for e in events {
        let (lp, ln, lr) = e.log_likelihoods;
        s.push_str(&format!(
            "{}, {}, {:.6}, {:.6}, {:.6}\n",
            e.ed_id, e.sample_index, lp, ln, lr
        ));
    }
    s
}

/// Correlation series for one bin pair over a whole stream, one value per
/// window position. Diagnostic companion to `run_detection`.
pub fn bcp_series(
    stream: &ReceptionStream,
    kappa1: usize,
    kappa2: usize,
    table: &ChirpTable,
) -> Result<Vec<f64>> {
    let m = table.m();
    if kappa1 >= m || kappa2 >= m {
        return Err(Error::Dimension(format!(
            "bin indices ({kappa1}, {kappa2}) out of range for symbol length {m}"
        )));
    }
    let l = stream.antennas();
    let t = stream.t;
    if t < m || l == 0 {
        return Ok(Vec::new());
    }
    let phase = table.basic()[kappa1] * table.basic()[kappa2].conj();
    let mut states = Vec::with_capacity(l);
    for ant in 0..l {
        states.push(SlidingDftState::init(&stream.samples[ant][..m], table)?);
    }
    let mut out = Vec::with_capacity(t - m + 1);
    for w in 0..=t - m {
        if w > 0 {
            for (ant, st) in states.iter_mut().enumerate() {
                st.advance(stream.samples[ant][w + m - 1]);
            }
        }
        let acc: Complex64 = states
            .iter()
            .map(|st| {
                let sp = st.spectrum();
                sp[kappa1].conj() * sp[kappa2]
            })
            .sum();
        out.push((phase * acc).re / l as f64);
    }
    Ok(out)
}

/// Streams the reception through per-antenna sliding DFTs and applies the
/// detection rule to every still-undetected device at every sample instant.
///
/// A single winning window is not enough to fire: the rule must hold at
/// `n - n_thr + 1` symbol-spaced instants at the same sample phase, all
/// within the `2*(n - n_thr) + 1` instants a preamble can explain (threshold
/// occupancy through the last trailing overlap). Occasional misses inside
/// that span do not reset the count. A cleanly received preamble starting at
/// `toa` therefore fires at `toa + n*m - 1`, the completion of its last
/// symbol. Chains are kept per phase so an interfering burst at another
/// alignment cannot reset a live chain. Each device fires at most once;
/// processing stops early once all have.
pub fn run_detection(
    stream: &ReceptionStream,
    plan: &AssignmentPlan,
    params: &DetectorParams,
    table: &ChirpTable,
) -> Result<Vec<DetectionEvent>> {
    let m = params.m;
    if table.m() != m || plan.m != m {
        return Err(Error::Dimension(format!(
            "symbol length mismatch: params {m}, table {}, plan {}",
            table.m(),
            plan.m
        )));
    }
    if stream.antennas() != params.l {
        return Err(Error::Dimension(format!(
            "antenna count mismatch: stream {}, params {}",
            stream.antennas(),
            params.l
        )));
    }
    if plan.n_preamble != params.n {
        return Err(Error::Dimension(format!(
            "preamble length mismatch: plan {}, params {}",
            plan.n_preamble, params.n
        )));
    }
    for a in &plan.assignments {
        if a.kappa1 >= m || a.kappa2 >= m {
            return Err(Error::Dimension(format!(
                "assignment for ED {} uses bins outside 0..{m}",
                a.ed_id
            )));
        }
    }

    let mut events = Vec::new();
    let l = params.l;
    let t = stream.t;
    if t < m || plan.assignments.is_empty() {
        return Ok(events);
    }

    let basic = table.basic();
    let phases: Vec<Complex64> = plan
        .assignments
        .iter()
        .map(|a| basic[a.kappa1] * basic[a.kappa2].conj())
        .collect();

    let mut states = Vec::with_capacity(l);
    for ant in 0..l {
        states.push(SlidingDftState::init(&stream.samples[ant][..m], table)?);
    }
    let mut series: Vec<BcpSeries> = plan
        .assignments
        .iter()
        .map(|_| BcpSeries::new(params.n, m))
        .collect::<Result<_>>()?;
    let mut latched = vec![false; plan.assignments.len()];
    let mut remaining = plan.assignments.len();
    let mut buf = [0.0f64; MAX_WINDOW];
    let inv_l = 1.0 / l as f64;
    let confirm = params.n - params.n_thr + 1;
    let span = 2 * (params.n - params.n_thr) + 1;
    // Per-device, per-phase chain state: win count and first-win symbol
    // index, reset lazily once a new win falls outside the span.
    let mut chain_wins = vec![vec![0usize; m]; plan.assignments.len()];
    let mut chain_start = vec![vec![usize::MAX; m]; plan.assignments.len()];

    for w in 0..=t - m {
        if w > 0 {
            for (ant, st) in states.iter_mut().enumerate() {
                st.advance(stream.samples[ant][w + m - 1]);
            }
        }
        for (idx, a) in plan.assignments.iter().enumerate() {
            if latched[idx] {
                continue;
            }
            let acc: Complex64 = states
                .iter()
                .map(|st| {
                    let sp = st.spectrum();
                    sp[a.kappa1].conj() * sp[a.kappa2]
                })
                .sum();
            let z = (phases[idx] * acc).re * inv_l;
            series[idx].push(z);
            if series[idx].ready() {
                series[idx].fill_window(&mut buf[..params.n]);
                if let Some(triple) = likelihood::decide_slice(&buf[..params.n], params) {
                    let (sym, ph) = (w / m, w % m);
                    let start = chain_start[idx][ph];
                    let (start, wins) = if start != usize::MAX && sym - start < span {
                        (start, chain_wins[idx][ph] + 1)
                    } else {
                        (sym, 1)
                    };
                    if wins >= confirm {
                        events.push(DetectionEvent {
                            ed_id: a.ed_id,
                            sample_index: w + m - 1,
                            log_likelihoods: triple,
                        });
                        latched[idx] = true;
                        remaining -= 1;
                    } else {
                        chain_wins[idx][ph] = wins;
                        chain_start[idx][ph] = start;
                    }
                }
            }
        }
        if remaining == 0 {
            break;
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{render_packet, ChannelVector};
    use crate::css::{build_chirp_table, demod_bins};
    use crate::preamble::{build_preamble_symbol, PreambleAssignment};

    fn table128() -> ChirpTable {
        build_chirp_table(7).unwrap()
    }

    fn pair(k1: usize, k2: usize, m: usize) -> PreambleAssignment {
        PreambleAssignment::new(1, k1, k2, m).unwrap()
    }

    #[test]
    fn bcp_noiseless_preamble_symbol() {
        let table = table128();
        let sym = build_preamble_symbol(&pair(3, 40, table.m()), &table).unwrap();
        // Two antennas with unit channels: Z = (M/2L) * ||h||^2 = M/2.
        let spec = demod_bins(&sym, &table).unwrap();
        let z = bcp(&[spec.clone(), spec], 3, 40);
        assert!((z - 64.0).abs() < 1e-9, "{z}");
    }

    #[test]
    fn bcp_scales_with_channel_power() {
        let table = table128();
        let sym = build_preamble_symbol(&pair(5, 70, table.m()), &table).unwrap();
        let h = Complex64::new(0.6, -0.8); // |h| = 1, rotated
        let rx: Vec<Complex64> = sym.iter().map(|s| h * s).collect();
        let spec = demod_bins(&rx, &table).unwrap();
        let z = bcp(&[spec], 5, 70);
        assert!((z - 64.0).abs() < 1e-9, "phase rotation must not leak: {z}");
        let rx2: Vec<Complex64> = sym.iter().map(|s| 2.0 * h * s).collect();
        let spec2 = demod_bins(&rx2, &table).unwrap();
        let z2 = bcp(&[spec2], 5, 70);
        assert!((z2 - 256.0).abs() < 1e-6, "{z2}");
    }

    #[test]
    fn bcp_pairs_matches_bcp() {
        let table = table128();
        let sym = build_preamble_symbol(&pair(9, 100, table.m()), &table).unwrap();
        let spec = demod_bins(&sym, &table).unwrap();
        let bins = (spec.corrected[9], spec.corrected[100]);
        assert!((bcp(&[spec], 9, 100) - bcp_pairs(&[bins])).abs() < 1e-15);
    }

    #[test]
    fn series_window_extraction() {
        let mut s = BcpSeries::new(3, 4).unwrap();
        assert!(!s.ready());
        for i in 0..9 {
            s.push(i as f64);
        }
        assert!(s.ready());
        let w = s.window().unwrap();
        assert_eq!(w.as_slice(), &[0.0, 4.0, 8.0]);
        s.push(9.0);
        let w = s.window().unwrap();
        assert_eq!(w.as_slice(), &[1.0, 5.0, 9.0]);
    }

    #[test]
    fn series_rejects_degenerate_shapes() {
        assert!(BcpSeries::new(1, 4).is_err());
        assert!(BcpSeries::new(3, 0).is_err());
        assert!(BcpWindow::new(vec![]).is_err());
    }

    fn noiseless_stream(
        toa: usize,
        kappa: (usize, usize),
        n: usize,
        t: usize,
        table: &ChirpTable,
    ) -> ReceptionStream {
        let assignment = PreambleAssignment::new(1, kappa.0, kappa.1, table.m()).unwrap();
        let tx = render_packet(&assignment, n, &[17, 90, 3], table).unwrap();
        let mut samples = vec![vec![Complex64::ZERO; t]; 1];
        for (i, s) in tx.iter().enumerate() {
            samples[0][toa + i] = *s;
        }
        ReceptionStream {
            samples,
            t,
            noise_var: 0.0,
        }
    }

    #[test]
    fn detection_fires_at_preamble_completion() {
        let table = table128();
        let m = table.m();
        let n = 8;
        let n_thr = 4;
        // The chain's first win needs full window history, hence
        // toa >= (n - n_thr) * m; the chain then runs from the n_thr-th
        // peak through the n-th.
        let toa = 4 * m + 17;
        let t = toa + 12 * m;
        let stream = noiseless_stream(toa, (6, 75), n, t, &table);
        let params = make_params(m, 1, n, 1e-6, n_thr).unwrap();
        let plan = AssignmentPlan {
            assignments: vec![PreambleAssignment::new(1, 6, 75, m).unwrap()],
            m,
            n_preamble: n,
        };
        let events = run_detection(&stream, &plan, &params, &table).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].sample_index, toa + n * m - 1);
        let (lp, ln, lr) = events[0].log_likelihoods;
        assert!(lp > likelihood::log_sum_exp2(ln, lr));
    }

    #[test]
    fn detection_latches_once() {
        let table = table128();
        let m = table.m();
        let toa = 2 * m;
        let t = toa + 14 * m;
        let stream = noiseless_stream(toa, (10, 90), 8, t, &table);
        let params = make_params(m, 1, 8, 1e-6, 4).unwrap();
        let plan = AssignmentPlan {
            assignments: vec![PreambleAssignment::new(1, 10, 90, m).unwrap()],
            m,
            n_preamble: 8,
        };
        let events = run_detection(&stream, &plan, &params, &table).unwrap();
        assert_eq!(events.len(), 1, "latching must cap events at one per ED");
    }

    #[test]
    fn detection_silent_on_unused_pair() {
        let table = table128();
        let m = table.m();
        let toa = 2 * m;
        let t = toa + 14 * m;
        let stream = noiseless_stream(toa, (10, 90), 8, t, &table);
        let params = make_params(m, 1, 8, 1e-6, 4).unwrap();
        // Listening device uses a disjoint pair with a different delta.
        let plan = AssignmentPlan {
            assignments: vec![PreambleAssignment::new(2, 0, 30, m).unwrap()],
            m,
            n_preamble: 8,
        };
        let events = run_detection(&stream, &plan, &params, &table).unwrap();
        assert!(events.is_empty(), "{events:?}");
    }

    #[test]
    fn detection_dimension_checks() {
        let table = table128();
        let m = table.m();
        let stream = ReceptionStream {
            samples: vec![vec![Complex64::ZERO; 4 * m]; 2],
            t: 4 * m,
            noise_var: 1.0,
        };
        let plan = AssignmentPlan {
            assignments: vec![PreambleAssignment::new(1, 0, 30, m).unwrap()],
            m,
            n_preamble: 8,
        };
        let params = make_params(m, 1, 8, 1.0, 4).unwrap(); // l=1 vs stream 2
        assert!(run_detection(&stream, &plan, &params, &table).is_err());
        let params = make_params(m, 2, 6, 1.0, 4).unwrap(); // n=6 vs plan 8
        assert!(run_detection(&stream, &plan, &params, &table).is_err());
        let params = make_params(64, 2, 8, 1.0, 4).unwrap(); // m mismatch
        assert!(run_detection(&stream, &plan, &params, &table).is_err());
    }

    #[test]
    fn short_stream_yields_no_events() {
        let table = table128();
        let m = table.m();
        let stream = ReceptionStream {
            samples: vec![vec![Complex64::ZERO; m - 1]; 1],
            t: m - 1,
            noise_var: 1.0,
        };
        let plan = AssignmentPlan {
            assignments: vec![PreambleAssignment::new(1, 0, 30, m).unwrap()],
            m,
            n_preamble: 8,
        };
        let params = make_params(m, 1, 8, 1.0, 4).unwrap();
        let events = run_detection(&stream, &plan, &params, &table).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn event_csv_shape() {
        let events = vec![DetectionEvent {
            ed_id: 3,
            sample_index: 911,
            log_likelihoods: (-10.5, -22.25, -30.125),
        }];
        let csv = events_to_csv(&events);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "ed_id, sample_index, log_lik_preamble, log_lik_noise, log_lik_resembled"
        );
        assert_eq!(
            lines.next().unwrap(),
            "3, 911, -10.500000, -22.250000, -30.125000"
        );
        assert!(lines.next().is_none());
    }

    #[test]
    fn bcp_series_matches_runner_geometry() {
        let table = table128();
        let m = table.m();
        let toa = m + 5;
        let t = toa + 12 * m;
        let stream = noiseless_stream(toa, (6, 75), 8, t, &table);
        let series = bcp_series(&stream, 6, 75, &table).unwrap();
        assert_eq!(series.len(), t - m + 1);
        // Peaks of M/2 at every full symbol alignment of the preamble.
        for k in 0..8 {
            let z = series[toa + k * m];
            assert!((z - 64.0).abs() < 1e-6, "peak {k}: {z}");
        }
        // Between peaks the correlation is far below the peak value.
        let mid = series[toa + m / 2];
        assert!(mid.abs() < 32.0, "{mid}");
    }

    #[test]
    fn channel_phase_does_not_shift_bcp() {
        let table = table128();
        let m = table.m();
        let assignment = PreambleAssignment::new(1, 6, 75, m).unwrap();
        let tx = render_packet(&assignment, 4, &[], &table).unwrap();
        let h = ChannelVector {
            gains: vec![Complex64::from_polar(1.3, 2.1)],
        };
        let rx: Vec<Complex64> = tx.iter().map(|s| h.gains[0] * s).collect();
        let t = rx.len();
        let stream = ReceptionStream {
            samples: vec![rx],
            t,
            noise_var: 0.0,
        };
        let series = bcp_series(&stream, 6, 75, &table).unwrap();
        let expect = 64.0 * h.gains[0].norm_sqr();
        assert!((series[0] - expect).abs() < 1e-6, "{} vs {expect}", series[0]);
    }
}
