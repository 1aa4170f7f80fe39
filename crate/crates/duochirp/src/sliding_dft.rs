//! Per-sample recursive update of the dechirped-window DFT.
//!
//! Sliding the length-M window by one sample maps bin k−1 to bin k (the dechirped
//! frequency of every component rises by one), so the whole spectrum can be carried
//! forward with one rotation and M complex multiplies instead of a fresh transform:
//!
//!   V_{n+1}[k] = α̃[k] · (V_n[(k−1) mod M] + δ_{n+1}/√M),
//!
//! with δ_{n+1} = y_{n+M} − y_n (the sample entering the window minus the one that
//! wrapped out) and α̃[k] = −e^{−jπ/M}·e^{j2πk/M}. Floating-point drift is bounded by
//! recomputing the spectrum from the raw window every 16·M advances.

use crate::css::{unit_phase, ChirpTable};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Full recompute cadence, in units of M advances.
const RESYNC_PERIOD_SYMBOLS: u64 = 16;

/// Spectrum of the dechirped window over the last M raw samples, advanced one
/// sample at a time. One state per antenna stream.
#[derive(Clone, Debug)]
pub struct SlidingDftState {
    m: usize,
    mask: usize,
    spectrum: Vec<Complex64>,
    scratch: Vec<Complex64>,
    ring: Vec<Complex64>,
    head: usize,
    alpha_tilde: Vec<Complex64>,
    conj_basic: Vec<Complex64>,
    twiddle: Vec<Complex64>,
    inv_sqrt_m: f64,
    position: u64,
    ops: u64,
}

impl SlidingDftState {
    /// Seeds the state with one full window; the spectrum starts as a direct
    /// transform of it.
    pub fn init(window: &[Complex64], table: &ChirpTable) -> Result<Self> {
        let m = table.m();
        if window.len() != m {
            return Err(Error::Dimension(format!(
                "window length {} does not match symbol length {m}",
                window.len()
            )));
        }
        let mi = m as i64;
        let alpha_tilde = (0..mi).map(|k| unit_phase(mi - 1 + 2 * k, mi)).collect();
        let mut state = SlidingDftState {
            m,
            mask: m - 1,
            spectrum: vec![Complex64::new(0.0, 0.0); m],
            scratch: vec![Complex64::new(0.0, 0.0); m],
            ring: window.to_vec(),
            head: 0,
            alpha_tilde,
            conj_basic: table.basic().iter().map(|s| s.conj()).collect(),
            twiddle: table.twiddle().to_vec(),
            inv_sqrt_m: 1.0 / (m as f64).sqrt(),
            position: 0,
            ops: 0,
        };
        state.recompute();
        Ok(state)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Raw (uncorrected) bins V_n[k] of the current window.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Advances made since init.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Complex multiply-accumulate count so far (advances contribute M each,
    /// init/resync M² each).
    pub fn op_count(&self) -> u64 {
        self.ops
    }

    /// Slides the window by one sample and carries the spectrum forward.
    pub fn advance(&mut self, new_sample: Complex64) {
        let delta = (new_sample - self.ring[self.head]) * self.inv_sqrt_m;
        self.ring[self.head] = new_sample;
        self.head = (self.head + 1) & self.mask;

        let m = self.m;
        let wrapped = self.spectrum[m - 1] + delta;
        self.scratch[0] = self.alpha_tilde[0] * wrapped;
        for k in 1..m {
            self.scratch[k] = self.alpha_tilde[k] * (self.spectrum[k - 1] + delta);
        }
        std::mem::swap(&mut self.spectrum, &mut self.scratch);
        self.ops += m as u64;
        self.position += 1;
        if self.position % (RESYNC_PERIOD_SYMBOLS * m as u64) == 0 {
            self.recompute();
        }
    }

    /// Recomputes the spectrum from the raw window, discarding accumulated drift.
    pub fn resync(&mut self) {
        self.recompute();
    }

    fn recompute(&mut self) {
        let m = self.m;
        let mask = self.mask;
        for k in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for idx in 0..m {
                let sample = self.ring[(self.head + idx) & mask];
                acc += sample * self.conj_basic[idx] * self.twiddle[(k * idx) & mask];
            }
            self.spectrum[k] = acc * self.inv_sqrt_m;
        }
        self.ops += (m * m) as u64;
    }
}
