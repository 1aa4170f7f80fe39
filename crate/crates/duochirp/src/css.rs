//! Chirp spread spectrum primitives: chirp generation, dechirping, windowed DFT
//! demodulation with bin-phase correction, and square-law antenna combining.
//!
//! The basic upchirp of length M = 2^SF has samples s₀[m] = exp(jπ·m(m−M)/M) for
//! m = 0..M−1; the modulation alphabet is its M cyclic shifts, s_m̃[m] = s₀[m+m̃ mod M].
//! Multiplying a received window by conj(s₀) ("dechirping") turns chirp m̃ into the
//! tone exp(j2πm̃m/M)·exp(jθ_m̃), where θ_k = 2π(k²/2M − k/2) is a deterministic
//! bin-dependent phase offset, so a length-M DFT concentrates the symbol in bin m̃.
//!
//! Bins use the unitary DFT (kernel exp(−j2πkm/M), scaled by 1/√M): a unit-amplitude
//! chirp lands √M in its bin, white noise keeps its per-sample variance per bin, and
//! window energy equals bin energy.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Unit-modulus complex number with angle π·num/den, with exact integer angle
/// reduction into [0, 2π) before the trig evaluation.
pub(crate) fn unit_phase(num: i64, den: i64) -> Complex64 {
    let reduced = num.rem_euclid(2 * den);
    Complex64::from_polar(1.0, PI * reduced as f64 / den as f64)
}

/// Precomputed chirp alphabet for one spreading factor.
///
/// Holds all M cyclic chirps (as views into a doubled basic-chirp buffer), the
/// bin-phase correction factors e^{−jθ_k}, and the DFT twiddles shared by the
/// demodulators.
#[derive(Clone, Debug)]
pub struct ChirpTable {
    sf: u32,
    m: usize,
    basic2: Vec<Complex64>,
    phase_corr: Vec<Complex64>,
    twiddle: Vec<Complex64>,
}

pub const SF_RANGE: std::ops::RangeInclusive<u32> = 5..=12;

/// Builds the chirp table for a spreading factor in 5..=12 (M = 2^sf).
pub fn build_chirp_table(sf: u32) -> Result<ChirpTable> {
    if !SF_RANGE.contains(&sf) {
        return Err(Error::Config(format!(
            "spreading factor {sf} outside supported range {}..={}",
            SF_RANGE.start(),
            SF_RANGE.end()
        )));
    }
    let m = 1usize << sf;
    let mi = m as i64;
    let mut basic2 = Vec::with_capacity(2 * m);
    for idx in 0..m as i64 {
        basic2.push(unit_phase(idx * (idx - mi), mi));
    }
    basic2.extend_from_within(..);
    let phase_corr = (0..m as i64)
        .map(|k| unit_phase(-(k * (k - mi)), mi))
        .collect();
    let twiddle = (0..m as i64).map(|r| unit_phase(-2 * r, mi)).collect();
    Ok(ChirpTable {
        sf,
        m,
        basic2,
        phase_corr,
        twiddle,
    })
}

impl ChirpTable {
    pub fn sf(&self) -> u32 {
        self.sf
    }

    /// Symbol length M = 2^sf in samples.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Cyclic chirp m̃ as a length-M slice, s_m̃[m] = s₀[m+m̃ mod M].
    pub fn chirp(&self, m_tilde: usize) -> &[Complex64] {
        assert!(m_tilde < self.m, "chirp index {m_tilde} out of range");
        &self.basic2[m_tilde..m_tilde + self.m]
    }

    /// The basic upchirp s₀.
    pub fn basic(&self) -> &[Complex64] {
        &self.basic2[..self.m]
    }

    /// Bin-phase correction factors e^{−jθ_k}, θ_k = 2π(k²/2M − k/2).
    pub fn phase_correction(&self) -> &[Complex64] {
        &self.phase_corr
    }

    pub(crate) fn twiddle(&self) -> &[Complex64] {
        &self.twiddle
    }

    fn check_window(&self, window: &[Complex64]) -> Result<()> {
        if window.len() != self.m {
            return Err(Error::Dimension(format!(
                "window length {} does not match symbol length {}",
                window.len(),
                self.m
            )));
        }
        Ok(())
    }
}

/// DFT of one dechirped window: raw bins and their phase-corrected counterparts.
#[derive(Clone, Debug)]
pub struct BinSpectrum {
    /// Raw unitary-DFT bins V[k].
    pub values: Vec<Complex64>,
    /// Ṽ[k] = V[k]·e^{−jθ_k}; same magnitudes as `values`.
    pub corrected: Vec<Complex64>,
}

impl BinSpectrum {
    /// Wraps raw bins, applying the phase-offset correction.
    pub fn from_values(values: Vec<Complex64>, table: &ChirpTable) -> Self {
        let corrected = values
            .iter()
            .zip(&table.phase_corr)
            .map(|(v, c)| v * c)
            .collect();
        BinSpectrum { values, corrected }
    }

    /// Reconstructs raw bins from corrected ones (exact inverse of the correction);
    /// useful when a spectrum is synthesized directly in the bin domain.
    pub fn from_corrected(corrected: Vec<Complex64>, table: &ChirpTable) -> Self {
        let values = corrected
            .iter()
            .zip(&table.phase_corr)
            .map(|(v, c)| v * c.conj())
            .collect();
        BinSpectrum { values, corrected }
    }
}

/// Per-bin power Υ[k] combined over antennas.
#[derive(Clone, Debug)]
pub struct BinPowerVector {
    pub powers: Vec<f64>,
}

/// Element-wise product of a window with the conjugate basic upchirp.
pub fn dechirp(window: &[Complex64], table: &ChirpTable) -> Result<Vec<Complex64>> {
    table.check_window(window)?;
    Ok(window
        .iter()
        .zip(table.basic())
        .map(|(w, s)| w * s.conj())
        .collect())
}

/// Unitary DFT of the dechirped window, with corrected bins alongside.
pub fn demod_bins(window: &[Complex64], table: &ChirpTable) -> Result<BinSpectrum> {
    let d = dechirp(window, table)?;
    let m = table.m;
    let mask = m - 1;
    let scale = 1.0 / (m as f64).sqrt();
    let tw = table.twiddle();
    let mut values = Vec::with_capacity(m);
    for k in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, dm) in d.iter().enumerate() {
            acc += dm * tw[(k * idx) & mask];
        }
        values.push(acc * scale);
    }
    Ok(BinSpectrum::from_values(values, table))
}

/// Sums |corrected|² across antennas: powers[k] = Σ_ℓ |Ṽ_ℓ[k]|².
pub fn square_law_combine(spectra: &[BinSpectrum]) -> Result<BinPowerVector> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Dimension("square-law combining needs at least one antenna".into()))?;
    let m = first.corrected.len();
    let mut powers = vec![0.0; m];
    for sp in spectra {
        if sp.corrected.len() != m {
            return Err(Error::Dimension(format!(
                "spectrum length {} does not match {}",
                sp.corrected.len(),
                m
            )));
        }
        for (p, v) in powers.iter_mut().zip(&sp.corrected) {
            *p += v.norm_sqr();
        }
    }
    Ok(BinPowerVector { powers })
}
