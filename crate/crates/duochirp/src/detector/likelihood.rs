//! Log-domain hypothesis likelihoods for a detection window.
//!
//! Every hypothesis places a contiguous block of `p` active slots at either
//! end of the window, so each Gaussian term needs only block sums of the
//! window entries. Terms are accumulated with log-sum-exp; nothing is ever
//! exponentiated in the linear domain. The same code path serves the public
//! operations and the streaming detector, which additionally uses an exact
//! upper bound to skip the exp calls on windows that cannot fire.

use super::params::{DetectorParams, FamilyCoeffs, MAX_WINDOW};

/// Prefix sums of a window, enough to get any block's centred moments in O(1).
struct WindowStats {
    n: usize,
    sum: [f64; MAX_WINDOW + 1],
    sum_sq: [f64; MAX_WINDOW + 1],
}

impl WindowStats {
    fn new(z: &[f64]) -> Self {
        let n = z.len();
        debug_assert!(n <= MAX_WINDOW);
        let mut sum = [0.0; MAX_WINDOW + 1];
        let mut sum_sq = [0.0; MAX_WINDOW + 1];
        for (i, &v) in z.iter().enumerate() {
            sum[i + 1] = sum[i] + v;
            sum_sq[i + 1] = sum_sq[i] + v * v;
        }
        Self { n, sum, sum_sq }
    }

    /// Centred sums when the active block is the first `p` entries.
    #[inline]
    fn first_block(&self, p: usize, mean: f64) -> (f64, f64, f64) {
        let pf = p as f64;
        let sum_v = self.sum[p] - pf * mean;
        let sum_sq_v = self.sum_sq[p] - 2.0 * mean * self.sum[p] + pf * mean * mean;
        let sum_sq_w = self.sum_sq[self.n] - self.sum_sq[p];
        (sum_v, sum_sq_v, sum_sq_w)
    }

    /// Centred sums when the active block is the last `p` entries.
    #[inline]
    fn last_block(&self, p: usize, mean: f64) -> (f64, f64, f64) {
        let pf = p as f64;
        let s1 = self.sum[self.n] - self.sum[self.n - p];
        let s2 = self.sum_sq[self.n] - self.sum_sq[self.n - p];
        let sum_v = s1 - pf * mean;
        let sum_sq_v = s2 - 2.0 * mean * s1 + pf * mean * mean;
        let sum_sq_w = self.sum_sq[self.n - p];
        (sum_v, sum_sq_v, sum_sq_w)
    }
}

/// Fixed-capacity accumulator for hypothesis log-densities.
struct TermBuf {
    vals: [f64; 2 * MAX_WINDOW],
    len: usize,
}

impl TermBuf {
    fn new() -> Self {
        Self {
            vals: [0.0; 2 * MAX_WINDOW],
            len: 0,
        }
    }

    #[inline]
    fn push(&mut self, v: f64) {
        self.vals[self.len] = v;
        self.len += 1;
    }

    fn max(&self) -> f64 {
        self.vals[..self.len]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    fn log_sum_exp(&self) -> f64 {
        let m = self.max();
        let s: f64 = self.vals[..self.len].iter().map(|&v| (v - m).exp()).sum();
        m + s.ln()
    }
}

/// Log-sum-exp of two values.
#[inline]
pub(crate) fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Pushes one term per block placement: first-block for `p_lo..=n`, plus
/// last-block for `p_lo..n` (the full-window placement is counted once).
fn block_terms(stats: &WindowStats, coeffs: &FamilyCoeffs, p_lo: usize, buf: &mut TermBuf) {
    let n = stats.n;
    for p in p_lo..=n {
        let (sv, ssv, ssw) = stats.first_block(p, coeffs.mean);
        buf.push(coeffs.log_term(p, sv, ssv, ssw));
    }
    for p in p_lo..n {
        let (sv, ssv, ssw) = stats.last_block(p, coeffs.mean);
        buf.push(coeffs.log_term(p, sv, ssv, ssw));
    }
}

pub(crate) fn ll_noise_slice(z: &[f64], params: &DetectorParams) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let ssq: f64 = z.iter().map(|v| v * v).sum();
    -ssq / (2.0 * params.sigma_n_sq) - 0.5 * z.len() as f64 * (two_pi * params.sigma_n_sq).ln()
}

pub(crate) fn ll_preamble_slice(z: &[f64], params: &DetectorParams) -> f64 {
    let stats = WindowStats::new(z);
    let mut buf = TermBuf::new();
    block_terms(&stats, &params.pp, params.n_thr, &mut buf);
    buf.log_sum_exp()
}

pub(crate) fn ll_resembled_slice(z: &[f64], params: &DetectorParams) -> f64 {
    let stats = WindowStats::new(z);
    let mut buf = TermBuf::new();
    block_terms(&stats, &params.rpp, 1, &mut buf);
    buf.log_sum_exp()
}

/// Streaming decision: returns the likelihood triple iff the rule fires.
///
/// The preamble likelihood is bounded above by `ln(count) + max_term`; when
/// that bound does not exceed the noise likelihood the window cannot fire
/// (the right-hand side of the rule is strictly above the noise likelihood),
/// so the exp calls are skipped. The bound is exact, not a heuristic: no
/// firing window is ever skipped.
pub(crate) fn decide_slice(z: &[f64], params: &DetectorParams) -> Option<(f64, f64, f64)> {
    let ll_n = ll_noise_slice(z, params);
    let stats = WindowStats::new(z);
    let mut buf = TermBuf::new();
    block_terms(&stats, &params.pp, params.n_thr, &mut buf);
    if (buf.len as f64).ln() + buf.max() <= ll_n {
        return None;
    }
    let ll_p = buf.log_sum_exp();
    let mut rbuf = TermBuf::new();
    block_terms(&stats, &params.rpp, 1, &mut rbuf);
    let ll_r = rbuf.log_sum_exp();
    if ll_p > log_sum_exp2(ll_n, ll_r) {
        Some((ll_p, ll_n, ll_r))
    } else {
        None
    }
}
