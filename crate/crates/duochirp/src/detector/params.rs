//! Precomputed Gaussian model parameters for the correlation-window detector.
//!
//! A detection window holds `n` correlation values spaced one symbol apart.
//! Under each hypothesis the window is Gaussian with a covariance that is
//! diagonal except for one block of `p` consecutive slots where the preamble
//! (or a resembled pair) contributes. That block has the exchangeable form
//! `a*J + b*I`, so inverses and determinants have closed forms; the dense
//! matrices are still materialised and Cholesky-checked at construction time
//! so the fast path can never silently drift from the model it claims to use.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest supported window length. Windows are evaluated on the stack.
pub const MAX_WINDOW: usize = 32;

/// Dense covariance family for one hypothesis class, indexed by overlap `p`.
#[derive(Debug, Clone)]
pub struct CovFamily {
    /// Covariance with the active block in the first `p` slots, `p = 0..=n`.
    pub cov: Vec<DMatrix<f64>>,
    /// Covariance with the active block in the last `p` slots.
    pub cov_rev: Vec<DMatrix<f64>>,
    /// Inverses of `cov`.
    pub inv: Vec<DMatrix<f64>>,
    /// Inverses of `cov_rev`.
    pub inv_rev: Vec<DMatrix<f64>>,
    /// Log-determinants (shared between a matrix and its reversal).
    pub log_det: Vec<f64>,
}

/// Scalar coefficients that reproduce the dense family in O(1) per window.
///
/// For a block `a*J + b*I` of size `p` embedded in a diagonal background
/// `sigma_n_sq * I`, the quadratic form of a window `z` with block mean `mean`
/// splits into block and background sums:
///
/// `Q = (sum_sq_v - shrink[p] * sum_v^2) / b + sum_sq_w / sigma_n_sq`
///
/// with `v` the centred block entries, `w` the remaining entries, and
/// `shrink[p] = a / (b + p*a)`.
#[derive(Debug, Clone)]
pub(crate) struct FamilyCoeffs {
    pub inv_b: f64,
    pub inv_noise: f64,
    pub mean: f64,
    /// `a / (b + p*a)` for `p = 0..=n`.
    pub shrink: Vec<f64>,
    /// `-(n/2) ln 2pi - logdet/2` for `p = 0..=n`.
    pub log_norm: Vec<f64>,
}

impl FamilyCoeffs {
    /// Log-density term for one window placement given its sufficient stats.
    #[inline]
    pub(crate) fn log_term(
        &self,
        p: usize,
        sum_v: f64,
        sum_sq_v: f64,
        sum_sq_w: f64,
    ) -> f64 {
        let quad = (sum_sq_v - self.shrink[p] * sum_v * sum_v) * self.inv_b
            + sum_sq_w * self.inv_noise;
        self.log_norm[p] - 0.5 * quad
    }
}

/// Everything the detector needs, precomputed once per `(m, l, n, noise_var)`.
#[derive(Debug, Clone)]
pub struct DetectorParams {
    /// Symbol length in samples (`2^sf`).
    pub m: usize,
    /// Number of receive antennas combined per correlation value.
    pub l: usize,
    /// Preamble length in symbols; also the detection window length.
    pub n: usize,
    /// Minimum preamble overlap before a detection may fire.
    pub n_thr: usize,
    /// Per-sample complex noise variance of the input stream.
    pub noise_var: f64,
    /// Correlation variance in a noise-only slot.
    pub sigma_n_sq: f64,
    /// Correlation variance in a true preamble slot.
    pub sigma_pp_sq: f64,
    /// Correlation variance in a resembled (cross-user) slot.
    pub sigma_r_sq: f64,
    /// Mean vectors with `m/2` in the first `p` slots, `p = 0..=n`.
    pub mu: Vec<DVector<f64>>,
    /// Mean vectors with `m/2` in the last `p` slots.
    pub mu_rev: Vec<DVector<f64>>,
    /// Covariance family for true preamble overlap.
    pub sigma_cov: CovFamily,
    /// Covariance family for resembled overlap (zero mean).
    pub psi_cov: CovFamily,
    pub(crate) pp: FamilyCoeffs,
    pub(crate) rpp: FamilyCoeffs,
}

fn build_family(n: usize, a: f64, b: f64, noise_var_corr: f64) -> Result<CovFamily> {
    let mut cov = Vec::with_capacity(n + 1);
    let mut cov_rev = Vec::with_capacity(n + 1);
    let mut inv = Vec::with_capacity(n + 1);
    let mut inv_rev = Vec::with_capacity(n + 1);
    let mut log_det = Vec::with_capacity(n + 1);

    for p in 0..=n {
        let mut c = DMatrix::from_diagonal_element(n, n, noise_var_corr);
        for i in 0..p {
            for j in 0..p {
                c[(i, j)] = if i == j { a + b } else { a };
            }
        }
        let chol = nalgebra::Cholesky::new(c.clone()).ok_or_else(|| {
            Error::Internal(format!("covariance not positive definite at p={p}"))
        })?;
        let ld = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let c_inv = chol.inverse();

        let closed = (n - p) as f64 * noise_var_corr.ln()
            + if p > 0 {
                (p - 1) as f64 * b.ln() + (b + p as f64 * a).ln()
            } else {
                0.0
            };
        if (ld - closed).abs() > 1e-9 * ld.abs().max(1.0) {
            return Err(Error::Internal(format!(
                "log-determinant mismatch at p={p}: dense {ld} vs closed form {closed}"
            )));
        }

        let rev = DMatrix::from_fn(n, n, |i, j| c[(n - 1 - i, n - 1 - j)]);
        let rev_inv = DMatrix::from_fn(n, n, |i, j| c_inv[(n - 1 - i, n - 1 - j)]);
        cov.push(c);
        cov_rev.push(rev);
        inv.push(c_inv);
        inv_rev.push(rev_inv);
        log_det.push(ld);
    }

    Ok(CovFamily {
        cov,
        cov_rev,
        inv,
        inv_rev,
        log_det,
    })
}

fn build_coeffs(n: usize, a: f64, b: f64, noise_var_corr: f64, mean: f64, family: &CovFamily) -> FamilyCoeffs {
    let two_pi = 2.0 * std::f64::consts::PI;
    let shrink = (0..=n).map(|p| a / (b + p as f64 * a)).collect();
    let log_norm = (0..=n)
        .map(|p| -0.5 * (n as f64 * two_pi.ln() + family.log_det[p]))
        .collect();
    FamilyCoeffs {
        inv_b: 1.0 / b,
        inv_noise: 1.0 / noise_var_corr,
        mean,
        shrink,
        log_norm,
    }
}

/// Builds detector parameters for symbol length `m`, `l` antennas, preamble
/// length `n`, per-sample noise variance `noise_var`, and overlap threshold
/// `n_thr`.
pub fn make_params(
    m: usize,
    l: usize,
    n: usize,
    noise_var: f64,
    n_thr: usize,
) -> Result<DetectorParams> {
    if m == 0 || l == 0 {
        return Err(Error::Config(
            "symbol length and antenna count must be positive".into(),
        ));
    }
    if n < 2 || n > MAX_WINDOW {
        return Err(Error::Config(format!(
            "preamble length {n} outside supported range 2..={MAX_WINDOW}"
        )));
    }
    if n_thr == 0 || n_thr > n {
        return Err(Error::Config(format!(
            "overlap threshold {n_thr} must lie in 1..={n}"
        )));
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::Config(format!(
            "noise variance must be positive and finite, got {noise_var}"
        )));
    }

    let mf = m as f64;
    let lf = l as f64;
    let sigma_n_sq = noise_var * noise_var / (2.0 * lf);
    let b = mf * noise_var / (2.0 * lf) + sigma_n_sq;
    let a_pp = mf * mf / (4.0 * lf);
    let a_rpp = mf * mf / (8.0 * lf);
    let sigma_pp_sq = a_pp + b;
    let sigma_r_sq = a_rpp + b;

    let mu: Vec<DVector<f64>> = (0..=n)
        .map(|p| DVector::from_fn(n, |i, _| if i < p { mf / 2.0 } else { 0.0 }))
        .collect();
    let mu_rev: Vec<DVector<f64>> = (0..=n)
        .map(|p| DVector::from_fn(n, |i, _| if i >= n - p { mf / 2.0 } else { 0.0 }))
        .collect();

    let sigma_cov = build_family(n, a_pp, b, sigma_n_sq)?;
    let psi_cov = build_family(n, a_rpp, b, sigma_n_sq)?;
    let pp = build_coeffs(n, a_pp, b, sigma_n_sq, mf / 2.0, &sigma_cov);
    let rpp = build_coeffs(n, a_rpp, b, sigma_n_sq, 0.0, &psi_cov);

    Ok(DetectorParams {
        m,
        l,
        n,
        n_thr,
        noise_var,
        sigma_n_sq,
        sigma_pp_sq,
        sigma_r_sq,
        mu,
        mu_rev,
        sigma_cov,
        psi_cov,
        pp,
        rpp,
    })
}
