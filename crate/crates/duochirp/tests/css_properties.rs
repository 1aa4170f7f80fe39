//! Demodulation properties checked against an independently written DFT oracle.

use duochirp::css::{build_chirp_table, demod_bins, ChirpTable};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Textbook reference demodulator built from first principles: dechirp with
/// conj(exp(jπ·m(m−M)/M)), then a unitary DFT evaluated term by term.
fn oracle_bins(window: &[Complex64]) -> Vec<Complex64> {
    let m = window.len();
    let dechirped: Vec<Complex64> = window
        .iter()
        .enumerate()
        .map(|(idx, w)| {
            let phase = PI * idx as f64 * (idx as f64 - m as f64) / m as f64;
            w * Complex64::from_polar(1.0, -phase)
        })
        .collect();
    (0..m)
        .map(|k| {
            let acc: Complex64 = dechirped
                .iter()
                .enumerate()
                .map(|(idx, d)| d * Complex64::from_polar(1.0, -2.0 * PI * (k * idx) as f64 / m as f64))
                .sum();
            acc / (m as f64).sqrt()
        })
        .collect()
}

fn random_window(rng: &mut ChaCha8Rng, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn table() -> ChirpTable {
    build_chirp_table(7).unwrap()
}

#[test]
fn demod_matches_direct_dft_oracle_on_random_windows() {
    let t = table();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let window = random_window(&mut rng, t.m());
        let spec = demod_bins(&window, &t).unwrap();
        let oracle = oracle_bins(&window);
        for (v, o) in spec.values.iter().zip(&oracle) {
            assert!((v - o).norm() < 1e-9 * o.norm().max(1.0));
        }
    }
}

#[test]
fn every_chirp_demodulates_to_its_own_bin() {
    let t = table();
    let m = t.m();
    let root_m = (m as f64).sqrt();
    for m_tilde in 0..m {
        let spec = demod_bins(t.chirp(m_tilde), &t).unwrap();
        for (k, v) in spec.corrected.iter().enumerate() {
            if k == m_tilde {
                assert!((v - Complex64::new(root_m, 0.0)).norm() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "chirp {m_tilde} leaked into bin {k}");
            }
        }
    }
}

#[test]
fn sliding_a_repeated_chirp_by_one_sample_looks_like_the_next_chirp() {
    let t = table();
    let m = t.m();
    for &m_tilde in &[0usize, 9, 126, 127] {
        let c = t.chirp(m_tilde);
        let mut slid: Vec<Complex64> = c[1..].to_vec();
        slid.push(c[0]);
        let spec = demod_bins(&slid, &t).unwrap();
        let peak = spec
            .corrected
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, (m_tilde + 1) % m);
    }
}

#[test]
fn corrected_bin_carries_the_channel_phase() {
    let t = table();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let h = Complex64::from_polar(rng.gen_range(0.2..2.0), rng.gen_range(-PI..PI));
        let m_tilde = rng.gen_range(0..t.m());
        let window: Vec<Complex64> = t.chirp(m_tilde).iter().map(|s| h * s).collect();
        let spec = demod_bins(&window, &t).unwrap();
        let mut diff = spec.corrected[m_tilde].arg() - h.arg();
        diff = (diff + PI).rem_euclid(2.0 * PI) - PI;
        assert!(diff.abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // unitary convention: window energy equals bin energy
    #[test]
    fn dft_preserves_energy(seed in any::<u64>()) {
        let t = table();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let window = random_window(&mut rng, t.m());
        let spec = demod_bins(&window, &t).unwrap();
        let win_energy: f64 = window.iter().map(|w| w.norm_sqr()).sum();
        let bin_energy: f64 = spec.values.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((bin_energy - win_energy).abs() <= 1e-9 * win_energy.max(1.0));
    }
}
