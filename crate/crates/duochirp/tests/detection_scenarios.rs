//! End-to-end detector behavior on constructed streams: firing geometry,
//! silence on pure noise, resemblance reproductions, and scoring consistency.

use duochirp::channel::{draw_channel, synthesize, PacketPlan};
use duochirp::css::build_chirp_table;
use duochirp::detector::{make_params, run_detection};
use duochirp::harness::scenarios::{example1, example2, self_resemblance};
use duochirp::harness::{matches_transmission, run_trial, SimConfig, TrialCounts};
use duochirp::preamble::{assign_preambles, AssignmentPlan, AssignmentPolicy, PreambleAssignment};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn near_noiseless_single_ed_fires_once_at_preamble_completion() {
    let (m, l, n, n_thr) = (128usize, 32usize, 8usize, 4usize);
    let table = build_chirp_table(7).unwrap();
    let assignment = PreambleAssignment::new(1, 0, 30, m).unwrap();
    let plan = AssignmentPlan {
        assignments: vec![assignment],
        m,
        n_preamble: n,
    };
    let noise_var = 1e-4;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let toa = 2 * n * m + 17; // windows are ready well before the packet
        let packet = PacketPlan {
            ed_id: 1,
            toa,
            payload_symbols: vec![11, 96, 3],
            assignment: plan.assignments[0].clone(),
            n_preamble: n,
        };
        let channel = draw_channel(l, &mut rng);
        let t = toa + (n + 3) * m + n * m;
        let stream =
            synthesize(&[packet], &[channel], noise_var, l, t, &table, &mut rng).unwrap();
        let params = make_params(m, l, n, noise_var, n_thr).unwrap();
        let events = run_detection(&stream, &plan, &params, &table).unwrap();
        assert_eq!(events.len(), 1, "seed {seed}: {events:?}");
        // The rule first wins when n_thr symbols are in view and must then
        // hold through full overlap, so the event lands on the last preamble
        // sample.
        assert_eq!(events[0].sample_index, toa + n * m - 1, "seed {seed}");
        assert_eq!(events[0].ed_id, 1);
        let (lp, ln, lr) = events[0].log_likelihoods;
        assert!(lp > ln && lp > lr);
    }
}

#[test]
fn pure_noise_stream_emits_no_events() {
    let (m, l, n, n_thr) = (128usize, 8usize, 8usize, 4usize);
    let table = build_chirp_table(7).unwrap();
    let noise_var = 1.0;
    let t = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE);
    let stream = synthesize(&[], &[], noise_var, l, t, &table, &mut rng).unwrap();
    let plan = assign_preambles(5, m, AssignmentPolicy::SeededRandom, 3).unwrap();
    let params = make_params(m, l, n, noise_var, n_thr).unwrap();
    let events = run_detection(&stream, &plan, &params, &table).unwrap();
    assert!(events.is_empty(), "false alarms on pure noise: {events:?}");
}

#[test]
fn multiuser_high_snr_trials_score_all_users_correct() {
    let config = SimConfig {
        n_users: 5,
        l_antennas: 32,
        trials: 1,
        snr_grid_db: vec![30.0],
        ..SimConfig::default()
    };
    let plan = assign_preambles(5, config.m(), config.policy, config.master_seed).unwrap();
    for trial in 0..20u64 {
        let counts = run_trial(&config, &plan, 30.0, trial).unwrap();
        assert_eq!(
            counts,
            TrialCounts {
                correct: 5,
                wrong: 0,
                missed: 0
            },
            "trial {trial}"
        );
    }
}

#[test]
fn scoring_accepts_own_aligned_instants_and_rejects_foreign_phase() {
    let (m, n, n_thr) = (128usize, 8usize, 4usize);
    let toa = 4096;
    // Every complete-symbol instant of the preamble and of the trailing
    // n_thr-overlap region matches.
    for k in 1..=(2 * n - n_thr) {
        let w = toa + k * m - 1;
        assert!(matches_transmission(toa, m, n, n_thr, w), "{k} symbols in");
    }
    // A firing triggered by another packet whose arrival phase differs stays
    // unexplained, even when it falls inside the preamble's time span.
    for off in [m / 4, m / 2, 3 * m / 4] {
        assert!(!matches_transmission(toa, m, n, n_thr, toa + 4 * m - 1 + off));
    }
    // Firing before the first symbol completes, or after the trailing overlap
    // drops below n_thr, matches nothing.
    assert!(!matches_transmission(toa, m, n, n_thr, toa + m / 2));
    assert!(!matches_transmission(toa, m, n, n_thr, toa + (2 * n) * m - 1));
}

#[test]
fn example_scenarios_reproduce_resemblance_effects() {
    let r1 = example1(1).unwrap();
    assert!(r1.passes(), "{r1:?}");

    let r2 = example2(1).unwrap();
    assert!(r2.passes(), "{r2:?}");
    assert_eq!(r2.events.len(), 2);
    // ToAs 0 and 31 leave no window history before the packets, so the first
    // possible win is already at full overlap and the confirmation chain
    // completes on the last instant the trailing overlap still explains.
    assert_eq!(r2.events[0].sample_index, 12 * 128 - 1);
    assert_eq!(r2.events[1].sample_index, 31 + 12 * 128 - 1);

    let r3 = self_resemblance().unwrap();
    assert!(r3.passes(), "{r3:?}");
    assert_eq!(r3.spacing, 64);
    for &v in &r3.grid_values[..r3.grid_values.len() - 1] {
        assert!((v - 64.0).abs() < 1e-6, "full-strength peak expected: {v}");
    }
    let tail = *r3.grid_values.last().unwrap();
    assert!((tail - 16.0).abs() < 1e-6, "half-overlap tail peak: {tail}");
}
