use qsync_core::channel::{simulate, ChannelConfig, ClockPair};
use qsync_core::fast_xcorr::AliceReference;
use qsync_core::pipeline::{run_sync, SyncConfig, SyncError, SyncInput};
use qsync_core::sync_string::{generate_string, StringParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 20e-9;

#[test]
fn seeded_runs_align_every_signal_detection() {
    let s = generate_string(StringParams::new(1_000_000, 10, 1.0, 3).unwrap()).unwrap();
    let alice = AliceReference::from_sync_string(&s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for seed in 0..20u64 {
        let eta = if seed % 2 == 0 { 1e-3 } else { 1e-2 };
        let clock = ClockPair {
            fractional_offset: rng.random_range(-1e-3..1e-3),
            jitter_sigma: 100e-12,
            ..ClockPair::new(TAU)
        };
        let start_time = rng.random_range(0.0..2e-4);
        let duration = start_time + 1.05e6 * TAU * 1.001;
        let chan = ChannelConfig { eta, qber: 0.05, background_rate: 200.0, duration, start_time, seed, ..Default::default() };
        let out = simulate(&clock, &chan, &s).unwrap();
        // the sparse runs need the whole string in the first window
        let t_acq = if eta < 5e-3 { duration } else { duration / 4.0 };
        let cfg = SyncConfig { eta_hint: Some(eta), ..SyncConfig::new(TAU, 100e-12, t_acq) };
        let input = SyncInput { arrivals: &out.arrivals, outcomes: &out.outcomes, truth: Some(&out.truth) };
        let report = run_sync(&cfg, &alice, input).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(report.synchronized, "seed {seed}");
        assert_eq!(report.alignment_accuracy, Some(1.0), "seed {seed}");
        assert_eq!(report.offset_attempts, 1);
    }
}

#[test]
fn failure_never_claims_synchronization() {
    let s = generate_string(StringParams::new(1_000_000, 10, 1.0, 4).unwrap()).unwrap();
    let alice = AliceReference::from_sync_string(&s).unwrap();
    for seed in 0..5u64 {
        let clock = ClockPair { fractional_offset: 5e-4, jitter_sigma: 100e-12, ..ClockPair::new(TAU) };
        let chan = ChannelConfig { eta: 1e-4, qber: 0.02, background_rate: 200.0, duration: 0.021, seed, ..Default::default() };
        let out = simulate(&clock, &chan, &s).unwrap();
        let cfg = SyncConfig { eta_hint: Some(1e-4), ..SyncConfig::new(TAU, 100e-12, 0.021) };
        let input = SyncInput { arrivals: &out.arrivals, outcomes: &out.outcomes, truth: Some(&out.truth) };
        match run_sync(&cfg, &alice, input) {
            Ok(r) => assert!(!r.synchronized || r.offset.as_ref().is_some_and(|o| o.success)),
            Err(SyncError::Failed { report, .. }) => assert!(!report.synchronized),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn weak_first_window_is_retried_with_more_data() {
    let s = generate_string(StringParams::new(1_000_000, 10, 1.0, 5).unwrap()).unwrap();
    let alice = AliceReference::from_sync_string(&s).unwrap();
    let clock = ClockPair { fractional_offset: 2e-4, jitter_sigma: 100e-12, ..ClockPair::new(TAU) };
    let chan = ChannelConfig { eta: 1e-3, background_rate: 200.0, duration: 0.021, seed: 1, ..Default::default() };
    let out = simulate(&clock, &chan, &s).unwrap();
    // a 2.5 ms first window holds ~125 sync bits, too few for Δ ≥ 10
    let cfg = SyncConfig { eta_hint: Some(1e-3), ..SyncConfig::new(TAU, 100e-12, 0.0025) };
    let input = SyncInput { arrivals: &out.arrivals, outcomes: &out.outcomes, truth: Some(&out.truth) };
    let attempts = match run_sync(&cfg, &alice, input) {
        Ok(r) => r.offset_attempts,
        Err(e) => e.report().expect("failure carries a report").offset_attempts,
    };
    assert_eq!(attempts, 2);
}
