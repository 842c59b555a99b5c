//! Acquisition loop, parameter sweep and complexity benchmark.
//!
//! Detections are processed in acquisition windows of `T_acq`. Every window
//! gets a period estimate and slot assignment; the first window also locates
//! the sync string and runs the offset search, whose result fixes the
//! absolute pulse index of every later window.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{build_bob_string, erase_and_flip, first_guess_rising_edge, simulate, ChannelConfig, ClockPair, Outcome, Truth};
use crate::fast_xcorr::{complexity_probe, find_offset, AliceReference, BaselineReference, OffsetResult, XcorrError};
use crate::period::{assign_slots, coarse_period_fft_band, drift_guard, refine_period_lts, ArrivalTimes, PeriodConfig, PeriodError, PeriodEstimate};
use crate::spectral::OpCounter;
use crate::sync_string::{generate_string, StringError, StringParams};

/// Largest FFT length tried when too few detections fall in the sampling span.
const MAX_COARSE_SAMPLES: usize = 1 << 22;
/// Detections used to carry the absolute index across a window boundary.
const HANDOVER_DETECTIONS: usize = 64;
/// Minimum window length the drift guard may shrink to, in units of `T_acq`.
const MIN_WINDOW_FRACTION: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    pub tau_a: f64,
    pub sigma: f64,
    pub t_acq: f64,
    pub trim_fraction: f64,
    pub n_samples: usize,
    pub search_band: f64,
    pub delta_threshold: f64,
    /// Expected sifted detections per slot; estimated from the data if `None`.
    pub eta_hint: Option<f64>,
    /// Rising-edge window in slots; defaults to `20/η`.
    pub edge_window: Option<usize>,
}

impl SyncConfig {
    pub fn new(tau_a: f64, sigma: f64, t_acq: f64) -> Self {
        Self {
            tau_a,
            sigma,
            t_acq,
            trim_fraction: 0.3,
            n_samples: 1_000_000,
            search_band: 0.1,
            delta_threshold: 10.0,
            eta_hint: None,
            edge_window: None,
        }
    }

    fn period_config(&self, n_samples: usize) -> PeriodConfig {
        PeriodConfig { trim_fraction: self.trim_fraction, n_samples, search_band: self.search_band, ..PeriodConfig::new(self.tau_a, self.sigma) }
    }

    fn validate(&self) -> Result<(), SyncError> {
        let ok = self.tau_a > 0.0
            && self.sigma >= 0.0
            && self.t_acq > 0.0
            && (0.0..1.0).contains(&self.trim_fraction)
            && self.n_samples >= 8
            && self.search_band > 0.0
            && self.search_band < 1.0
            && self.delta_threshold.is_finite()
            && self.eta_hint.is_none_or(|e| e > 0.0 && e <= 1.0)
            && self.edge_window != Some(0);
        if ok {
            Ok(())
        } else {
            Err(SyncError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Detections to synchronize, with the hidden truth when simulated.
#[derive(Debug, Clone, Copy)]
pub struct SyncInput<'a> {
    pub arrivals: &'a ArrivalTimes,
    pub outcomes: &'a [Outcome],
    pub truth: Option<&'a [Truth]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub start: f64,
    pub t_acq: f64,
    pub detections: usize,
    pub estimate: PeriodEstimate,
    /// Whether the coarse FFT ran; later windows first try the previous `τ_B`.
    pub used_fft: bool,
    pub collisions: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub period: Duration,
    pub offset: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub windows: Vec<WindowReport>,
    pub offset: Option<OffsetResult>,
    /// Number of offset searches run; more than one only after a retry.
    pub offset_attempts: usize,
    pub first_guess_slot: Option<i64>,
    /// Absolute transmitted-pulse index of every detection, `None` when unassigned.
    pub absolute_index: Vec<Option<i64>>,
    /// Fraction of non-background detections with the correct absolute index.
    pub alignment_accuracy: Option<f64>,
    pub synchronized: bool,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailureCause {
    Period { window: usize, error: PeriodError },
    NoEdge,
    Offset(XcorrError),
    LowDistinguishability { delta: f64, threshold: f64 },
}

impl std::fmt::Display for FailureCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureCause::Period { window, error } => write!(f, "period recovery failed in window {window}: {error}"),
            FailureCause::NoEdge => write!(f, "no rising edge in the detection rate"),
            FailureCause::Offset(e) => write!(f, "offset search failed: {e}"),
            FailureCause::LowDistinguishability { delta, threshold } => {
                write!(f, "distinguishability {delta:.2} below threshold {threshold}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("invalid sync config: {0}")]
    InvalidConfig(String),
    #[error("synchronization failed: {cause}")]
    Failed { cause: FailureCause, report: Box<RunReport> },
}

impl SyncError {
    pub fn report(&self) -> Option<&RunReport> {
        match self {
            SyncError::Failed { report, .. } => Some(report),
            SyncError::InvalidConfig(_) => None,
        }
    }
}

/// Coarse FFT then refinement, doubling the FFT length while too few
/// detections fall inside the sampling span.
pub fn estimate_period(arrivals: &ArrivalTimes, cfg: &SyncConfig) -> Result<PeriodEstimate, PeriodError> {
    let span = arrivals.timestamps().last().zip(arrivals.timestamps().first()).map_or(0.0, |(b, a)| b - a);
    let max_n = ((span / (cfg.tau_a / 4.0)).ceil() as usize).next_power_of_two().clamp(cfg.n_samples, MAX_COARSE_SAMPLES);
    let mut n = cfg.n_samples;
    loop {
        match coarse_period_fft_band(arrivals, cfg.tau_a, n, cfg.search_band) {
            Ok(tau_0) => return refine_period_lts(arrivals, tau_0, &cfg.period_config(n)),
            Err(PeriodError::TooFewDetections { .. }) if n < max_n => n = (2 * n).min(max_n),
            Err(e) => return Err(e),
        }
    }
}

/// Refinement from a previous `τ_B`, falling back to the FFT.
fn estimate_chained(arrivals: &ArrivalTimes, prev_tau: f64, cfg: &SyncConfig) -> (Result<PeriodEstimate, PeriodError>, bool) {
    match refine_period_lts(arrivals, prev_tau, &cfg.period_config(cfg.n_samples)) {
        Ok(est) if est.ok => (Ok(est), false),
        _ => (estimate_period(arrivals, cfg), true),
    }
}

fn window(all: &ArrivalTimes, start: f64, len: f64) -> (std::ops::Range<usize>, ArrivalTimes) {
    let ts = all.timestamps();
    let lo = ts.partition_point(|&t| t < start);
    let hi = ts.partition_point(|&t| t < start + len);
    let arrivals = ArrivalTimes::new(ts[lo..hi].to_vec(), start, len, all.resolution())
        .expect("sub-window of valid arrivals is valid");
    (lo..hi, arrivals)
}

struct FirstWindow {
    report: WindowReport,
    range: std::ops::Range<usize>,
    slots: Vec<Option<i64>>,
    offset: Result<OffsetResult, FailureCause>,
    first_guess: Option<i64>,
}

fn first_window(
    input: &SyncInput<'_>,
    alice: &AliceReference,
    cfg: &SyncConfig,
    t_acq: f64,
    timings: &mut StageTimings,
) -> Result<FirstWindow, (FailureCause, Option<WindowReport>)> {
    let start = input.arrivals.window_start();
    let t_acq = t_acq.min(input.arrivals.window_start() + input.arrivals.acquisition_window() - start);
    let (range, arrivals) = window(input.arrivals, start, t_acq);
    let clock = Instant::now();
    let est = estimate_period(&arrivals, cfg).map_err(|error| (FailureCause::Period { window: 0, error }, None))?;
    let report = WindowReport { start, t_acq, detections: arrivals.len(), estimate: est.clone(), used_fft: true, collisions: 0 };
    let assignment = match assign_slots(&arrivals, &est) {
        Ok(a) => a,
        Err(error) => return Err((FailureCause::Period { window: 0, error }, Some(report))),
    };
    timings.period += clock.elapsed();
    let report = WindowReport { collisions: assignment.collisions.len(), ..report };

    let clock = Instant::now();
    let slots: Vec<i64> = assignment.assigned().map(|(_, s)| s).collect();
    let eta = cfg.eta_hint.unwrap_or_else(|| {
        let span = (slots.last().copied().unwrap_or(0) - slots.first().copied().unwrap_or(0) + 1) as f64;
        (slots.len() as f64 / span).min(1.0)
    });
    let edge_window = cfg.edge_window.unwrap_or_else(|| ((20.0 / eta).ceil() as usize).max(1));
    let first_guess = match first_guess_rising_edge(&slots, eta, edge_window) {
        Ok(s) => s,
        Err(_) => {
            timings.offset += clock.elapsed();
            return Err((FailureCause::NoEdge, Some(report)));
        }
    };
    let outcomes = &input.outcomes[range.clone()];
    let bob = build_bob_string(outcomes, &assignment, first_guess, alice.len());
    let offset = find_offset(alice, &bob.symbols, cfg.delta_threshold).map_err(FailureCause::Offset);
    timings.offset += clock.elapsed();
    Ok(FirstWindow { report, range, slots: assignment.slots, offset, first_guess: Some(first_guess) })
}

/// Runs period recovery on every window and offset recovery on the first.
pub fn run_sync(cfg: &SyncConfig, alice: &AliceReference, input: SyncInput<'_>) -> Result<RunReport, SyncError> {
    cfg.validate()?;
    if input.outcomes.len() != input.arrivals.len() || input.truth.is_some_and(|t| t.len() != input.arrivals.len()) {
        return Err(SyncError::InvalidConfig("arrivals, outcomes and truth differ in length".into()));
    }
    let started = Instant::now();
    let mut report = RunReport {
        windows: Vec::new(),
        offset: None,
        offset_attempts: 0,
        first_guess_slot: None,
        absolute_index: vec![None; input.arrivals.len()],
        alignment_accuracy: None,
        synchronized: false,
        timings: StageTimings::default(),
    };
    let fail = |cause: FailureCause, mut report: RunReport| {
        report.timings.total = started.elapsed();
        report.synchronized = false;
        Err(SyncError::Failed { cause, report: Box::new(report) })
    };

    // window 1, retried once with twice the data if the peak is too weak
    let mut first = None;
    for attempt in 0..2 {
        let t_acq = cfg.t_acq * f64::from(1 << attempt);
        match first_window(&input, alice, cfg, t_acq, &mut report.timings) {
            Err((cause, window)) => {
                report.windows.extend(window);
                return fail(cause, report);
            }
            Ok(w) => {
                report.offset_attempts += 1;
                let weak = matches!(&w.offset, Ok(o) if !o.success);
                let covers_all = w.report.start + w.report.t_acq >= input.arrivals.window_start() + input.arrivals.acquisition_window();
                first = Some(w);
                if !weak || covers_all {
                    break;
                }
            }
        }
    }
    let first = first.expect("at least one attempt");
    report.windows.push(first.report.clone());
    report.first_guess_slot = first.first_guess;
    let offset = match first.offset {
        Ok(o) => o,
        Err(cause) => return fail(cause, report),
    };
    report.offset = Some(offset.clone());
    if !offset.success {
        let cause = FailureCause::LowDistinguishability { delta: offset.distinguishability, threshold: cfg.delta_threshold };
        return fail(cause, report);
    }

    // relative slot + shift = absolute pulse index
    let mut shift = offset.signed_offset() - first.first_guess.expect("set with the offset");
    for (k, slot) in first.range.clone().zip(&first.slots) {
        report.absolute_index[k] = slot.map(|s| s + shift);
    }

    let end = input.arrivals.window_start() + input.arrivals.acquisition_window();
    let mut prev = first.report.estimate.clone();
    let mut prev_tau_change: Option<f64> = None;
    let mut start = first.report.start + first.report.t_acq;
    let mut t_acq = cfg.t_acq;
    while start < end {
        let index = report.windows.len();
        if let Some(rate) = prev_tau_change {
            t_acq = drift_guard(&prev, rate, cfg.t_acq, cfg.sigma).max(cfg.t_acq * MIN_WINDOW_FRACTION);
        }
        let len = t_acq.min(end - start);
        let (range, arrivals) = window(input.arrivals, start, len);
        if arrivals.is_empty() {
            start += len;
            continue;
        }
        let clock = Instant::now();
        let (est, used_fft) = estimate_chained(&arrivals, prev.tau_b, cfg);
        let est = match est {
            Ok(e) => e,
            Err(error) => return fail(FailureCause::Period { window: index, error }, report),
        };
        let assignment = match assign_slots(&arrivals, &est) {
            Ok(a) => a,
            Err(error) => {
                report.windows.push(WindowReport { start, t_acq: len, detections: arrivals.len(), estimate: est, used_fft, collisions: 0 });
                return fail(FailureCause::Period { window: index, error }, report);
            }
        };
        report.timings.period += clock.elapsed();

        // carry the absolute index over: most common difference between the
        // previous grid extrapolated and the new grid
        let mut votes: HashMap<i64, usize> = HashMap::new();
        for &t in arrivals.timestamps().iter().take(HANDOVER_DETECTIONS) {
            *votes.entry(prev.slot_of(t) + shift - est.slot_of(t)).or_default() += 1;
        }
        shift = votes.into_iter().max_by_key(|&(s, c)| (c, -s)).map(|(s, _)| s).expect("non-empty window");
        for (k, slot) in range.zip(&assignment.slots) {
            report.absolute_index[k] = slot.map(|s| s + shift);
        }

        prev_tau_change = Some((est.tau_b - prev.tau_b) / len);
        report.windows.push(WindowReport {
            start,
            t_acq: len,
            detections: arrivals.len(),
            estimate: est.clone(),
            used_fft,
            collisions: assignment.collisions.len(),
        });
        prev = est;
        start += len;
    }

    if let Some(truth) = input.truth {
        let mut signal = 0usize;
        let mut correct = 0usize;
        for (t, a) in truth.iter().zip(&report.absolute_index) {
            if let Some(e) = t.emitted_index {
                signal += 1;
                if *a == Some(e as i64) {
                    correct += 1;
                }
            }
        }
        report.alignment_accuracy = Some(if signal == 0 { 0.0 } else { correct as f64 / signal as f64 });
    }
    report.synchronized = offset.success && report.windows.iter().all(|w| w.estimate.ok);
    report.timings.total = started.elapsed();
    Ok(report)
}

/// Simulation parameters shared by every cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub qbers: Vec<f64>,
    /// Expected sifted sync detections `L·η` per cell.
    pub bits: Vec<f64>,
    pub repetitions: usize,
    pub background_rate: f64,
    pub len: usize,
    pub blocks: usize,
    pub lambda: f64,
    pub tau_a: f64,
    pub sigma: f64,
    pub fractional_offset: f64,
    pub seed: u64,
}

impl SweepGrid {
    pub fn new(qbers: Vec<f64>, bits: Vec<f64>, repetitions: usize) -> Self {
        Self {
            qbers,
            bits,
            repetitions,
            background_rate: 200.0,
            len: 1_000_000,
            blocks: 20,
            lambda: 1.0,
            tau_a: 20e-9,
            sigma: 100e-12,
            fractional_offset: 5e-4,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), SweepError> {
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|&x| x > 0.0 && x.is_finite());
        if !positive(&self.bits) || self.qbers.is_empty() || self.qbers.iter().any(|q| !(0.0..=0.5).contains(q)) {
            return Err(SweepError::InvalidGrid("qber and bit values must be non-empty and in range".into()));
        }
        if self.repetitions == 0 || self.bits.iter().any(|&b| b > self.len as f64) {
            return Err(SweepError::InvalidGrid(format!("repetitions {}, bits above L = {}", self.repetitions, self.len)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    String(#[from] StringError),
    #[error(transparent)]
    Xcorr(#[from] XcorrError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub qber: f64,
    pub bits: f64,
    pub success_fraction: f64,
}

/// Empty slots simulated before the sync string starts.
const SWEEP_LEAD_SLOTS: f64 = 5_000.0;

/// One seeded end-to-end run. Success means synchronized with every signal
/// detection at its true pulse index.
pub fn sweep_trial(grid: &SweepGrid, alice: &AliceReference, qber: f64, bits: f64, seed: u64) -> bool {
    let eta = (bits / grid.len as f64).min(1.0);
    let clock = ClockPair { fractional_offset: grid.fractional_offset, jitter_sigma: grid.sigma, ..ClockPair::new(grid.tau_a) };
    let start_time = SWEEP_LEAD_SLOTS * grid.tau_a;
    let duration = (start_time + grid.len as f64 * grid.tau_a * (1.0 + grid.fractional_offset.abs())) * 1.02;
    let chan = ChannelConfig { eta, qber, background_rate: grid.background_rate, duration, seed, start_time, ..Default::default() };
    let Ok(params) = StringParams::new(alice.len(), alice.blocks(), grid.lambda, 0) else { return false };
    let Ok(sync) = crate::sync_string::SyncString::from_symbols(params, alice.symbols().to_vec()) else { return false };
    let Ok(sim) = simulate(&clock, &chan, &sync) else { return false };
    let cfg = SyncConfig { eta_hint: Some(eta), ..SyncConfig::new(grid.tau_a, grid.sigma, duration) };
    let input = SyncInput { arrivals: &sim.arrivals, outcomes: &sim.outcomes, truth: Some(&sim.truth) };
    match run_sync(&cfg, alice, input) {
        Ok(r) => r.synchronized && r.alignment_accuracy == Some(1.0),
        Err(_) => false,
    }
}

/// Success fraction of every `(qber, bits)` cell; cells run in parallel.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<SweepCell>, SweepError> {
    grid.validate()?;
    let sync = generate_string(StringParams::new(grid.len, grid.blocks, grid.lambda, grid.seed)?)?;
    let alice = AliceReference::from_sync_string(&sync)?;
    let cells: Vec<(usize, f64, f64)> = grid
        .qbers
        .iter()
        .flat_map(|&q| grid.bits.iter().map(move |&b| (q, b)))
        .enumerate()
        .map(|(i, (q, b))| (i, q, b))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(i, qber, bits)| {
            let wins = (0..grid.repetitions)
                .filter(|&r| {
                    let seed = grid.seed ^ ((i as u64) << 32) ^ (r as u64).wrapping_mul(0x2545_f491_4f6c_dd1d);
                    sweep_trial(grid, &alice, qber, bits, seed)
                })
                .count();
            SweepCell { qber, bits, success_fraction: wins as f64 / grid.repetitions as f64 }
        })
        .collect())
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("qber,bits,success_fraction\n");
    for c in cells {
        out.push_str(&format!("{},{},{}\n", c.qber, c.bits, c.success_fraction));
    }
    out
}

/// How `N1` is chosen for each benchmarked length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockPolicy {
    Fixed(usize),
    /// `N1 = round(log2 L)`, with `L` truncated to a multiple of `N1`.
    Log2,
}

impl BlockPolicy {
    /// `(L, N1)` actually benchmarked for a requested length.
    pub fn resolve(self, len: usize) -> (usize, usize) {
        let blocks = match self {
            BlockPolicy::Fixed(n) => n.max(1),
            BlockPolicy::Log2 => ((len as f64).log2().round() as usize).max(1),
        };
        (blocks * (len / blocks), blocks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchRow {
    pub len: usize,
    pub blocks: usize,
    pub stage1_ops: u64,
    pub stage2_ops: u64,
    pub baseline_ops: u64,
    /// Wall time of one fast search.
    pub wall_ns: u128,
    /// Wall time of one baseline search on the same input.
    pub baseline_wall_ns: u128,
}

pub fn run_bench(lens: &[usize], policy: BlockPolicy, seed: u64) -> Result<Vec<BenchRow>, SweepError> {
    lens.iter()
        .map(|&requested| {
            let (len, blocks) = policy.resolve(requested);
            let counts = complexity_probe(len, blocks)?;
            // timing does not depend on the string structure
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let symbols: Vec<i8> = (0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let alice = AliceReference::new(&symbols, blocks)?;
            let baseline = BaselineReference::new(&symbols);
            let bob = erase_and_flip(&symbols, len / 3, 0.1, 0.02, seed);

            let clock = Instant::now();
            find_offset(&alice, &bob, 0.0)?;
            let wall_ns = clock.elapsed().as_nanos();
            let clock = Instant::now();
            baseline.find_offset(&bob, &mut OpCounter::default())?;
            let baseline_wall_ns = clock.elapsed().as_nanos();
            Ok(BenchRow {
                len,
                blocks,
                stage1_ops: counts.stage1_ops,
                stage2_ops: counts.stage2_ops,
                baseline_ops: counts.baseline_ops,
                wall_ns,
                baseline_wall_ns,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("L,N1,stage1_ops,stage2_ops,baseline_ops,wall_ns\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.len, r.blocks, r.stage1_ops, r.stage2_ops, r.baseline_ops, r.wall_ns));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SimOutput;
    use crate::sync_string::SyncString;

    const TAU: f64 = 20e-9;

    fn setup(len: usize, blocks: usize, seed: u64) -> (SyncString, AliceReference) {
        let s = generate_string(StringParams::new(len, blocks, 1.0, seed).unwrap()).unwrap();
        let a = AliceReference::from_sync_string(&s).unwrap();
        (s, a)
    }

    fn sim(s: &SyncString, clock: ClockPair, chan: ChannelConfig) -> SimOutput {
        simulate(&clock, &chan, s).unwrap()
    }

    fn input(out: &SimOutput) -> SyncInput<'_> {
        SyncInput { arrivals: &out.arrivals, outcomes: &out.outcomes, truth: Some(&out.truth) }
    }

    #[test]
    fn perfect_channel_zero_offset() {
        let (s, alice) = setup(100_000, 10, 1);
        let chan = ChannelConfig { eta: 1.0, resolution: 0.0, duration: 100_000.0 * TAU, ..Default::default() };
        let out = sim(&s, ClockPair::new(TAU), chan);
        let cfg = SyncConfig { eta_hint: Some(1.0), ..SyncConfig::new(TAU, 1e-10, chan.duration) };
        let r = run_sync(&cfg, &alice, input(&out)).unwrap();
        assert!(r.synchronized);
        assert_eq!(r.offset.as_ref().unwrap().m_opt, 0);
        assert_eq!(r.alignment_accuracy, Some(1.0));
    }

    #[test]
    fn lossy_run_with_background_and_offset() {
        let (s, alice) = setup(1_000_000, 20, 2);
        let clock = ClockPair { fractional_offset: 5e-4, jitter_sigma: 1e-10, ..ClockPair::new(TAU) };
        let chan = ChannelConfig {
            eta: 1e-2,
            qber: 0.02,
            background_rate: 200.0,
            duration: 0.0205,
            start_time: 1e-4,
            seed: 9,
            ..Default::default()
        };
        let out = sim(&s, clock, chan);
        let cfg = SyncConfig { eta_hint: Some(1e-2), ..SyncConfig::new(TAU, 1e-10, 0.005) };
        let r = run_sync(&cfg, &alice, input(&out)).unwrap();
        assert!(r.synchronized);
        assert_eq!(r.alignment_accuracy, Some(1.0));
        assert!(r.windows.len() >= 4);
        assert_eq!(r.offset_attempts, 1);
        assert!(r.windows[1..].iter().any(|w| !w.used_fft));
    }

    #[test]
    fn too_few_bits_fails_honestly() {
        let (s, alice) = setup(1_000_000, 20, 3);
        let clock = ClockPair { fractional_offset: 5e-4, jitter_sigma: 1e-10, ..ClockPair::new(TAU) };
        let chan = ChannelConfig { eta: 1e-4, background_rate: 200.0, duration: 0.0205, seed: 4, ..Default::default() };
        let out = sim(&s, clock, chan);
        let cfg = SyncConfig { eta_hint: Some(1e-4), ..SyncConfig::new(TAU, 1e-10, 0.0205) };
        match run_sync(&cfg, &alice, input(&out)) {
            Err(SyncError::Failed { report, .. }) => assert!(!report.synchronized),
            Ok(r) => panic!("unexpected success: {:?}", r.offset),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (s, alice) = setup(1000, 10, 5);
        let chan = ChannelConfig { eta: 1.0, duration: 1000.0 * TAU, ..Default::default() };
        let out = sim(&s, ClockPair::new(TAU), chan);
        let cfg = SyncConfig::new(-1.0, 1e-10, 1.0);
        assert!(matches!(run_sync(&cfg, &alice, input(&out)), Err(SyncError::InvalidConfig(_))));
    }

    #[test]
    fn drift_shortens_windows() {
        let (s, alice) = setup(100_000, 10, 6);
        let clock = ClockPair { fractional_offset: 1e-4, drift_rate: 3e-5, jitter_sigma: 1e-10, ..ClockPair::new(TAU) };
        let chan = ChannelConfig { eta: 0.05, duration: 0.04, seed: 8, ..Default::default() };
        let out = sim(&s, clock, chan);
        let cfg = SyncConfig { eta_hint: Some(0.05), ..SyncConfig::new(TAU, 1e-10, 0.01) };
        let r = run_sync(&cfg, &alice, input(&out)).unwrap();
        assert!(r.synchronized, "{:?}", r.windows.iter().map(|w| w.estimate.rms_tie).collect::<Vec<_>>());
        assert!(r.windows[2..].iter().all(|w| w.t_acq < 0.01), "{:?}", r.windows.iter().map(|w| w.t_acq).collect::<Vec<_>>());
        assert_eq!(r.alignment_accuracy, Some(1.0));
    }

    #[test]
    fn block_policy() {
        assert_eq!(BlockPolicy::Log2.resolve(1 << 16), (1 << 16, 16));
        assert_eq!(BlockPolicy::Log2.resolve(1 << 18), (18 * ((1 << 18) / 18), 18));
        assert_eq!(BlockPolicy::Fixed(1).resolve(1024), (1024, 1));
    }

    #[test]
    fn bench_rows_and_csv() {
        let rows = run_bench(&[1 << 10], BlockPolicy::Fixed(1), 1).unwrap();
        let r = rows[0];
        let fast = (r.stage1_ops + r.stage2_ops) as f64;
        assert!((fast / r.baseline_ops as f64 - 1.0).abs() <= 0.05);
        assert!(bench_csv(&rows).starts_with("L,N1,stage1_ops,stage2_ops,baseline_ops,wall_ns\n1024,1,"));
    }

    #[test]
    fn sweep_extremes() {
        let grid = SweepGrid {
            len: 100_000,
            blocks: 10,
            background_rate: 0.0,
            ..SweepGrid::new(vec![0.01, 0.45], vec![1e4], 3)
        };
        let cells = run_sweep(&grid).unwrap();
        assert_eq!(cells[0].success_fraction, 1.0);
        assert_eq!(cells[1].success_fraction, 0.0);
        assert!(sweep_csv(&cells).starts_with("qber,bits,success_fraction\n0.01,10000,1\n"));
    }
}
