//! Seeded simulator of the transmitter, lossy channel and receiver.
//!
//! Pulse `n` leaves the transmitter at `n·τ_A` (transmitter clock) and is
//! timestamped by the receiver at
//!
//! ```text
//! t_n = t_0 + T·(1 + f) + d·T²/2 + ε,   T = n·τ_A
//! ```
//!
//! so the receiver-frame period is `τ_A·(1 + f + d·T)` to first order. Every
//! pulse yields a sifted Z-basis detection with probability `η`; X-basis
//! detections are added at the rate implied by the receiver's basis choice.
//! Background counts form a Poisson process with uniformly random outcomes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal};
use thiserror::Error;

use crate::period::{ArrivalTimes, SlotAssignment};
use crate::sync_string::SyncString;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error("no rising edge in the detection rate")]
    NoEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Z0,
    Z1,
    X0,
    X1,
}

impl Outcome {
    /// Correlation symbol: `Z0 → +1`, `Z1 → −1`, X basis → 0.
    pub fn symbol(self) -> f64 {
        match self {
            Outcome::Z0 => 1.0,
            Outcome::Z1 => -1.0,
            Outcome::X0 | Outcome::X1 => 0.0,
        }
    }

    pub fn is_z(self) -> bool {
        matches!(self, Outcome::Z0 | Outcome::Z1)
    }

    fn from_parts(z_basis: bool, bit: bool) -> Self {
        match (z_basis, bit) {
            (true, false) => Outcome::Z0,
            (true, true) => Outcome::Z1,
            (false, false) => Outcome::X0,
            (false, true) => Outcome::X1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Z0 => "Z0",
            Outcome::Z1 => "Z1",
            Outcome::X0 => "X0",
            Outcome::X1 => "X1",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Z0" => Ok(Outcome::Z0),
            "Z1" => Ok(Outcome::Z1),
            "X0" => Ok(Outcome::X0),
            "X1" => Ok(Outcome::X1),
            other => Err(format!("unknown outcome {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockPair {
    pub tau_a: f64,
    /// Receiver period is `τ_A·(1 + fractional_offset)` at `t = 0`.
    pub fractional_offset: f64,
    /// Rate of change of the fractional offset, per second.
    pub drift_rate: f64,
    pub jitter_sigma: f64,
}

impl ClockPair {
    pub fn new(tau_a: f64) -> Self {
        Self { tau_a, fractional_offset: 0.0, drift_rate: 0.0, jitter_sigma: 0.0 }
    }

    /// Receiver-frame period at transmitter time `t`.
    pub fn period_at(&self, t: f64) -> f64 {
        self.tau_a * (1.0 + self.fractional_offset + self.drift_rate * t)
    }

    /// Noise-free arrival time of pulse `n` relative to the first pulse.
    pub fn arrival(&self, n: u64) -> f64 {
        let t = n as f64 * self.tau_a;
        t * (1.0 + self.fractional_offset) + 0.5 * self.drift_rate * t * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Sifted transmittance: sifted Z detections per transmitted pulse.
    pub eta: f64,
    pub qber: f64,
    /// Background count rate, Hz.
    pub background_rate: f64,
    /// Mean photon number; recorded only, detection is Bernoulli(`eta`).
    pub mu: f64,
    pub z_basis_prob: f64,
    /// End of the simulated run, receiver clock, seconds.
    pub duration: f64,
    pub seed: u64,
    /// Receiver time of the first pulse.
    pub start_time: f64,
    /// Timestamp quantization step; 0 disables quantization.
    pub resolution: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            qber: 0.0,
            background_rate: 0.0,
            mu: 1.0,
            z_basis_prob: 0.9,
            duration: 1.0,
            seed: 0,
            start_time: 0.0,
            resolution: 81e-12,
        }
    }
}

impl ChannelConfig {
    fn validate(&self, clock: &ClockPair, string_len: usize) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::ConfigInvalid(msg));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta = {} not in (0, 1]", self.eta));
        }
        if !(0.0..=0.5).contains(&self.qber) {
            return bad(format!("qber = {} not in [0, 0.5]", self.qber));
        }
        if !(self.background_rate >= 0.0) || !self.background_rate.is_finite() {
            return bad(format!("background rate {}", self.background_rate));
        }
        if !(self.z_basis_prob > 0.0 && self.z_basis_prob < 1.0) {
            return bad(format!("z basis probability {} not in (0, 1)", self.z_basis_prob));
        }
        if !(clock.tau_a > 0.0) || !(clock.jitter_sigma >= 0.0) {
            return bad(format!("tau_a = {}, jitter = {}", clock.tau_a, clock.jitter_sigma));
        }
        if !(self.resolution >= 0.0) || !(self.start_time >= 0.0) {
            return bad(format!("resolution {}, start {}", self.resolution, self.start_time));
        }
        if !(self.duration >= string_len as f64 * clock.tau_a) {
            return bad(format!("duration {} shorter than the sync string", self.duration));
        }
        Ok(())
    }
}

/// Transmitted sequence: the sync string followed by pseudo-random payload.
#[derive(Debug, Clone, PartialEq)]
pub struct AliceTape {
    sync: SyncString,
    payload_seed: u64,
    z_basis_prob: f64,
}

impl AliceTape {
    pub fn new(sync: SyncString, payload_seed: u64, z_basis_prob: f64) -> Self {
        Self { sync, payload_seed, z_basis_prob }
    }

    pub fn sync(&self) -> &SyncString {
        &self.sync
    }

    /// `(Z basis?, bit)` of pulse `n`. Sync symbols are Z-encoded, `+1 → 0`.
    pub fn pulse(&self, n: u64) -> (bool, bool) {
        if let Some(&s) = self.sync.symbols().get(n as usize) {
            return (true, s < 0);
        }
        let h = splitmix64(self.payload_seed ^ n.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        (u < self.z_basis_prob, h & 1 == 1)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hidden truth for one detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truth {
    /// Transmitted pulse index, `None` for background.
    pub emitted_index: Option<u64>,
    pub is_background: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub arrivals: ArrivalTimes,
    pub outcomes: Vec<Outcome>,
    pub truth: Vec<Truth>,
    pub alice: AliceTape,
}

pub fn simulate(clock: &ClockPair, chan: &ChannelConfig, s: &SyncString) -> Result<SimOutput, SimError> {
    chan.validate(clock, s.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(chan.seed);
    let alice = AliceTape::new(s.clone(), rng.random(), chan.z_basis_prob);

    // P(sifted Z detection) = η in both regimes
    let p_det = (chan.eta / chan.z_basis_prob).min(1.0);
    let q_z = chan.eta / p_det;
    let skip = Geometric::new(p_det).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
    let jitter = Normal::new(0.0, clock.jitter_sigma).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;

    let mut events: Vec<(f64, Outcome, Truth)> = Vec::new();
    let mut n: u64 = 0;
    loop {
        n = match n.checked_add(skip.sample(&mut rng)) {
            Some(v) => v,
            None => break,
        };
        let ideal = chan.start_time + clock.arrival(n);
        if ideal >= chan.duration {
            break;
        }
        let t = ideal + if clock.jitter_sigma > 0.0 { jitter.sample(&mut rng) } else { 0.0 };
        let bob_z = rng.random::<f64>() < q_z;
        let (alice_z, bit) = alice.pulse(n);
        let flip = rng.random::<f64>() < chan.qber;
        let coin: bool = rng.random();
        let measured = if bob_z == alice_z { bit ^ flip } else { coin };
        events.push((t, Outcome::from_parts(bob_z, measured), Truth { emitted_index: Some(n), is_background: false }));
        n += 1;
    }

    if chan.background_rate > 0.0 {
        let gap = Exp::new(chan.background_rate).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t >= chan.duration {
                break;
            }
            let outcome = Outcome::from_parts(rng.random(), rng.random());
            events.push((t, outcome, Truth { emitted_index: None, is_background: true }));
        }
    }

    if chan.resolution > 0.0 {
        for e in &mut events {
            e.0 = (e.0 / chan.resolution).round() * chan.resolution;
        }
    }
    events.retain(|e| e.0 >= 0.0 && e.0 < chan.duration);
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut timestamps = Vec::with_capacity(events.len());
    let mut outcomes = Vec::with_capacity(events.len());
    let mut truth = Vec::with_capacity(events.len());
    for (t, o, tr) in events {
        timestamps.push(t);
        outcomes.push(o);
        truth.push(tr);
    }
    let arrivals = ArrivalTimes::new(timestamps, 0.0, chan.duration, chan.resolution)
        .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
    Ok(SimOutput { arrivals, outcomes, truth, alice })
}

/// Receiver string of `len` slots starting at `first_guess_slot`.
#[derive(Debug, Clone, PartialEq)]
pub struct BobString {
    pub symbols: Vec<f64>,
    /// Detections that hit an already written slot.
    pub collisions: usize,
}

impl BobString {
    pub fn nonzero(&self) -> usize {
        self.symbols.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Writes Z outcomes as ±1 into the slots `first_guess_slot..first_guess_slot + len`;
/// empty and X-basis slots stay 0, and the first writer of a slot wins.
pub fn build_bob_string(outcomes: &[Outcome], slots: &SlotAssignment, first_guess_slot: i64, len: usize) -> BobString {
    let mut symbols = vec![0.0; len];
    let mut written = vec![false; len];
    let mut collisions = 0;
    for (i, slot) in slots.assigned() {
        let k = slot - first_guess_slot;
        if k < 0 || k >= len as i64 {
            continue;
        }
        let k = k as usize;
        if written[k] {
            collisions += 1;
            continue;
        }
        written[k] = true;
        symbols[k] = outcomes[i].symbol();
    }
    BobString { symbols, collisions }
}

/// First slot of the earliest window of `window_slots` slots holding at least
/// half the expected `η·window_slots` detections. `slots` must be sorted.
pub fn first_guess_rising_edge(slots: &[i64], eta_hint: f64, window_slots: usize) -> Result<i64, SimError> {
    if !(eta_hint > 0.0) || window_slots == 0 {
        return Err(SimError::ConfigInvalid(format!("eta hint {eta_hint}, window {window_slots}")));
    }
    let needed = ((0.5 * eta_hint * window_slots as f64).ceil() as usize).max(1);
    let mut end = 0;
    for (start, &s) in slots.iter().enumerate() {
        end = end.max(start);
        while end < slots.len() && slots[end] < s + window_slots as i64 {
            end += 1;
        }
        if end - start >= needed {
            return Ok(s);
        }
    }
    Err(SimError::NoEdge)
}

/// String-level channel: `b_n = a_{(n+shift) mod L}` kept with probability
/// `eta`, flipped with probability `qber`, zero otherwise.
pub fn erase_and_flip(a: &[i8], shift: usize, eta: f64, qber: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = a.len();
    (0..len)
        .map(|n| {
            if rng.random::<f64>() >= eta {
                return 0.0;
            }
            let v = f64::from(a[(n + shift) % len]);
            if rng.random::<f64>() < qber {
                -v
            } else {
                v
            }
        })
        .collect()
}
