//! Synchronization preambles with periodic autocorrelation peaks.
//!
//! A string of length `L = N1·L1` is built block-wise: one bias value `x_u`
//! per row `u` is shared by the `N1` symbols `s_{u+jL1}`, so symbols `L1`
//! apart are positively correlated and the autocorrelation shows a secondary
//! peak of height `c0` at every multiple of `L1`, while all other lags stay
//! near zero.
//!
//! Random draws come from `ChaCha8Rng::seed_from_u64(seed)`: first the `L1`
//! biases `x_u`, then the `L` thresholds `y_n` in symbol order, all uniform in
//! `[-1, 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::spectral;

#[derive(Debug, Error, PartialEq)]
pub enum StringError {
    #[error("invalid string parameters: {0}")]
    InvalidParams(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("symbol {value} at index {index} is not ±1")]
    InvalidSymbol { index: usize, value: i8 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringParams {
    /// Total length `L`.
    pub len: usize,
    /// Number of blocks `N1`.
    pub blocks: usize,
    /// Block length `L1`.
    pub block_len: usize,
    /// Correlation tuning parameter, `λ ≥ 0`.
    pub lambda: f64,
    pub seed: u64,
}

impl StringParams {
    /// Builds parameters with `L1 = L / N1`, failing when `N1` does not divide `L`.
    pub fn new(len: usize, blocks: usize, lambda: f64, seed: u64) -> Result<Self, StringError> {
        if blocks == 0 || len % blocks != 0 {
            return Err(StringError::InvalidParams(format!(
                "length {len} is not a multiple of {blocks} blocks"
            )));
        }
        let params = Self { len, blocks, block_len: len / blocks, lambda, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), StringError> {
        if self.blocks.checked_mul(self.block_len) != Some(self.len) {
            return Err(StringError::InvalidParams(format!(
                "L = {} but N1·L1 = {}·{}",
                self.len, self.blocks, self.block_len
            )));
        }
        if self.blocks < 2 || self.block_len < 2 {
            return Err(StringError::InvalidParams(format!(
                "need N1 ≥ 2 and L1 ≥ 2, got N1 = {}, L1 = {}",
                self.blocks, self.block_len
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(StringError::InvalidParams(format!("lambda = {} must be ≥ 0", self.lambda)));
        }
        Ok(())
    }
}

/// Secondary peak height implied by `λ`: `λ²/3` up to 1, `1 − 2/(3λ)` above.
pub fn nominal_c0(lambda: f64) -> f64 {
    if lambda <= 1.0 {
        lambda * lambda / 3.0
    } else {
        1.0 - 2.0 / (3.0 * lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncString {
    params: StringParams,
    symbols: Vec<i8>,
    c0_nominal: f64,
}

impl SyncString {
    /// Wraps an existing ±1 sequence, e.g. one read back from disk.
    pub fn from_symbols(params: StringParams, symbols: Vec<i8>) -> Result<Self, StringError> {
        if symbols.len() != params.len {
            return Err(StringError::LengthMismatch { left: params.len, right: symbols.len() });
        }
        if let Some((index, &value)) = symbols.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
            return Err(StringError::InvalidSymbol { index, value });
        }
        Ok(Self { params, symbols, c0_nominal: nominal_c0(params.lambda) })
    }

    pub fn params(&self) -> &StringParams {
        &self.params
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn c0_nominal(&self) -> f64 {
        self.c0_nominal
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.symbols.iter().map(|&s| f64::from(s)).collect()
    }
}

/// Draws a synchronization string. `Θ(0)` is taken as 1.
pub fn generate_string(params: StringParams) -> Result<SyncString, StringError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bias: Vec<f64> = (0..params.block_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let symbols = (0..params.len)
        .map(|n| {
            let y: f64 = rng.random_range(-1.0..1.0);
            if y - params.lambda * bias[n % params.block_len] >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(SyncString { params, symbols, c0_nominal: nominal_c0(params.lambda) })
}

/// Cyclic cross-correlation values, normalized by `1/L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector {
    pub values: Vec<f64>,
}

impl CorrelationVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Lag of the maximum, smallest lag on ties.
    pub fn argmax(&self) -> Option<usize> {
        spectral::argmax(&self.values)
    }

    /// The maximizing lag if no other lag reaches the same value.
    pub fn unique_argmax(&self) -> Option<usize> {
        let best = self.argmax()?;
        let peak = self.values[best];
        let ties = self.values.iter().filter(|&&v| v == peak).count();
        (ties == 1).then_some(best)
    }
}

/// `x_m = (1/L) Σ_n a_{(n+m) mod L} b_n` by direct summation, `O(L²)`.
pub fn naive_xcorr(a: &[i8], b: &[f64]) -> Result<CorrelationVector, StringError> {
    if a.len() != b.len() {
        return Err(StringError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let len = a.len();
    let scale = 1.0 / len as f64;
    let values = (0..len)
        .map(|m| {
            let (head, tail) = a.split_at(m);
            // a_{n+m} runs over tail then wraps into head
            let s: f64 = tail
                .iter()
                .chain(head)
                .zip(b)
                .map(|(&x, &y)| f64::from(x) * y)
                .sum();
            s * scale
        })
        .collect();
    Ok(CorrelationVector { values })
}

/// Same contract as [`naive_xcorr`], computed with one FFT round trip.
pub fn fft_xcorr(a: &[i8], b: &[f64]) -> Result<CorrelationVector, StringError> {
    if a.len() != b.len() {
        return Err(StringError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let a: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
    let scale = 1.0 / a.len() as f64;
    let values = spectral::cyclic_xcorr(&a, b).into_iter().map(|v| v * scale).collect();
    Ok(CorrelationVector { values })
}

/// Exact autocorrelation of a ±1 string.
///
/// Lag sums are integers, so the FFT result is rounded before normalizing.
pub fn autocorrelation(s: &SyncString) -> CorrelationVector {
    let a = s.as_f64();
    let scale = 1.0 / a.len() as f64;
    let values = spectral::cyclic_xcorr(&a, &a).into_iter().map(|v| v.round() * scale).collect();
    CorrelationVector { values }
}

/// Default peak tolerance `4/√L1 · √(N1/(N1−1))`.
pub fn default_peak_tol(params: &StringParams) -> f64 {
    let n1 = params.blocks as f64;
    4.0 / (params.block_len as f64).sqrt() * (n1 / (n1 - 1.0)).sqrt()
}

/// Default off-peak tolerance `6/√L`.
pub fn default_offpeak_tol(params: &StringParams) -> f64 {
    6.0 / (params.len as f64).sqrt()
}

/// Standard deviation of an off-peak lag, `√((1 + (N1−1)·c0²)/L)`.
///
/// The `N1` symbols of a row share `x_u`, so their products with another
/// row carry a common term of variance `c0²` that adds coherently.
pub fn offpeak_sigma(params: &StringParams) -> f64 {
    let c0 = nominal_c0(params.lambda);
    ((1.0 + (params.blocks as f64 - 1.0) * c0 * c0) / params.len as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeReport {
    pub lag0: f64,
    pub lag0_ok: bool,
    /// `x_{jL1}` for `j = 1..N1`.
    pub peaks: Vec<f64>,
    /// Mean of `peaks`.
    pub measured_c0: f64,
    pub peaks_ok: bool,
    /// Lag and deviation from `c0_nominal` of the worst secondary peak.
    pub worst_peak: (usize, f64),
    pub offpeak_ok: bool,
    /// Lag and value of the largest off-peak magnitude.
    pub worst_offpeak: (usize, f64),
}

impl ShapeReport {
    pub fn passed(&self) -> bool {
        self.lag0_ok && self.peaks_ok && self.offpeak_ok
    }
}

pub fn verify_autocorrelation_shape(s: &SyncString, peak_tol: f64, offpeak_tol: f64) -> ShapeReport {
    let x = autocorrelation(s);
    let l1 = s.params.block_len;
    let lag0 = x.values[0];

    let peaks: Vec<f64> = (1..s.params.blocks).map(|j| x.values[j * l1]).collect();
    let measured_c0 = peaks.iter().sum::<f64>() / peaks.len() as f64;
    let mut worst_peak = (0, 0.0f64);
    for (j, &p) in peaks.iter().enumerate() {
        let dev = p - s.c0_nominal;
        if dev.abs() > worst_peak.1.abs() || worst_peak.0 == 0 {
            worst_peak = ((j + 1) * l1, dev);
        }
    }

    let mut worst_offpeak = (0, 0.0f64);
    for (m, &v) in x.values.iter().enumerate() {
        if m % l1 != 0 && (v.abs() > worst_offpeak.1.abs() || worst_offpeak.0 == 0) {
            worst_offpeak = (m, v);
        }
    }

    ShapeReport {
        lag0,
        lag0_ok: lag0 == 1.0,
        peaks_ok: peaks.iter().all(|p| (p - s.c0_nominal).abs() <= peak_tol),
        peaks,
        measured_c0,
        worst_peak,
        offpeak_ok: worst_offpeak.1.abs() <= offpeak_tol,
        worst_offpeak,
    }
}
