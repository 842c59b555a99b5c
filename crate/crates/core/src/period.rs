//! Receiver-frame period recovery and slot assignment.
//!
//! Arrival times follow `t_a = t_0 + n_a·τ_B + ε_a` with Gaussian jitter `ε`.
//! A coarse `τ_B` comes from the spectrum of the binned detection sequence;
//! it is then refined by a robust straight-line fit of the arrival phase
//! (`t mod τ`) against time, whose slope is `(τ_B − τ)/τ_B`. The fit starts on
//! the FFT sampling span and is repeated on geometrically longer spans until
//! it covers the whole acquisition, so each pass starts from a period good
//! enough that phases do not wrap.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::lts::{self, LtsError};
use crate::spectral;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PeriodError {
    #[error("no detections")]
    Empty,
    #[error("timestamps must be sorted and inside the acquisition window (index {0})")]
    BadTimestamps(usize),
    #[error("{found} detections in the sampling window, need {needed}")]
    TooFewDetections { found: usize, needed: usize },
    #[error("no spectral peak: best {peak:.1} vs median {median:.1}")]
    NoPeak { peak: f64, median: f64 },
    #[error("period fit diverged (slope {slope})")]
    FitDiverged { slope: f64 },
    #[error("not enough inliers for the period fit ({found})")]
    InsufficientInliers { found: usize },
    #[error("period estimate does not satisfy the TIE criterion")]
    NotConverged,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl From<LtsError> for PeriodError {
    fn from(e: LtsError) -> Self {
        match e {
            LtsError::TooFewPoints { got, .. } => PeriodError::InsufficientInliers { found: got },
            other => PeriodError::InvalidParameter(other.to_string()),
        }
    }
}

/// Detection timestamps of one acquisition, receiver clock, seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTimes {
    timestamps: Vec<f64>,
    window_start: f64,
    acquisition_window: f64,
    resolution: f64,
}

impl ArrivalTimes {
    pub fn new(
        timestamps: Vec<f64>,
        window_start: f64,
        acquisition_window: f64,
        resolution: f64,
    ) -> Result<Self, PeriodError> {
        let end = window_start + acquisition_window;
        for (i, &t) in timestamps.iter().enumerate() {
            let sorted = i == 0 || t >= timestamps[i - 1];
            if !sorted || !(t >= window_start && t < end) {
                return Err(PeriodError::BadTimestamps(i));
            }
        }
        Ok(Self { timestamps, window_start, acquisition_window, resolution })
    }

    /// Window spanning exactly the given timestamps.
    pub fn spanning(timestamps: Vec<f64>, resolution: f64) -> Result<Self, PeriodError> {
        let (first, last) = match (timestamps.first(), timestamps.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(PeriodError::Empty),
        };
        let span = (last - first) * (1.0 + 1e-12) + f64::MIN_POSITIVE.max(1e-15);
        Self::new(timestamps, first, span, resolution)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn window_start(&self) -> f64 {
        self.window_start
    }

    pub fn acquisition_window(&self) -> f64 {
        self.acquisition_window
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodConfig {
    /// Nominal transmitter period `τ_A`.
    pub tau_a: f64,
    /// Detector jitter `σ`.
    pub sigma: f64,
    pub trim_fraction: f64,
    /// FFT length `N`; the sampling span is `N·τ_A/4`.
    pub n_samples: usize,
    /// Half-width of the spectral search band around `1/τ_A`, relative.
    pub search_band: f64,
}

impl PeriodConfig {
    pub fn new(tau_a: f64, sigma: f64) -> Self {
        Self { tau_a, sigma, trim_fraction: 0.3, n_samples: 1_000_000, search_band: 0.1 }
    }

    /// `T_samp = N·τ_A/4`.
    pub fn sampling_span(&self) -> f64 {
        self.n_samples as f64 * self.tau_a / 4.0
    }

    fn validate(&self) -> Result<(), PeriodError> {
        if !(self.tau_a > 0.0) || !(self.sigma >= 0.0) {
            return Err(PeriodError::InvalidParameter(format!("tau_a = {}, sigma = {}", self.tau_a, self.sigma)));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(PeriodError::InvalidParameter(format!("trim fraction {}", self.trim_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEstimate {
    pub tau_b: f64,
    /// Coarse estimate the refinement started from.
    pub tau_guess: f64,
    /// `(τ_B − τ_guess)/τ_B`.
    pub slope: f64,
    /// Robust rms of the time error over the acquisition, seconds.
    pub rms_tie: f64,
    /// Slot offset of every detection relative to the reference slot.
    pub index_offsets: Vec<i64>,
    pub ok: bool,
    /// First timestamp of the acquisition.
    pub reference_time: f64,
    /// Expected arrival of slot 0 relative to `reference_time`, in `[-τ_B/2, τ_B/2)`.
    pub phase: f64,
}

impl PeriodEstimate {
    /// Time error of an arrival against the fitted slot grid.
    pub fn time_error(&self, t: f64) -> f64 {
        let r = t - self.reference_time - self.phase;
        r - (r / self.tau_b).round() * self.tau_b
    }

    /// Slot of an arrival relative to the reference slot.
    pub fn slot_of(&self, t: f64) -> i64 {
        ((t - self.reference_time - self.phase) / self.tau_b).round() as i64
    }
}

/// `TIE_a(b)` against the first detection, for `b = 1..D`.
#[derive(Debug, Clone, PartialEq)]
pub struct TieSeries {
    pub values: Vec<f64>,
    pub reference_detection: usize,
}

const MIN_COARSE_DETECTIONS: usize = 100;
const PEAK_TO_MEDIAN: f64 = 5.0;

pub fn coarse_period_fft(arrivals: &ArrivalTimes, tau_a: f64, n_samples: usize) -> Result<f64, PeriodError> {
    coarse_period_fft_band(arrivals, tau_a, n_samples, 0.1)
}

/// Coarse `τ_B` from the FFT of the detection sequence binned at `4/τ_A`,
/// searching `band` (relative) around `1/τ_A`.
pub fn coarse_period_fft_band(
    arrivals: &ArrivalTimes,
    tau_a: f64,
    n_samples: usize,
    band: f64,
) -> Result<f64, PeriodError> {
    if !(tau_a > 0.0) || n_samples < 8 || !(band > 0.0 && band < 1.0) {
        return Err(PeriodError::InvalidParameter(format!("tau_a {tau_a}, N {n_samples}, band {band}")));
    }
    let ts = arrivals.timestamps();
    let start = *ts.first().ok_or(PeriodError::Empty)?;
    let bin = tau_a / 4.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); n_samples];
    let mut found = 0;
    for &t in ts {
        let k = ((t - start) / bin) as usize;
        if k >= n_samples {
            break;
        }
        found += 1;
        buf[k].re = 1.0;
    }
    if found < MIN_COARSE_DETECTIONS {
        return Err(PeriodError::TooFewDetections { found, needed: MIN_COARSE_DETECTIONS });
    }
    spectral::forward(&mut buf);

    let half = n_samples / 2;
    let mut mags: Vec<f64> = buf[1..half].iter().map(|c| c.norm()).collect();
    let centre = n_samples as f64 / 4.0;
    let lo = ((centre * (1.0 - band)).ceil() as usize).max(1);
    let hi = ((centre * (1.0 + band)).floor() as usize).min(half - 1);
    // mags[k - 1] is bin k
    let k_peak = lo + spectral::argmax(&mags[lo - 1..hi]).expect("non-empty band");
    let peak = mags[k_peak - 1];
    let mid = mags.len() / 2;
    let median = *mags.select_nth_unstable_by(mid, f64::total_cmp).1;
    if peak < PEAK_TO_MEDIAN * median {
        return Err(PeriodError::NoPeak { peak, median });
    }
    Ok(n_samples as f64 * bin / k_peak as f64)
}

const SPAN_GROWTH: f64 = 8.0;
const MIN_FIT_POINTS: usize = 20;
const UNWRAP_WINDOW: usize = 15;

/// Robust refinement of `τ_B` starting from `tau_0`.
pub fn refine_period_lts(arrivals: &ArrivalTimes, tau_0: f64, cfg: &PeriodConfig) -> Result<PeriodEstimate, PeriodError> {
    cfg.validate()?;
    if !(tau_0 > 0.0) {
        return Err(PeriodError::InvalidParameter(format!("tau_0 = {tau_0}")));
    }
    let ts = arrivals.timestamps();
    let reference_time = *ts.first().ok_or(PeriodError::Empty)?;
    let rel: Vec<f64> = ts.iter().map(|t| t - reference_time).collect();
    let full = *rel.last().expect("non-empty");

    let mut tau = tau_0;
    let mut span = cfg.sampling_span();
    while span < full && rel.partition_point(|&r| r < span) < MIN_FIT_POINTS {
        span *= 2.0;
    }
    let mut phase = circular_mean(&rel[..rel.partition_point(|&r| r < span)], tau);
    let mut full_passes = 0;
    loop {
        let count = rel.partition_point(|&r| r <= span).max(rel.len().min(3));
        let x = &rel[..count];
        let y = unwrap(x.iter().map(|&r| wrap(r - phase, tau)), tau);
        let fit = lts::lts_line(x, &y, cfg.trim_fraction)?;
        if !(fit.slope.abs() < 0.5) {
            return Err(PeriodError::FitDiverged { slope: fit.slope });
        }
        // arrivals follow rel = (phase + c)/(1 − s) + n·τ/(1 − s)
        tau /= 1.0 - fit.slope;
        phase = (phase + fit.intercept) / (1.0 - fit.slope);
        if span >= full {
            full_passes += 1;
            if full_passes == 2 {
                break;
            }
        }
        span *= SPAN_GROWTH;
    }
    phase = wrap(phase, tau);

    let mut est = PeriodEstimate {
        tau_b: tau,
        tau_guess: tau_0,
        slope: (tau - tau_0) / tau,
        rms_tie: 0.0,
        index_offsets: Vec::new(),
        ok: false,
        reference_time,
        phase,
    };
    let errors: Vec<f64> = ts.iter().map(|&t| est.time_error(t)).collect();
    est.rms_tie = robust_rms(&errors, cfg.trim_fraction);
    est.index_offsets = ts.iter().map(|&t| est.slot_of(t)).collect();
    est.ok = est.rms_tie <= tie_tolerance(cfg.sigma, arrivals.resolution());
    Ok(est)
}

/// `3·sqrt(σ² + res²/12)` plus a picosecond of slack for rounding.
pub fn tie_tolerance(sigma: f64, resolution: f64) -> f64 {
    3.0 * (sigma * sigma + resolution * resolution / 12.0).sqrt() + 1e-12
}

/// Robust rms time error of `arrivals` against period `tau`, with the slot
/// grid phase taken as the circular mean of the arrival phases.
pub fn tie_rms(arrivals: &ArrivalTimes, tau: f64, trim_fraction: f64) -> f64 {
    let ts = arrivals.timestamps();
    let Some(&t0) = ts.first() else { return 0.0 };
    let rel: Vec<f64> = ts.iter().map(|t| t - t0).collect();
    let phase = circular_mean(&rel, tau);
    let errors: Vec<f64> = rel.iter().map(|&r| wrap(r - phase, tau)).collect();
    robust_rms(&errors, trim_fraction)
}

/// Raw `TIE_a(b) = (t_b − t_a) − (n_b − n_a)·τ_B` against the first detection.
pub fn tie_series(arrivals: &ArrivalTimes, tau_b: f64) -> TieSeries {
    let ts = arrivals.timestamps();
    let values = match ts.first() {
        Some(&t0) => ts[1..]
            .iter()
            .map(|&t| {
                let d = t - t0;
                d - (d / tau_b).round() * tau_b
            })
            .collect(),
        None => Vec::new(),
    };
    TieSeries { values, reference_detection: 0 }
}

/// Rms of the smallest `(1 − trim)` fraction of `|e|`, rescaled so that it
/// estimates `σ` for Gaussian errors.
pub fn robust_rms(errors: &[f64], trim_fraction: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let h = lts::kept_count(errors.len(), trim_fraction).max(1);
    let mut sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    if h < sq.len() {
        sq.select_nth_unstable_by(h - 1, f64::total_cmp);
    }
    let mean = sq[..h].iter().sum::<f64>() / h as f64;
    (mean / truncated_variance(h as f64 / errors.len() as f64)).sqrt()
}

/// Variance of a standard normal conditioned on the central fraction `p`.
fn truncated_variance(p: f64) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    let normal = Normal::standard();
    let q = normal.inverse_cdf((1.0 + p) / 2.0);
    1.0 - 2.0 * q * normal.pdf(q) / p
}

/// `r` reduced into `[-τ/2, τ/2)`.
fn wrap(r: f64, tau: f64) -> f64 {
    r - (r / tau + 0.5).floor() * tau
}

fn circular_mean(rel: &[f64], tau: f64) -> f64 {
    let (s, c) = rel.iter().fold((0.0, 0.0), |(s, c), &r| {
        let a = 2.0 * PI * r / tau;
        (s + a.sin(), c + a.cos())
    });
    s.atan2(c) / (2.0 * PI) * tau
}

/// Shifts each wrapped residual by whole periods towards the running median
/// of the previous ones.
fn unwrap(wrapped: impl Iterator<Item = f64>, tau: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut recent = [0.0f64; UNWRAP_WINDOW];
    for (i, y) in wrapped.enumerate() {
        let reference = if i == 0 {
            0.0
        } else {
            let n = i.min(UNWRAP_WINDOW);
            let mut w = recent[..n].to_vec();
            let mid = n / 2;
            *w.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        let v = y + ((reference - y) / tau).round() * tau;
        recent[i % UNWRAP_WINDOW] = v;
        out.push(v);
    }
    out
}

/// Slot indices of one acquisition. When several detections share a slot
/// only the one closest to the grid keeps it.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotAssignment {
    /// Slot of each detection, `None` when it collided.
    pub slots: Vec<Option<i64>>,
    /// Indices of dropped detections.
    pub collisions: Vec<usize>,
}

impl SlotAssignment {
    /// `(detection index, slot)` of every surviving detection.
    pub fn assigned(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.map(|s| (i, s)))
    }
}

pub fn assign_slots(arrivals: &ArrivalTimes, est: &PeriodEstimate) -> Result<SlotAssignment, PeriodError> {
    if !est.ok {
        return Err(PeriodError::NotConverged);
    }
    let ts = arrivals.timestamps();
    let mut slots: Vec<Option<i64>> = Vec::with_capacity(ts.len());
    let mut collisions = Vec::new();
    // index of the detection currently holding the latest slot
    let mut holder: Option<usize> = None;
    for (i, &t) in ts.iter().enumerate() {
        let n = est.slot_of(t);
        match holder {
            Some(h) if slots[h] == Some(n) => {
                // keep whichever sits closer to the grid
                if est.time_error(t).abs() < est.time_error(ts[h]).abs() {
                    slots[h] = None;
                    collisions.push(h);
                    slots.push(Some(n));
                    holder = Some(i);
                } else {
                    collisions.push(i);
                    slots.push(None);
                }
            }
            _ => {
                slots.push(Some(n));
                holder = Some(i);
            }
        }
    }
    collisions.sort_unstable();
    Ok(SlotAssignment { slots, collisions })
}

/// Largest halving of `t_acq` for which the period change within one
/// acquisition stays under `10σ`: `|∂τ_B/∂t|·T²/τ_B ≤ 10σ`.
pub fn drift_guard(est: &PeriodEstimate, drift_rate: f64, t_acq: f64, sigma: f64) -> f64 {
    let bound = 10.0 * sigma;
    let mut t = t_acq;
    for _ in 0..64 {
        if drift_rate.abs() * t * t / est.tau_b <= bound {
            break;
        }
        t /= 2.0;
    }
    t
}
