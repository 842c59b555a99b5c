//! Clock synchronization for sparse pulse-train receivers.
//!
//! A receiver that timestamps a small fraction of a transmitter's pulses has
//! two problems: it does not know the transmitter's pulse period in its own
//! clock frame, and it does not know which transmitted pulse a given detection
//! belongs to. This crate recovers both from the detections alone.
//!
//! - [`period`] estimates the receiver-frame period from arrival times (FFT
//!   coarse estimate, least-trimmed-squares refinement) and assigns detections
//!   to slots.
//! - [`sync_string`] generates the ±1 synchronization preamble whose
//!   autocorrelation has `N1` periodic peaks.
//! - [`fast_xcorr`] finds the preamble offset with a two-stage search over an
//!   interleaved DFT, in `O(L log log L)` when `N1 ≈ log L`.
//! - [`channel`] is a seeded simulator of the transmitter, lossy channel and
//!   receiver.
//! - [`pipeline`] chains everything into acquisitions, sweeps and benchmarks.

pub mod channel;
pub mod fast_xcorr;
pub mod lts;
pub mod period;
pub mod pipeline;
pub mod spectral;
pub mod sync_string;

pub use channel::{ChannelConfig, ClockPair, Outcome, SimOutput};
pub use fast_xcorr::{find_offset, AliceReference, OffsetResult};
pub use period::{ArrivalTimes, PeriodEstimate};
pub use sync_string::{generate_string, StringParams, SyncString};
