//! Two-stage cross-correlation peak search over an interleaved DFT.
//!
//! Both strings are reshaped into `L1 × N1` matrices (row `r`, column `k`
//! holds `s_{r+kL1}`) and each row is transformed with a length-`N1` DFT,
//! giving `S_{r,j}`. The block correlation
//!
//! ```text
//! X_{u,j} = 1/(L·N1) · Σ_r conj(S^A_{r+u,j}) · S^B_{r,j}
//! ```
//!
//! is tied to the cyclic correlation `x_m = (1/L) Σ_n s^A_{n+m} s^B_n` by a
//! length-`N1` DFT, `x_{u+jL1} = Σ_k e^{-2πijk/N1} X_{u,k}`, and column 0 is the
//! interleaved mean `X_{u,0} = (1/N1) Σ_j x_{u+jL1}`. Rows past `L1 − 1` are
//! reached through `S_{r+L1,j} = S_{r,j}·e^{2πij/N1}`.
//!
//! The search maximizes `X_{u,0}` over all `u` with one length-`L1` FFT
//! correlation, then evaluates `X_{u_opt,j}` for the remaining columns at that
//! single row and transforms back to get the `N1` candidate lags.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{self, OpCounter};
use crate::sync_string::SyncString;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum XcorrError {
    #[error("length {len} is not divisible by {blocks} blocks")]
    LengthNotDivisible { len: usize, blocks: usize },
    #[error("spectrum dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("receiver string has no detections")]
    DegenerateInput,
    #[error("receiver symbol {value} at index {index} is not in {{-1, 0, +1}}")]
    InvalidSymbol { index: usize, value: f64 },
    #[error("index out of range: {0}")]
    OutOfRange(String),
}

/// Row-wise DFT of a string reshaped to `L1 × N1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterleavedSpectrum {
    rows: usize,
    cols: usize,
    // row-major, entry (r, j) at r * cols + j
    coeffs: Vec<Complex64>,
}

impl InterleavedSpectrum {
    /// `L1`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `N1`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn source_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `S_{r,j}` for any `r ≥ 0`, using the extension relation past `L1 − 1`.
    pub fn at(&self, r: usize, j: usize) -> Complex64 {
        let base = self.coeffs[(r % self.rows) * self.cols + j];
        let wraps = r / self.rows;
        if wraps == 0 {
            base
        } else {
            base * twiddle(j * wraps, self.cols)
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.coeffs[r * self.cols + j]).collect()
    }
}

/// `e^{2πi·k/n}`.
fn twiddle(k: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (k % n) as f64 / n as f64)
}

pub fn interleaved_dft(s: &[f64], blocks: usize) -> Result<InterleavedSpectrum, XcorrError> {
    interleaved_dft_counted(s, blocks, &mut OpCounter::default())
}

fn interleaved_dft_counted(
    s: &[f64],
    blocks: usize,
    ops: &mut OpCounter,
) -> Result<InterleavedSpectrum, XcorrError> {
    if blocks == 0 || s.is_empty() || s.len() % blocks != 0 {
        return Err(XcorrError::LengthNotDivisible { len: s.len(), blocks });
    }
    let rows = s.len() / blocks;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); s.len()];
    for (r, row) in coeffs.chunks_exact_mut(blocks).enumerate() {
        for (k, c) in row.iter_mut().enumerate() {
            *c = Complex64::new(s[r + k * rows], 0.0);
        }
        ops.fft(blocks);
    }
    spectral::forward_chunks(&mut coeffs, blocks);
    Ok(InterleavedSpectrum { rows, cols: blocks, coeffs })
}

fn check_dims(sa: &InterleavedSpectrum, sb: &InterleavedSpectrum) -> Result<(), XcorrError> {
    if sa.dims() != sb.dims() {
        return Err(XcorrError::DimensionMismatch { left: sa.dims(), right: sb.dims() });
    }
    Ok(())
}

fn norm(sa: &InterleavedSpectrum) -> f64 {
    1.0 / (sa.source_len() as f64 * sa.cols as f64)
}

/// `X_{u,j}` at a single row, `O(L1)`.
pub fn block_xcorr_entry(
    sa: &InterleavedSpectrum,
    sb: &InterleavedSpectrum,
    u: usize,
    j: usize,
) -> Result<Complex64, XcorrError> {
    check_dims(sa, sb)?;
    if u >= sa.rows || j >= sa.cols {
        return Err(XcorrError::OutOfRange(format!("(u, j) = ({u}, {j})")));
    }
    Ok(block_entry_unchecked(sa, sb, u, j))
}

fn block_entry_unchecked(sa: &InterleavedSpectrum, sb: &InterleavedSpectrum, u: usize, j: usize) -> Complex64 {
    let l1 = sa.rows;
    let cols = sa.cols;
    let mut head = Complex64::new(0.0, 0.0);
    for r in 0..l1 - u {
        head += sa.coeffs[(r + u) * cols + j].conj() * sb.coeffs[r * cols + j];
    }
    let mut tail = Complex64::new(0.0, 0.0);
    for r in l1 - u..l1 {
        tail += sa.coeffs[(r + u - l1) * cols + j].conj() * sb.coeffs[r * cols + j];
    }
    // rows r+u ≥ L1 carry conj(e^{2πij/N1})
    (head + tail * twiddle(j, cols).conj()) * norm(sa)
}

/// Full column `X_{·,j}`.
///
/// Column 0 uses an FFT correlation of the two real columns; other columns are
/// evaluated row by row, which is `O(L1²)` and meant for verification.
pub fn block_xcorr_column(
    sa: &InterleavedSpectrum,
    sb: &InterleavedSpectrum,
    j: usize,
) -> Result<Vec<Complex64>, XcorrError> {
    check_dims(sa, sb)?;
    if j >= sa.cols {
        return Err(XcorrError::OutOfRange(format!("column {j}")));
    }
    if j == 0 {
        let a: Vec<f64> = sa.column(0).iter().map(|c| c.re).collect();
        let b: Vec<f64> = sb.column(0).iter().map(|c| c.re).collect();
        let scale = norm(sa);
        return Ok(spectral::cyclic_xcorr(&a, &b)
            .into_iter()
            .map(|v| Complex64::new(v * scale, 0.0))
            .collect());
    }
    Ok((0..sa.rows).map(|u| block_entry_unchecked(sa, sb, u, j)).collect())
}

/// `x_{u+jL1} = Σ_k e^{-2πijk/N1} X_{u,k}` for `j = 0..N1`, real parts.
pub fn lemma1_reconstruct(row: &[Complex64]) -> Vec<f64> {
    lemma1_reconstruct_complex(row).into_iter().map(|c| c.re).collect()
}

/// As [`lemma1_reconstruct`] but keeps the imaginary parts, which vanish for
/// real strings.
pub fn lemma1_reconstruct_complex(row: &[Complex64]) -> Vec<Complex64> {
    let mut buf = row.to_vec();
    spectral::forward(&mut buf);
    buf
}

/// `X_{u,k} = (1/N1) Σ_j e^{2πijk/N1} x_{u+jL1}`.
pub fn lemma1_inverse(x: &[f64]) -> Vec<Complex64> {
    let mut buf = spectral::to_complex(x);
    spectral::inverse(&mut buf);
    let scale = 1.0 / x.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Transmitter string with its interleaved spectrum and column-0 FFT
/// precomputed. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct AliceReference {
    symbols: Vec<i8>,
    spectrum: InterleavedSpectrum,
    column0: Vec<f64>,
    column0_spec: Vec<Complex64>,
}

impl AliceReference {
    pub fn new(symbols: &[i8], blocks: usize) -> Result<Self, XcorrError> {
        let values: Vec<f64> = symbols.iter().map(|&s| f64::from(s)).collect();
        let spectrum = interleaved_dft(&values, blocks)?;
        let column0: Vec<f64> = spectrum.column(0).iter().map(|c| c.re).collect();
        let mut column0_spec = spectral::to_complex(&column0);
        spectral::forward(&mut column0_spec);
        Ok(Self { symbols: symbols.to_vec(), spectrum, column0, column0_spec })
    }

    pub fn from_sync_string(s: &SyncString) -> Result<Self, XcorrError> {
        Self::new(s.symbols(), s.params().blocks)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blocks(&self) -> usize {
        self.spectrum.cols
    }

    pub fn block_len(&self) -> usize {
        self.spectrum.rows
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    pub fn spectrum(&self) -> &InterleavedSpectrum {
        &self.spectrum
    }

    pub fn column0(&self) -> &[f64] {
        &self.column0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetResult {
    pub u_opt: usize,
    pub j_opt: usize,
    /// `u_opt + j_opt·L1`, in `[0, L)`.
    pub m_opt: usize,
    /// `x_{m_opt}`.
    pub peak_value: f64,
    /// `X_{u_opt,0}`, the interleaved mean at the winning row.
    pub column0_peak: f64,
    /// Peak of `X_{·,0}` above the off-peak mean in units of off-peak stdev.
    pub distinguishability: f64,
    pub success: bool,
    /// String length `L`.
    pub len: usize,
}

impl OffsetResult {
    /// `m_opt` folded into `[-L/2, L/2)`.
    pub fn signed_offset(&self) -> i64 {
        let m = self.m_opt as i64;
        let len = self.len as i64;
        if 2 * m >= len {
            m - len
        } else {
            m
        }
    }
}

/// Stage-wise multiply-add counts of one [`find_offset`] call.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct StageOps {
    pub stage1: OpCounter,
    pub stage2: OpCounter,
}

pub fn find_offset(alice: &AliceReference, bob: &[f64], delta_threshold: f64) -> Result<OffsetResult, XcorrError> {
    find_offset_counted(alice, bob, delta_threshold, &mut StageOps::default())
}

pub fn find_offset_counted(
    alice: &AliceReference,
    bob: &[f64],
    delta_threshold: f64,
    ops: &mut StageOps,
) -> Result<OffsetResult, XcorrError> {
    validate_bob(bob, alice.len())?;
    let l1 = alice.block_len();
    let n1 = alice.blocks();
    let len = alice.len();

    // Stage 1: interleaved mean X_{u,0} for every u.
    let sb = interleaved_dft_counted(bob, n1, &mut ops.stage1)?;
    let b0: Vec<f64> = sb.column(0).iter().map(|c| c.re).collect();
    let mut b0_spec = spectral::to_complex(&b0);
    spectral::forward(&mut b0_spec);
    ops.stage1.fft(l1);
    ops.stage1.add(l1);
    // Integer inputs give integer lag sums.
    let column0: Vec<f64> = spectral::cyclic_xcorr_from_spectra(&alice.column0_spec, b0_spec)
        .into_iter()
        .map(f64::round)
        .collect();
    ops.stage1.fft(l1);
    let u_opt = spectral::argmax(&column0).expect("non-empty column");
    let distinguishability = distinguishability(&column0, u_opt);
    let norm = norm(&alice.spectrum);
    let column0_peak = column0[u_opt] * norm;

    // Stage 2: remaining columns at u_opt only, then back to lag space.
    let mut row = Vec::with_capacity(n1);
    row.push(Complex64::new(column0_peak, 0.0));
    for j in 1..n1 {
        row.push(block_entry_unchecked(&alice.spectrum, &sb, u_opt, j));
        ops.stage2.add(l1);
    }
    let scale = len as f64;
    let lags: Vec<f64> = lemma1_reconstruct(&row).into_iter().map(|x| (x * scale).round() / scale).collect();
    ops.stage2.fft(n1);
    let j_opt = spectral::argmax(&lags).expect("non-empty row");

    Ok(OffsetResult {
        u_opt,
        j_opt,
        m_opt: u_opt + j_opt * l1,
        peak_value: lags[j_opt],
        column0_peak,
        distinguishability,
        success: distinguishability >= delta_threshold,
        len,
    })
}

fn validate_bob(bob: &[f64], expected: usize) -> Result<(), XcorrError> {
    if bob.len() != expected {
        return Err(XcorrError::LengthMismatch { expected, actual: bob.len() });
    }
    if let Some((index, &value)) = bob.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0 && v != -1.0) {
        return Err(XcorrError::InvalidSymbol { index, value });
    }
    if bob.iter().all(|&v| v == 0.0) {
        return Err(XcorrError::DegenerateInput);
    }
    Ok(())
}

/// `(peak − mean)/stdev` over the column excluding the peak and its two
/// cyclic neighbours.
fn distinguishability(column: &[f64], peak: usize) -> f64 {
    let n = column.len();
    let excluded = |i: usize| i == peak || i == (peak + 1) % n || i == (peak + n - 1) % n;
    let rest: Vec<f64> = column.iter().enumerate().filter(|&(i, _)| !excluded(i)).map(|(_, &v)| v).collect();
    if rest.len() < 2 {
        return 0.0;
    }
    let mean = rest.iter().sum::<f64>() / rest.len() as f64;
    let var = rest.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rest.len() as f64;
    let lift = column[peak] - mean;
    if var > 0.0 {
        lift / var.sqrt()
    } else if lift > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Full-length FFT correlation used as the `O(L log L)` baseline.
#[derive(Debug, Clone)]
pub struct BaselineReference {
    spectrum: Vec<Complex64>,
}

impl BaselineReference {
    pub fn new(symbols: &[i8]) -> Self {
        let values: Vec<f64> = symbols.iter().map(|&s| f64::from(s)).collect();
        let mut spectrum = spectral::to_complex(&values);
        spectral::forward(&mut spectrum);
        Self { spectrum }
    }

    /// Lag of the correlation maximum and its value `x_m`.
    pub fn find_offset(&self, bob: &[f64], ops: &mut OpCounter) -> Result<(usize, f64), XcorrError> {
        validate_bob(bob, self.spectrum.len())?;
        let len = bob.len();
        let mut b = spectral::to_complex(bob);
        spectral::forward(&mut b);
        ops.fft(len);
        ops.add(len);
        let x = spectral::cyclic_xcorr_from_spectra(&self.spectrum, b);
        ops.fft(len);
        let sums: Vec<f64> = x.into_iter().map(f64::round).collect();
        let m = spectral::argmax(&sums).expect("non-empty");
        Ok((m, sums[m] / len as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityReport {
    pub len: usize,
    pub blocks: usize,
    pub stage1_ops: u64,
    pub stage2_ops: u64,
    pub baseline_ops: u64,
}

impl ComplexityReport {
    pub fn fast_ops(&self) -> u64 {
        self.stage1_ops + self.stage2_ops
    }

    pub fn ratio(&self) -> f64 {
        self.fast_ops() as f64 / self.baseline_ops as f64
    }
}

/// Operation counts of the fast search and the full-FFT baseline on a
/// synthetic instance of length `len` with `blocks` blocks.
///
/// Counts do not depend on the data, only on `len` and `blocks`.
pub fn complexity_probe(len: usize, blocks: usize) -> Result<ComplexityReport, XcorrError> {
    if blocks == 0 || len == 0 || len % blocks != 0 {
        return Err(XcorrError::LengthNotDivisible { len, blocks });
    }
    // deterministic ±1 pattern; contents do not affect the counts
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let alice: Vec<i8> = (0..len)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            if state & 1 == 0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let bob: Vec<f64> = (0..len).map(|n| if n % 7 == 0 { f64::from(alice[(n + 1) % len]) } else { 0.0 }).collect();

    let reference = AliceReference::new(&alice, blocks)?;
    let mut stages = StageOps::default();
    find_offset_counted(&reference, &bob, 0.0, &mut stages)?;
    let mut baseline = OpCounter::default();
    BaselineReference::new(&alice).find_offset(&bob, &mut baseline)?;
    Ok(ComplexityReport {
        len,
        blocks,
        stage1_ops: stages.stage1.ops,
        stage2_ops: stages.stage2.ops,
        baseline_ops: baseline.ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sync_string::{generate_string, naive_xcorr, StringParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Eq.-by-definition evaluation of the interleaved DFT.
    fn direct_spectrum(s: &[f64], blocks: usize, r: usize, j: usize) -> Complex64 {
        let l1 = s.len() / blocks;
        (0..blocks)
            .map(|k| {
                let idx = (r + k * l1) % s.len();
                s[idx] * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / blocks as f64)
            })
            .sum()
    }

    fn random_pm1(len: usize, rng: &mut ChaCha8Rng) -> Vec<i8> {
        (0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
    }

    fn random_ternary(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| [-1.0, 0.0, 1.0][rng.random_range(0..3)]).collect()
    }

    #[test]
    fn constant_string_spectrum() {
        let s = interleaved_dft(&[1.0; 12], 4).unwrap();
        for r in 0..3 {
            assert!((s.at(r, 0) - Complex64::new(4.0, 0.0)).norm() < 1e-12);
            for j in 1..4 {
                assert!(s.at(r, j).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_tap_spectrum() {
        let mut v = vec![0.0; 12];
        for r in 0..4 {
            v[r + 4] = 1.0;
        }
        let s = interleaved_dft(&v, 3).unwrap();
        for r in 0..4 {
            for j in 0..3 {
                let expected = Complex64::from_polar(1.0, -2.0 * PI * j as f64 / 3.0);
                assert!((s.at(r, j) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_matches_definition_and_extension() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = random_pm1(240, &mut rng).into_iter().map(f64::from).collect();
        let spec = interleaved_dft(&s, 6).unwrap();
        for r in 0..80 {
            for j in 0..6 {
                let direct = direct_spectrum(&s, 6, r, j);
                assert!((spec.at(r, j) - direct).norm() <= 1e-9 * direct.norm().max(1.0));
            }
        }
        // rows past L1 from the definition on a doubled index range
        for r in 0..40 {
            for j in 0..6 {
                let extended = direct_spectrum(&s, 6, r + 40, j);
                let expected = spec.at(r, j) * twiddle(j, 6);
                assert!((extended - expected).norm() < 1e-12);
                assert!((spec.at(r + 40, j) - extended).norm() < 1e-12);
            }
            assert!(spec.at(r, 0).im.abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indivisible_length() {
        assert_eq!(
            interleaved_dft(&[1.0; 10], 3),
            Err(XcorrError::LengthNotDivisible { len: 10, blocks: 3 })
        );
    }

    #[test]
    fn self_correlation_at_zero_lag_is_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<f64> = random_pm1(240, &mut rng).into_iter().map(f64::from).collect();
        let spec = interleaved_dft(&s, 6).unwrap();
        let x = block_xcorr_entry(&spec, &spec, 0, 0).unwrap();
        let power: f64 = spec.column(0).iter().map(|c| c.norm_sqr()).sum::<f64>() / (240.0 * 6.0);
        assert!((x.re - power).abs() < 1e-12 && x.im.abs() < 1e-12 && power >= 0.0);
    }

    #[test]
    fn column0_argmax_follows_shift() {
        let s = generate_string(StringParams::new(240, 6, 1.0, 9).unwrap()).unwrap();
        let a = s.as_f64();
        let b: Vec<f64> = (0..240).map(|n| a[(n + 137) % 240]).collect();
        let sa = interleaved_dft(&a, 6).unwrap();
        let sb = interleaved_dft(&b, 6).unwrap();
        let col: Vec<f64> = block_xcorr_column(&sa, &sb, 0).unwrap().iter().map(|c| c.re).collect();
        assert_eq!(spectral::argmax(&col), Some(137 % 40));
        let naive = naive_xcorr(s.symbols(), &b).unwrap();
        assert_eq!(naive.argmax(), Some(137));
    }

    #[test]
    fn column0_is_interleaved_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_pm1(240, &mut rng);
        let b = random_ternary(240, &mut rng);
        let naive = naive_xcorr(&a, &b).unwrap();
        let af: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
        let sa = interleaved_dft(&af, 6).unwrap();
        let sb = interleaved_dft(&b, 6).unwrap();
        let col = block_xcorr_column(&sa, &sb, 0).unwrap();
        for u in 0..40 {
            let mean: f64 = (0..6).map(|j| naive.values[u + j * 40]).sum::<f64>() / 6.0;
            assert!((col[u].re - mean).abs() < 1e-9, "u = {u}");
            let entry = block_xcorr_entry(&sa, &sb, u, 0).unwrap();
            assert!((entry - col[u]).norm() < 1e-9);
        }
    }

    #[test]
    fn lemma1_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_pm1(240, &mut rng);
        let b = random_ternary(240, &mut rng);
        let naive = naive_xcorr(&a, &b).unwrap();
        let af: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
        let sa = interleaved_dft(&af, 6).unwrap();
        let sb = interleaved_dft(&b, 6).unwrap();
        for u in 0..40 {
            let row: Vec<Complex64> = (0..6).map(|k| block_xcorr_entry(&sa, &sb, u, k).unwrap()).collect();
            let x = lemma1_reconstruct_complex(&row);
            for j in 0..6 {
                let expected = naive.values[u + j * 40];
                assert!((x[j].re - expected).abs() <= 1e-9 * expected.abs().max(1e-3), "u={u} j={j}");
                assert!(x[j].im.abs() < 1e-9);
            }
            let back = lemma1_inverse(&lemma1_reconstruct(&row));
            for (p, q) in back.iter().zip(&row) {
                assert!((p - q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn lemma1_single_point_is_identity() {
        assert_eq!(lemma1_reconstruct(&[Complex64::new(0.25, 0.0)]), vec![0.25]);
    }

    #[test]
    fn identity_alignment() {
        let s = generate_string(StringParams::new(1200, 6, 1.0, 5).unwrap()).unwrap();
        let alice = AliceReference::from_sync_string(&s).unwrap();
        let r = find_offset(&alice, &s.as_f64(), 10.0).unwrap();
        assert_eq!(r.m_opt, 0);
        assert_eq!(r.peak_value, 1.0);
        assert!(r.success);
        assert_eq!(r.signed_offset(), 0);
    }

    #[test]
    fn recovers_shift_with_losses() {
        let s = generate_string(StringParams::new(12_000, 10, 1.0, 6).unwrap()).unwrap();
        let alice = AliceReference::from_sync_string(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shift = 9_876;
        let bob: Vec<f64> = (0..12_000)
            .map(|n| if rng.random::<f64>() < 0.1 { f64::from(s.symbols()[(n + shift) % 12_000]) } else { 0.0 })
            .collect();
        let r = find_offset(&alice, &bob, 10.0).unwrap();
        assert_eq!(r.m_opt, shift);
        assert_eq!(r.signed_offset(), shift as i64 - 12_000);
        assert_eq!(naive_xcorr(s.symbols(), &bob).unwrap().argmax(), Some(shift));
        assert!(r.success);
    }

    #[test]
    fn input_errors() {
        let s = generate_string(StringParams::new(240, 6, 1.0, 5).unwrap()).unwrap();
        let alice = AliceReference::from_sync_string(&s).unwrap();
        assert_eq!(find_offset(&alice, &[0.0; 240], 10.0), Err(XcorrError::DegenerateInput));
        assert_eq!(
            find_offset(&alice, &[1.0; 10], 10.0),
            Err(XcorrError::LengthMismatch { expected: 240, actual: 10 })
        );
        let mut bad = vec![0.0; 240];
        bad[3] = 0.5;
        assert_eq!(find_offset(&alice, &bad, 10.0), Err(XcorrError::InvalidSymbol { index: 3, value: 0.5 }));
        let other = interleaved_dft(&[1.0; 240], 4).unwrap();
        assert!(matches!(
            block_xcorr_entry(alice.spectrum(), &other, 0, 0),
            Err(XcorrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_block_degenerates_to_baseline() {
        let r = complexity_probe(1 << 10, 1).unwrap();
        assert_eq!(r.stage2_ops, 0);
        assert_eq!(r.stage1_ops, r.baseline_ops);
    }

    #[test]
    fn fast_path_is_cheaper_at_log_blocks() {
        // 2^20 rounded down to a multiple of 20
        let r = complexity_probe(20 * ((1 << 20) / 20), 20).unwrap();
        assert!(r.fast_ops() < r.baseline_ops, "{r:?}");
    }

    #[test]
    fn doubling_length_scales_stage_costs() {
        let a = complexity_probe(16 * 4096, 16).unwrap();
        let b = complexity_probe(16 * 8192, 16).unwrap();
        let s1 = b.stage1_ops as f64 / a.stage1_ops as f64;
        let s2 = b.stage2_ops as f64 / a.stage2_ops as f64;
        let upper = 2.0 * (1.0 + 1.0 / 4096f64.log2());
        assert!((2.0..=upper + 1e-9).contains(&s1), "stage 1 ratio {s1}");
        assert!((s2 - 2.0).abs() < 0.01, "stage 2 ratio {s2}");
    }
}
