//! Thin FFT layer over `rustfft` with a per-thread planner and an operation
//! cost model used by the complexity instrumentation.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Cost charged for one length-`n` FFT: `⌈n·log2 n⌉` butterfly multiply-adds.
///
/// A length-1 transform is the identity and costs nothing.
pub fn fft_cost(n: usize) -> u64 {
    if n < 2 {
        0
    } else {
        let n = n as f64;
        (n * n.log2()).ceil() as u64
    }
}

/// Multiply-add counter threaded through instrumented code paths.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub ops: u64,
}

impl OpCounter {
    pub fn fft(&mut self, n: usize) {
        self.ops += fft_cost(n);
    }

    pub fn add(&mut self, n: usize) {
        self.ops += n as u64;
    }
}

/// Unnormalized forward transform, in place.
pub fn forward(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// Unnormalized forward transforms of consecutive length-`n` chunks, in place.
pub fn forward_chunks(buf: &mut [Complex64], n: usize) {
    assert!(n > 0 && buf.len() % n == 0);
    if n < 2 {
        return;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(buf));
}

/// Unnormalized inverse transform, in place.
pub fn inverse(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

pub fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// `c[m] = Σ_n a[(n+m) mod L] · b[n]` given the forward spectra of `a` and `b`.
///
/// Consumes `b_spec` as scratch space.
pub fn cyclic_xcorr_from_spectra(a_spec: &[Complex64], mut b_spec: Vec<Complex64>) -> Vec<f64> {
    assert_eq!(a_spec.len(), b_spec.len());
    for (b, a) in b_spec.iter_mut().zip(a_spec) {
        *b = a * b.conj();
    }
    inverse(&mut b_spec);
    let scale = 1.0 / b_spec.len() as f64;
    b_spec.into_iter().map(|c| c.re * scale).collect()
}

/// `c[m] = Σ_n a[(n+m) mod L] · b[n]` for real sequences of equal length.
pub fn cyclic_xcorr(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let mut a_spec = to_complex(a);
    forward(&mut a_spec);
    let mut b_spec = to_complex(b);
    forward(&mut b_spec);
    cyclic_xcorr_from_spectra(&a_spec, b_spec)
}

/// Index of the largest value; the smallest index wins ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}
