//! Least trimmed squares for a straight line.
//!
//! Minimizes the sum of the `h` smallest squared residuals. Candidate lines
//! come from an ordinary fit on all points plus a set of two-point fits; each
//! is improved by concentration steps (refit on the `h` best points until
//! the objective stops decreasing) and the best one wins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LtsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("x and y lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("trim fraction {0} outside [0, 1)")]
    BadTrim(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of the `h` smallest squared residuals.
    pub objective: f64,
    /// Number of points kept, `h`.
    pub kept: usize,
}

impl LineFit {
    pub fn residual(&self, x: f64, y: f64) -> f64 {
        y - (self.intercept + self.slope * x)
    }
}

const STARTS: usize = 12;
const MAX_CSTEPS: usize = 50;

/// Number of points kept for a given trim fraction.
pub fn kept_count(n: usize, trim_fraction: f64) -> usize {
    (((1.0 - trim_fraction) * n as f64).ceil() as usize).clamp(2.min(n), n)
}

pub fn lts_line(x: &[f64], y: &[f64], trim_fraction: f64) -> Result<LineFit, LtsError> {
    if x.len() != y.len() {
        return Err(LtsError::LengthMismatch(x.len(), y.len()));
    }
    if !(0.0..1.0).contains(&trim_fraction) {
        return Err(LtsError::BadTrim(trim_fraction));
    }
    let n = x.len();
    if n < 3 {
        return Err(LtsError::TooFewPoints { needed: 3, got: n });
    }
    let h = kept_count(n, trim_fraction);

    // centre x for conditioning; intercept is shifted back at the end
    let x_mean = x.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - x_mean).collect();

    let mut starts = Vec::with_capacity(STARTS + 1);
    let all: Vec<usize> = (0..n).collect();
    if let Some(line) = ols(&xc, y, &all) {
        starts.push(line);
    }
    if h < n {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..STARTS {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if xc[i] != xc[j] {
                let slope = (y[j] - y[i]) / (xc[j] - xc[i]);
                starts.push((slope, y[i] - slope * xc[i]));
            }
        }
    }

    let mut best: Option<LineFit> = None;
    let mut order: Vec<usize> = (0..n).collect();
    let mut sq = vec![0.0; n];
    for start in starts {
        let fit = concentrate(&xc, y, h, start, &mut order, &mut sq);
        if best.is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    let mut fit = best.ok_or(LtsError::TooFewPoints { needed: 3, got: n })?;
    fit.intercept -= fit.slope * x_mean;
    Ok(fit)
}

fn concentrate(
    x: &[f64],
    y: &[f64],
    h: usize,
    (mut slope, mut intercept): (f64, f64),
    order: &mut [usize],
    sq: &mut [f64],
) -> LineFit {
    let mut objective = f64::INFINITY;
    for _ in 0..MAX_CSTEPS {
        for i in 0..x.len() {
            sq[i] = (y[i] - intercept - slope * x[i]).powi(2);
        }
        let obj = select_smallest(sq, order, h);
        if obj >= objective {
            break;
        }
        objective = obj;
        match ols(x, y, &order[..h]) {
            Some((s, c)) => {
                slope = s;
                intercept = c;
            }
            None => break,
        }
    }
    // objective of the final line
    for i in 0..x.len() {
        sq[i] = (y[i] - intercept - slope * x[i]).powi(2);
    }
    let objective = select_smallest(sq, order, h).min(objective);
    LineFit { slope, intercept, objective, kept: h }
}

/// Moves the indices of the `h` smallest entries of `sq` to the front of
/// `order` and returns their sum.
fn select_smallest(sq: &[f64], order: &mut [usize], h: usize) -> f64 {
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    if h < order.len() {
        order.select_nth_unstable_by(h - 1, |&a, &b| sq[a].total_cmp(&sq[b]));
    }
    order[..h].iter().map(|&i| sq[i]).sum()
}

fn ols(x: &[f64], y: &[f64], idx: &[usize]) -> Option<(f64, f64)> {
    let n = idx.len() as f64;
    let mx = idx.iter().map(|&i| x[i]).sum::<f64>() / n;
    let my = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in idx {
        let dx = x[i] - mx;
        sxy += dx * (y[i] - my);
        sxx += dx * dx;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
