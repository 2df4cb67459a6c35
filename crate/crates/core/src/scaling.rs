//! Power-law loss frontiers `L(f) = (f/a)^b + c`.
//!
//! Fitting profiles out the irreducible loss `c`: for a fixed `c` the model
//! `ln(L - c) = b ln f - b ln a` is linear, so `(a, b)` come from ordinary
//! least squares. The profile objective is the sum of squared residuals
//! `ln L_obs - ln L_pred(c)`, minimised over `c` by a fixed 1000-point scan
//! of `[0, 0.999 min L)` followed by golden-section refinement around the
//! best grid cell.

use alloc::vec::Vec;

use thiserror::Error;

use crate::reference::{FRONTIER_A, FRONTIER_B, FRONTIER_C};

/// Number of coarse grid points in the `c` scan.
pub const C_SCAN_POINTS: usize = 1000;
/// Upper end of the `c` scan as a fraction of the smallest observed loss.
pub const C_SCAN_CEILING: f64 = 0.999;
/// Minimum number of points for a three-parameter fit.
pub const MIN_FIT_POINTS: usize = 4;

const GOLDEN_ITERATIONS: usize = 200;

/// Fitting failures.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FitError {
    /// Fewer than [`MIN_FIT_POINTS`] points.
    #[error("need at least {MIN_FIT_POINTS} points, got {0}")]
    TooFewPoints(usize),
    /// A point with non-positive or non-finite coordinates.
    #[error("point {index} is not a positive finite (flops, loss) pair")]
    InvalidPoint {
        /// Index in the caller's slice.
        index: usize,
    },
    /// Flat losses or repeated FLOPs leave the power law undetermined.
    #[error("degenerate data: {0}")]
    DegenerateData(&'static str),
}

/// A loss-vs-compute frontier `L(f) = (f/a)^b + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// FLOPs scale.
    pub a: f64,
    /// Exponent; negative when loss falls with compute.
    pub b: f64,
    /// Irreducible loss, nats/token.
    pub c: f64,
}

impl PowerLawFit {
    /// The published Cerebras-GPT frontier.
    pub const PUBLISHED: Self = Self {
        a: FRONTIER_A,
        b: FRONTIER_B,
        c: FRONTIER_C,
    };

    /// Predicted loss at `flops`.
    pub fn predict(&self, flops: f64) -> f64 {
        predict_loss(self, flops)
    }
}

/// One observed (pre-training FLOPs, loss) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    /// Pre-training FLOPs.
    pub flops: f64,
    /// Test cross-entropy, nats/token.
    pub loss: f64,
}

impl LossPoint {
    /// Convenience constructor.
    pub const fn new(flops: f64, loss: f64) -> Self {
        Self { flops, loss }
    }
}

/// `(flops/a)^b + c`.
pub fn predict_loss(fit: &PowerLawFit, flops: f64) -> f64 {
    libm::pow(flops / fit.a, fit.b) + fit.c
}

/// Signed percent gap of `point` above the frontier.
pub fn relative_gap(fit: &PowerLawFit, point: &LossPoint) -> f64 {
    let expected = predict_loss(fit, point.flops);
    (point.loss - expected) / expected * 100.0
}

/// Proportional loss degradation from training at `tau` tokens per parameter
/// instead of 20: `0.023 * ln(sqrt(20/tau))^2`.
pub fn loss_degradation(tau: f64) -> f64 {
    let l = libm::log(libm::sqrt(20.0 / tau));
    0.023 * l * l
}

/// Vocabulary correction errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VocabError {
    /// A token count was zero.
    #[error("token counts must be positive")]
    ZeroTokens,
}

/// Re-expresses a per-token cross-entropy measured with one tokenizer in
/// per-token units of another, conserving total nats over the corpus.
pub fn correct_vocab_xent(
    xent: f64,
    tokens_source_vocab: u64,
    tokens_reference_vocab: u64,
) -> Result<f64, VocabError> {
    if tokens_source_vocab == 0 || tokens_reference_vocab == 0 {
        return Err(VocabError::ZeroTokens);
    }
    Ok(xent * tokens_source_vocab as f64 / tokens_reference_vocab as f64)
}

/// `(b, k, sse)` of the log-space line for a fixed irreducible loss.
#[derive(Debug, Clone, Copy)]
struct Profile {
    slope: f64,
    intercept: f64,
    sse: f64,
}

struct Profiler {
    log_f: Vec<f64>,
    log_l: Vec<f64>,
    loss: Vec<f64>,
    mean_x: f64,
    sxx: f64,
}

impl Profiler {
    fn new(points: &[LossPoint]) -> Self {
        let log_f: Vec<f64> = points.iter().map(|p| libm::log(p.flops)).collect();
        let n = log_f.len() as f64;
        let mean_x = log_f.iter().sum::<f64>() / n;
        let sxx = log_f.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
        Self {
            log_l: points.iter().map(|p| libm::log(p.loss)).collect(),
            loss: points.iter().map(|p| p.loss).collect(),
            log_f,
            mean_x,
            sxx,
        }
    }

    fn at(&self, c: f64) -> Profile {
        let n = self.log_f.len() as f64;
        let ys: Vec<f64> = self.loss.iter().map(|l| libm::log(l - c)).collect();
        let mean_y = ys.iter().sum::<f64>() / n;
        let sxy: f64 = self
            .log_f
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - self.mean_x) * (y - mean_y))
            .sum();
        let slope = sxy / self.sxx;
        let intercept = mean_y - slope * self.mean_x;
        let sse = self
            .log_f
            .iter()
            .zip(&self.log_l)
            .map(|(x, obs)| {
                let pred = libm::log(libm::exp(intercept + slope * x) + c);
                (obs - pred) * (obs - pred)
            })
            .sum();
        Profile {
            slope,
            intercept,
            sse,
        }
    }
}

/// Least-squares power-law fit; see the module docs for the procedure.
///
/// Points are sorted by FLOPs first, so the result does not depend on input
/// order.
pub fn fit_power_law(points: &[LossPoint]) -> Result<PowerLawFit, FitError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints(points.len()));
    }
    for (index, p) in points.iter().enumerate() {
        let ok = p.flops.is_finite() && p.flops > 0.0 && p.loss.is_finite() && p.loss > 0.0;
        if !ok {
            return Err(FitError::InvalidPoint { index });
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|x, y| x.flops.total_cmp(&y.flops).then(x.loss.total_cmp(&y.loss)));
    if sorted.windows(2).any(|w| w[0].flops == w[1].flops) {
        return Err(FitError::DegenerateData("repeated flops value"));
    }
    let min_loss = sorted.iter().map(|p| p.loss).fold(f64::INFINITY, f64::min);
    if sorted.iter().all(|p| p.loss == min_loss) {
        return Err(FitError::DegenerateData("all losses are equal"));
    }

    let profiler = Profiler::new(&sorted);
    let ceiling = C_SCAN_CEILING * min_loss;
    let step = ceiling / (C_SCAN_POINTS - 1) as f64;
    let grid = |i: usize| i as f64 * step;

    // Strict `<` keeps the first minimum, so the argmin is reproducible.
    let mut best_i = 0;
    let mut best_sse = f64::INFINITY;
    for i in 0..C_SCAN_POINTS {
        let sse = profiler.at(grid(i)).sse;
        if sse < best_sse {
            best_sse = sse;
            best_i = i;
        }
    }

    let lo = grid(best_i.saturating_sub(1));
    let hi = grid((best_i + 1).min(C_SCAN_POINTS - 1));
    let c = golden_section(lo, hi, |c| profiler.at(c).sse);
    let c = if profiler.at(c).sse <= best_sse {
        c
    } else {
        grid(best_i)
    };

    let profile = profiler.at(c);
    if !(profile.slope.is_finite() && profile.intercept.is_finite()) || profile.slope == 0.0 {
        return Err(FitError::DegenerateData("no finite power law"));
    }
    // ln(L - c) = b ln f - b ln a  =>  a = exp(-k / b)
    let a = libm::exp(-profile.intercept / profile.slope);
    if !a.is_finite() || a <= 0.0 {
        return Err(FitError::DegenerateData("FLOPs scale out of range"));
    }
    Ok(PowerLawFit {
        a,
        b: profile.slope,
        c,
    })
}

fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo <= f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}
