//! Empirical check that a parameterization keeps hidden activations
//! width-stable at initialization.
//!
//! For each width `w` the probe pushes standard-normal inputs through rows of
//! a `w x w` matrix drawn from the plan's ffn1 initializer at that width, and
//! reports the root-mean-square of the outputs. Output units of `W x` are
//! exchangeable, so each sample draws one fresh input and
//! [`PROBE_ROWS_PER_SAMPLE`] fresh rows instead of the full matrix; the
//! pooled mean square estimates the same quantity, `E[y^2] = σ^2 w`.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use super::LayerPlan;

/// Output units drawn per input sample.
pub const PROBE_ROWS_PER_SAMPLE: usize = 8;

/// Truncation bound of the initializer, in units of the parent normal's σ.
const TRUNCATION: f64 = 2.0;

/// Measured output RMS at one width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    /// Layer width.
    pub width: u64,
    /// Initializer standard deviation used at this width.
    pub init_std: f64,
    /// Empirical output root-mean-square.
    pub rms: f64,
}

/// Standard deviation of a unit normal truncated to `[-k, k]`.
fn truncated_unit_std(k: f64) -> f64 {
    let density = libm::exp(-k * k / 2.0) / libm::sqrt(2.0 * core::f64::consts::PI);
    let mass = libm::erf(k / core::f64::consts::SQRT_2);
    libm::sqrt(1.0 - 2.0 * k * density / mass)
}

/// Draws from a normal truncated at ±2σ' by redraw, with σ' chosen so the
/// truncated distribution has standard deviation `std`.
struct TruncatedNormal {
    parent_std: f64,
}

impl TruncatedNormal {
    fn with_std(std: f64) -> Self {
        Self {
            parent_std: std / truncated_unit_std(TRUNCATION),
        }
    }

    fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= TRUNCATION {
                return self.parent_std * z;
            }
        }
    }
}

/// Runs the probe. Each width uses its own ChaCha stream derived from `seed`,
/// so a width's row does not depend on which other widths are probed.
pub fn activation_scale_probe(
    plan: &LayerPlan,
    widths: &[u64],
    samples: usize,
    seed: u64,
) -> Vec<ProbeRow> {
    widths
        .iter()
        .map(|&width| {
            let init_std = plan.hidden_init_std_at(width);
            let rms = probe_width(init_std, width as usize, samples, seed);
            ProbeRow {
                width,
                init_std,
                rms,
            }
        })
        .collect()
}

fn probe_width(init_std: f64, width: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(width as u64);
    let init = TruncatedNormal::with_std(init_std);
    let mut input = alloc::vec![0.0f64; width];
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        for x in input.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        for _ in 0..PROBE_ROWS_PER_SAMPLE {
            let y: f64 = input.iter().map(|x| init.sample(&mut rng) * x).sum();
            sum_sq += y * y;
        }
    }
    let n = (samples * PROBE_ROWS_PER_SAMPLE).max(1) as f64;
    libm::sqrt(sum_sq / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_std_constant() {
        // sqrt(1 - 4 φ(2) / (2Φ(2) - 1))
        assert!((truncated_unit_std(2.0) - 0.879_625_661_034_239_8).abs() < 1e-12);
    }

    #[test]
    fn truncated_sampler_has_requested_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = TruncatedNormal::with_std(0.5);
        let n = 200_000;
        let mut sq = 0.0;
        let mut max = 0.0f64;
        for _ in 0..n {
            let v = d.sample(&mut rng);
            sq += v * v;
            max = max.max(v.abs());
        }
        let std = libm::sqrt(sq / n as f64);
        assert!((std - 0.5).abs() < 0.005, "{std}");
        assert!(max <= 2.0 * d.parent_std);
    }
}
