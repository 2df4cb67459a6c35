//! Mixed-precision stability checks.
//!
//! - [`cast_fraction_zeroed`] simulates a round-to-nearest-even cast into a
//!   narrow float format and reports how many nonzero values underflow to zero.
//! - [`LossScaleState`] is the dynamic loss-scale state machine: halve on
//!   overflow, double after a run of clean steps.
//! - [`adam_epsilon_ok`] checks that Adam's ε is small next to `√μ_v`.

use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// A binary floating-point storage format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FloatFormatSpec {
    /// Display name.
    pub name: &'static str,
    /// Exponent field width.
    pub exponent_bits: u32,
    /// Explicit mantissa (fraction) bits.
    pub mantissa_bits: u32,
}

impl FloatFormatSpec {
    /// IEEE-754 binary16.
    pub const FP16: Self = Self {
        name: "fp16",
        exponent_bits: 5,
        mantissa_bits: 10,
    };
    /// bfloat16.
    pub const BF16: Self = Self {
        name: "bf16",
        exponent_bits: 8,
        mantissa_bits: 7,
    };
    /// IEEE-754 binary32.
    pub const FP32: Self = Self {
        name: "fp32",
        exponent_bits: 8,
        mantissa_bits: 23,
    };

    fn bias(&self) -> i32 {
        (1 << (self.exponent_bits - 1)) - 1
    }

    /// Exponent of the smallest normal number.
    pub fn min_exponent(&self) -> i32 {
        1 - self.bias()
    }

    /// Smallest positive subnormal.
    pub fn min_subnormal(&self) -> f64 {
        libm::ldexp(1.0, self.min_exponent() - self.mantissa_bits as i32)
    }

    /// Smallest positive normal.
    pub fn min_normal(&self) -> f64 {
        libm::ldexp(1.0, self.min_exponent())
    }

    /// Largest finite value.
    pub fn max_finite(&self) -> f64 {
        let m = self.mantissa_bits as i32;
        (2.0 - libm::ldexp(1.0, -m)) * libm::ldexp(1.0, self.bias())
    }

    /// Rounds `value` to the nearest representable value, ties to even.
    /// Overflow yields a signed infinity; NaN passes through.
    pub fn cast(&self, value: f64, mode: CastMode) -> f64 {
        if value.is_nan() || value == 0.0 {
            return value;
        }
        let sign = if value.is_sign_negative() { -1.0 } else { 1.0 };
        let mag = value.abs();
        if mag.is_infinite() {
            return value;
        }
        let (_, exp) = libm::frexp(mag);
        // frexp gives mag = m * 2^exp with m in [0.5, 1)
        let unbiased = (exp - 1).max(self.min_exponent());
        let quantum = libm::ldexp(1.0, unbiased - self.mantissa_bits as i32);
        let rounded = libm::rint(mag / quantum) * quantum;
        let out = if rounded > self.max_finite() {
            f64::INFINITY
        } else if mode == CastMode::FlushToZero && rounded < self.min_normal() {
            0.0
        } else {
            rounded
        };
        sign * out
    }
}

impl fmt::Display for FloatFormatSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

impl FromStr for FloatFormatSpec {
    type Err = StabilityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fp16" => Ok(Self::FP16),
            "bf16" => Ok(Self::BF16),
            "fp32" => Ok(Self::FP32),
            _ => Err(StabilityError::UnknownFormat),
        }
    }
}

/// Handling of results below the smallest normal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum CastMode {
    /// Gradual underflow through subnormals.
    #[default]
    Subnormal,
    /// Results below the smallest normal become zero.
    FlushToZero,
}

/// Stability utility errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StabilityError {
    /// No values supplied.
    #[error("no values supplied")]
    EmptyInput,
    /// Format name not recognised.
    #[error("format must be fp16, bf16 or fp32")]
    UnknownFormat,
}

/// Fraction of nonzero inputs that become exactly zero after the cast.
/// Returns 0 when every input is already zero.
pub fn cast_fraction_zeroed(
    values: &[f64],
    format: &FloatFormatSpec,
    mode: CastMode,
) -> Result<f64, StabilityError> {
    if values.is_empty() {
        return Err(StabilityError::EmptyInput);
    }
    let mut nonzero = 0usize;
    let mut zeroed = 0usize;
    for &v in values.iter().filter(|v| **v != 0.0) {
        nonzero += 1;
        if format.cast(v, mode) == 0.0 {
            zeroed += 1;
        }
    }
    if nonzero == 0 {
        return Ok(0.0);
    }
    Ok(zeroed as f64 / nonzero as f64)
}

/// Dynamic loss-scale state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossScaleState {
    /// Current scale.
    pub scale: f64,
    /// Clean steps since the last overflow or growth.
    pub steps_since_overflow: u32,
    /// Clean steps required before growing.
    pub growth_interval: u32,
    /// Multiplier applied on growth.
    pub growth_factor: f64,
    /// Multiplier applied on overflow.
    pub backoff_factor: f64,
}

impl Default for LossScaleState {
    /// Scale 2^15, growth ×2 every 2000 clean steps, backoff ×0.5.
    fn default() -> Self {
        Self {
            scale: 32768.0,
            steps_since_overflow: 0,
            growth_interval: 2000,
            growth_factor: 2.0,
            backoff_factor: 0.5,
        }
    }
}

impl LossScaleState {
    /// Advances one optimizer step.
    pub fn step(self, overflow_observed: bool) -> Self {
        loss_scale_step(self, overflow_observed)
    }
}

/// One transition of the dynamic loss-scale policy.
pub fn loss_scale_step(state: LossScaleState, overflow_observed: bool) -> LossScaleState {
    if overflow_observed {
        return LossScaleState {
            scale: state.scale * state.backoff_factor,
            steps_since_overflow: 0,
            ..state
        };
    }
    let clean = state.steps_since_overflow + 1;
    if clean >= state.growth_interval {
        LossScaleState {
            scale: state.scale * state.growth_factor,
            steps_since_overflow: 0,
            ..state
        }
    } else {
        LossScaleState {
            steps_since_overflow: clean,
            ..state
        }
    }
}

/// Outcome of the Adam ε rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonCheck {
    /// `ε < threshold`.
    pub ok: bool,
    /// `√μ_v / 1000`.
    pub threshold: f64,
}

/// ε should stay below `√μ_v / 1000`, where `μ_v` is the mean of Adam's
/// velocity state, or updates to small-gradient weights stagnate.
pub fn adam_epsilon_ok(velocity_mean: f64, epsilon: f64) -> EpsilonCheck {
    let threshold = libm::sqrt(velocity_mean) / 1000.0;
    EpsilonCheck {
        ok: epsilon < threshold,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_constants() {
        let h = FloatFormatSpec::FP16;
        assert_eq!(h.max_finite(), 65504.0);
        assert_eq!(h.min_subnormal(), libm::ldexp(1.0, -24));
        assert!((h.min_subnormal() - 5.96e-8).abs() < 1e-10);
        let b = FloatFormatSpec::BF16;
        assert_eq!(b.min_subnormal(), libm::ldexp(1.0, -133));
        assert!((b.min_subnormal() / 9.18e-41 - 1.0).abs() < 1e-3);
        assert!((b.max_finite() / 3.39e38 - 1.0).abs() < 1e-3);
        assert_eq!(FloatFormatSpec::FP32.max_finite(), f32::MAX as f64);
    }

    #[test]
    fn zeroed_fraction_examples() {
        let v = [1e-10, 1.0];
        let m = CastMode::Subnormal;
        assert_eq!(cast_fraction_zeroed(&v, &FloatFormatSpec::FP16, m), Ok(0.5));
        assert_eq!(cast_fraction_zeroed(&v, &FloatFormatSpec::BF16, m), Ok(0.0));
        assert_eq!(cast_fraction_zeroed(&[0.0, 0.0], &FloatFormatSpec::FP16, m), Ok(0.0));
        assert_eq!(
            cast_fraction_zeroed(&[], &FloatFormatSpec::FP16, m),
            Err(StabilityError::EmptyInput)
        );
    }

    #[test]
    fn half_ulp_ties_go_to_even_zero() {
        let h = FloatFormatSpec::FP16;
        let tiny = h.min_subnormal();
        assert_eq!(h.cast(tiny / 2.0, CastMode::Subnormal), 0.0);
        assert_eq!(h.cast(tiny * 0.500_001, CastMode::Subnormal), tiny);
        assert_eq!(h.cast(tiny * 1.5, CastMode::Subnormal), 2.0 * tiny);
        assert_eq!(h.cast(-tiny * 0.7, CastMode::Subnormal), -tiny);
    }

    #[test]
    fn flush_to_zero_drops_subnormals() {
        let h = FloatFormatSpec::FP16;
        assert_eq!(h.cast(1e-6, CastMode::FlushToZero), 0.0);
        assert!(h.cast(1e-6, CastMode::Subnormal) > 0.0);
        assert_eq!(
            cast_fraction_zeroed(&[1e-6, 1.0], &h, CastMode::FlushToZero),
            Ok(0.5)
        );
    }

    #[test]
    fn overflow_goes_to_infinity() {
        let h = FloatFormatSpec::FP16;
        assert_eq!(h.cast(65520.0, CastMode::Subnormal), f64::INFINITY);
        assert_eq!(h.cast(65519.0, CastMode::Subnormal), 65504.0);
        assert_eq!(h.cast(-1e9, CastMode::Subnormal), f64::NEG_INFINITY);
    }

    #[test]
    fn loss_scale_policy() {
        let s = LossScaleState::default().step(true);
        assert_eq!(s.scale, 16384.0);
        assert_eq!(s.steps_since_overflow, 0);
        let mut s = LossScaleState {
            scale: 16384.0,
            ..Default::default()
        };
        for _ in 0..1999 {
            s = s.step(false);
        }
        assert_eq!(s.scale, 16384.0);
        s = s.step(false);
        assert_eq!(s.scale, 32768.0);
        assert_eq!(s.steps_since_overflow, 0);
    }

    #[test]
    fn alternating_never_grows() {
        let mut s = LossScaleState::default();
        let start = s.scale;
        for i in 0..10_000 {
            s = s.step(i % 2 == 0);
            assert!(s.scale <= start);
        }
    }

    #[test]
    fn epsilon_rule() {
        let c = adam_epsilon_ok(1e-6, 1e-8);
        assert_eq!(c.threshold, 1e-6);
        assert!(c.ok);
        assert!(!adam_epsilon_ok(1e-6, 1e-5).ok);
        let z = adam_epsilon_ok(0.0, 1e-30);
        assert_eq!(z.threshold, 0.0);
        assert!(!z.ok);
        assert!(adam_epsilon_ok(1e-10, crate::reference::ADAM_EPS_LARGE).ok);
        assert!(!adam_epsilon_ok(1e-10, crate::reference::ADAM_EPS_SMALL).ok);
    }
}
