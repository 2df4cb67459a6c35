use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Learning rate at the end of training as a fraction of the peak.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.1;

/// Post-warmup decay shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecayKind {
    /// Straight line from peak to floor.
    Linear,
    /// Half cosine from peak to floor.
    Cosine,
}

impl DecayKind {
    /// Lower-case name.
    pub fn name(self) -> &'static str {
        match self {
            DecayKind::Linear => "linear",
            DecayKind::Cosine => "cosine",
        }
    }
}

impl fmt::Display for DecayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecayKind {
    type Err = ScheduleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(DecayKind::Linear),
            "cosine" => Ok(DecayKind::Cosine),
            _ => Err(ScheduleError::UnknownDecay),
        }
    }
}

/// Schedule construction and evaluation errors.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ScheduleError {
    /// Warmup must end before training does.
    #[error("warmup_tokens ({warmup}) must be less than total_tokens ({total})")]
    WarmupTooLong {
        /// Warmup length.
        warmup: u64,
        /// Total length.
        total: u64,
    },
    /// Floor outside `(0, 1]`.
    #[error("floor_fraction {0} is outside (0, 1]")]
    BadFloor(f64),
    /// Peak learning rate not positive.
    #[error("max_lr must be positive and finite")]
    BadMaxLr,
    /// Query past the end of training.
    #[error("tokens_seen {tokens_seen} is beyond total_tokens {total}")]
    OutOfRange {
        /// Requested position.
        tokens_seen: u64,
        /// Schedule length.
        total: u64,
    },
    /// Decay name not recognised.
    #[error("decay must be `linear` or `cosine`")]
    UnknownDecay,
}

/// Linear warmup followed by linear or cosine decay to a floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LRSchedule {
    max_lr: f64,
    warmup_tokens: u64,
    total_tokens: u64,
    decay: DecayKind,
    floor_fraction: f64,
}

impl LRSchedule {
    /// Schedule decaying to [`DEFAULT_FLOOR_FRACTION`] of the peak.
    pub fn new(
        max_lr: f64,
        warmup_tokens: u64,
        total_tokens: u64,
        decay: DecayKind,
    ) -> Result<Self, ScheduleError> {
        Self::with_floor(max_lr, warmup_tokens, total_tokens, decay, DEFAULT_FLOOR_FRACTION)
    }

    /// Schedule with an explicit floor fraction.
    pub fn with_floor(
        max_lr: f64,
        warmup_tokens: u64,
        total_tokens: u64,
        decay: DecayKind,
        floor_fraction: f64,
    ) -> Result<Self, ScheduleError> {
        if !(max_lr.is_finite() && max_lr > 0.0) {
            return Err(ScheduleError::BadMaxLr);
        }
        if warmup_tokens >= total_tokens {
            return Err(ScheduleError::WarmupTooLong {
                warmup: warmup_tokens,
                total: total_tokens,
            });
        }
        if !(floor_fraction > 0.0 && floor_fraction <= 1.0) {
            return Err(ScheduleError::BadFloor(floor_fraction));
        }
        Ok(Self {
            max_lr,
            warmup_tokens,
            total_tokens,
            decay,
            floor_fraction,
        })
    }

    /// Peak learning rate.
    pub fn max_lr(&self) -> f64 {
        self.max_lr
    }
    /// Warmup length in tokens.
    pub fn warmup_tokens(&self) -> u64 {
        self.warmup_tokens
    }
    /// Schedule length in tokens.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
    /// Decay shape.
    pub fn decay(&self) -> DecayKind {
        self.decay
    }
    /// Final learning rate as a fraction of the peak.
    pub fn floor_fraction(&self) -> f64 {
        self.floor_fraction
    }
}

/// Learning rate after `tokens_seen` tokens.
pub fn lr_at(schedule: &LRSchedule, tokens_seen: u64) -> Result<f64, ScheduleError> {
    let s = schedule;
    if tokens_seen > s.total_tokens {
        return Err(ScheduleError::OutOfRange {
            tokens_seen,
            total: s.total_tokens,
        });
    }
    if tokens_seen < s.warmup_tokens {
        return Ok(s.max_lr * tokens_seen as f64 / s.warmup_tokens as f64);
    }
    if tokens_seen == s.total_tokens {
        return Ok(s.floor_fraction * s.max_lr);
    }
    let t = (tokens_seen - s.warmup_tokens) as f64 / (s.total_tokens - s.warmup_tokens) as f64;
    let floor = s.floor_fraction;
    let fraction = match s.decay {
        DecayKind::Linear => 1.0 - (1.0 - floor) * t,
        DecayKind::Cosine => floor + (1.0 - floor) * (1.0 + libm::cos(PI * t)) / 2.0,
    };
    Ok(s.max_lr * fraction)
}
