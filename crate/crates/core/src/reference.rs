//! Published Cerebras-GPT configurations.
//!
//! Batch sizes are stored in sequences of 2048 tokens. The 13B model ramps its
//! batch from 720 to 1080 sequences after 84B tokens; [`PublishedModel::batch_seqs`]
//! holds the final value and [`BatchRamp`] the first phase.

use crate::accounting::ModelShape;
use crate::parameterization::DecayKind;

/// The first phase of a two-phase batch-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchRamp {
    /// Batch size in sequences before the switch.
    pub initial_batch_seqs: u64,
    /// Tokens seen before switching to the final batch size.
    pub switch_after_tokens: u64,
}

/// One row of the published model table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedModel {
    /// Size label, e.g. `"1.3B"`.
    pub label: &'static str,
    /// Hidden width.
    pub d_model: u64,
    /// Decoder blocks.
    pub n_layers: u64,
    /// Head size.
    pub d_head: u64,
    /// Feed-forward width.
    pub d_ffn: u64,
    /// Total training tokens as published, in billions.
    pub tokens_billions: f64,
    /// Final batch size in sequences.
    pub batch_seqs: u64,
    /// Peak learning rate.
    pub lr: f64,
    /// Learning-rate decay shape.
    pub decay: DecayKind,
    /// Trained with μP.
    pub mup: bool,
    /// Earlier, smaller batch phase, if any.
    pub ramp: Option<BatchRamp>,
}

impl PublishedModel {
    /// The model's shape with GPT-2 vocabulary and 2048 context.
    pub fn shape(&self) -> ModelShape {
        ModelShape::new(
            self.d_model,
            self.n_layers,
            self.d_head,
            self.d_ffn,
            crate::accounting::GPT2_VOCAB,
            crate::accounting::DEFAULT_SEQ_LEN,
        )
        .expect("published shapes are valid")
    }

    /// Final batch size in tokens.
    pub fn batch_tokens(&self) -> u64 {
        self.batch_seqs * crate::accounting::DEFAULT_SEQ_LEN
    }
}

#[allow(clippy::too_many_arguments)]
const fn row(
    label: &'static str,
    d_model: u64,
    n_layers: u64,
    d_head: u64,
    tokens_billions: f64,
    batch_seqs: u64,
    lr: f64,
    decay: DecayKind,
    mup: bool,
) -> PublishedModel {
    PublishedModel {
        label,
        d_model,
        n_layers,
        d_head,
        d_ffn: 4 * d_model,
        tokens_billions,
        batch_seqs,
        lr,
        decay,
        mup,
        ramp: None,
    }
}

use DecayKind::{Cosine, Linear};

/// The seven standard-parameterization models, smallest first.
pub const SP_MODELS: [PublishedModel; 7] = [
    row("111M", 768, 10, 64, 2.2, 120, 6.0e-4, Linear, false),
    row("256M", 1088, 14, 64, 5.1, 264, 6.0e-4, Linear, false),
    row("590M", 1536, 18, 128, 11.8, 264, 2.0e-4, Linear, false),
    row("1.3B", 2048, 24, 128, 26.3, 528, 2.0e-4, Cosine, false),
    row("2.7B", 2560, 32, 80, 53.0, 528, 2.0e-4, Cosine, false),
    row("6.7B", 4096, 32, 128, 133.2, 1040, 1.2e-4, Linear, false),
    PublishedModel {
        ramp: Some(BatchRamp {
            initial_batch_seqs: 720,
            switch_after_tokens: 84_000_000_000,
        }),
        ..row("13B", 5120, 40, 128, 257.1, 1080, 1.2e-4, Cosine, false)
    },
];

/// The five μP models; all share the transferred base learning rate.
pub const MUP_MODELS: [PublishedModel; 5] = [
    row("111M", 768, 10, 64, 2.2, 120, 6.0e-3, Linear, true),
    row("256M", 1088, 14, 64, 5.1, 264, 6.0e-3, Linear, true),
    row("590M", 1536, 18, 128, 11.8, 264, 6.0e-3, Linear, true),
    row("1.3B", 2048, 24, 128, 26.3, 528, 6.0e-3, Linear, true),
    row("2.7B", 2560, 32, 80, 53.0, 528, 6.0e-3, Linear, true),
];

/// Published training FLOPs for [`SP_MODELS`], in the same order.
pub const SP_TRAIN_FLOPS: [f64; 7] = [2.6e18, 1.3e19, 6.1e19, 2.8e20, 1.1e21, 6.3e21, 2.3e22];

/// Published Pile test cross-entropy for [`SP_MODELS`], in the same order.
pub const SP_PILE_XENT: [f64; 7] = [2.608, 2.349, 2.181, 1.997, 1.834, 1.704, 1.572];

/// Published compute-optimal frontier `L(f) = (f/a)^b + c`.
pub const FRONTIER_A: f64 = 5.984e22;
/// Exponent of the published frontier.
pub const FRONTIER_B: f64 = -0.0737;
/// Irreducible loss of the published frontier.
pub const FRONTIER_C: f64 = 0.5066;

/// Adam epsilon used for the 111M–2.7B models.
pub const ADAM_EPS_SMALL: f64 = 1e-8;
/// Adam epsilon used for the 6.7B and 13B models.
pub const ADAM_EPS_LARGE: f64 = 1e-9;

/// Linear warmup length shared by every run.
pub const WARMUP_TOKENS: u64 = 375_000_000;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_shapes_use_4x_ffn() {
        for m in SP_MODELS.iter().chain(MUP_MODELS.iter()) {
            assert_eq!(m.d_ffn, 4 * m.d_model, "{}", m.label);
            assert_eq!(m.d_model % m.d_head, 0);
        }
    }

    #[test]
    fn batch_tokens_match_published_sizes() {
        let published = [246e3, 541e3, 541e3, 1.08e6, 1.08e6, 2.13e6, 2.21e6];
        for (m, want) in SP_MODELS.iter().zip(published) {
            let rel = (m.batch_tokens() as f64 - want).abs() / want;
            assert!(rel < 0.005, "{}: {}", m.label, m.batch_tokens());
        }
        let ramp = SP_MODELS[6].ramp.unwrap();
        assert_eq!(ramp.initial_batch_seqs * 2048, 1_474_560);
    }
}
