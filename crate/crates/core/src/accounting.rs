//! Parameter counting and algorithmic FLOPs for GPT-style decoders.
//!
//! The FLOPs model counts forward matmuls, the attention score and
//! score-times-value products, softmax, layer norms (7 FLOPs/activation) and
//! GeLU (20 FLOPs/activation). Training is three forward passes minus the
//! embedding terms, which never propagate a delta backwards. Recomputation
//! and activation checkpointing are not counted.

use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Mul};

use thiserror::Error;

/// GPT-2 BPE vocabulary size.
pub const GPT2_VOCAB: u64 = 50257;
/// Maximum sequence length used for every published model.
pub const DEFAULT_SEQ_LEN: u64 = 2048;
/// Compute-optimal tokens per parameter.
pub const TOKENS_PER_PARAM: f64 = 20.0;

const LAYER_NORM_FLOPS_PER_ACTIVATION: u128 = 7;
const GELU_FLOPS_PER_ACTIVATION: u128 = 20;

/// Rejected [`ModelShape`] dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ShapeError {
    /// A dimension that must be positive was zero.
    #[error("{0} must be positive")]
    Zero(&'static str),
    /// `d_model` is not a multiple of `d_head`.
    #[error("d_model {d_model} is not divisible by d_head {d_head}")]
    HeadMismatch {
        /// Hidden width.
        d_model: u64,
        /// Per-head key size.
        d_head: u64,
    },
}

/// Architectural dimensions of a decoder-only transformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelShape {
    d_model: u64,
    n_layers: u64,
    d_head: u64,
    d_ffn: u64,
    vocab_size: u64,
    seq_len: u64,
}

impl ModelShape {
    /// Validates and builds a shape.
    pub fn new(
        d_model: u64,
        n_layers: u64,
        d_head: u64,
        d_ffn: u64,
        vocab_size: u64,
        seq_len: u64,
    ) -> Result<Self, ShapeError> {
        for (v, name) in [
            (d_model, "d_model"),
            (d_head, "d_head"),
            (d_ffn, "d_ffn"),
            (vocab_size, "vocab_size"),
            (seq_len, "seq_len"),
        ] {
            if v == 0 {
                return Err(ShapeError::Zero(name));
            }
        }
        if !d_model.is_multiple_of(d_head) {
            return Err(ShapeError::HeadMismatch { d_model, d_head });
        }
        Ok(Self {
            d_model,
            n_layers,
            d_head,
            d_ffn,
            vocab_size,
            seq_len,
        })
    }

    /// GPT-2 vocabulary, 2048-token context and `d_ffn = 4 * d_model`.
    pub fn gpt(d_model: u64, n_layers: u64, d_head: u64) -> Result<Self, ShapeError> {
        Self::new(
            d_model,
            n_layers,
            d_head,
            4 * d_model,
            GPT2_VOCAB,
            DEFAULT_SEQ_LEN,
        )
    }

    /// Hidden width.
    pub fn d_model(&self) -> u64 {
        self.d_model
    }
    /// Number of decoder blocks.
    pub fn n_layers(&self) -> u64 {
        self.n_layers
    }
    /// Per-head key size.
    pub fn d_head(&self) -> u64 {
        self.d_head
    }
    /// Feed-forward width.
    pub fn d_ffn(&self) -> u64 {
        self.d_ffn
    }
    /// Vocabulary size.
    pub fn vocab_size(&self) -> u64 {
        self.vocab_size
    }
    /// Context length in tokens.
    pub fn seq_len(&self) -> u64 {
        self.seq_len
    }
    /// `d_model / d_head`.
    pub fn num_heads(&self) -> u64 {
        self.d_model / self.d_head
    }
    /// `d_model / n_layers`, infinite for zero layers.
    pub fn aspect_ratio(&self) -> f64 {
        self.d_model as f64 / self.n_layers as f64
    }

    /// Same shape with a different number of layers.
    pub fn with_layers(mut self, n_layers: u64) -> Self {
        self.n_layers = n_layers;
        self
    }

    /// Same shape with a different context length.
    pub fn with_seq_len(mut self, seq_len: u64) -> Result<Self, ShapeError> {
        if seq_len == 0 {
            return Err(ShapeError::Zero("seq_len"));
        }
        self.seq_len = seq_len;
        Ok(self)
    }
}

/// An exact count of floating-point operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlopCount(pub u128);

impl FlopCount {
    /// Zero FLOPs.
    pub const ZERO: Self = Self(0);

    /// The raw count.
    pub fn get(self) -> u128 {
        self.0
    }

    /// Lossy conversion for reporting and plotting.
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Nearest integer count to a non-negative finite real, `None` otherwise.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || value < 0.0 || value >= u128::MAX as f64 {
            return None;
        }
        Some(Self(libm::round(value) as u128))
    }
}

impl Add for FlopCount {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl AddAssign for FlopCount {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Mul<u128> for FlopCount {
    type Output = Self;
    fn mul(self, rhs: u128) -> Self {
        Self(self.0 * rhs)
    }
}

impl Sum for FlopCount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl fmt::Display for FlopCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A number of training tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenBudget(pub u64);

impl TokenBudget {
    /// The raw count.
    pub fn get(self) -> u64 {
        self.0
    }
}

/// Whether to count a training step or a forward pass only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlopMode {
    /// Forward, backward and weight-gradient passes.
    Train,
    /// Forward pass only.
    Inference,
}

/// Exact parameter count: embeddings (token + learned position), per-layer
/// layer norms, attention and FFN weights with biases, and a final layer norm.
/// Output logits share the token embedding.
pub fn count_params(shape: &ModelShape) -> u128 {
    let d = shape.d_model as u128;
    let embedding = shape.vocab_size as u128 * d + d * shape.seq_len as u128;
    let ln1 = 2 * d;
    let attn = 4 * (d * d + d);
    let ln2 = 2 * d;
    let ffn = 8 * d * d + 5 * d;
    let encoder = shape.n_layers as u128 * (ln1 + attn + ln2 + ffn);
    let final_ln = 2 * d;
    embedding + encoder + final_ln
}

/// The individual terms of a forward pass over one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardTerms {
    /// Token embedding lookup, counted as a dense matmul.
    pub embeddings: u128,
    /// Position embedding addition.
    pub position_embeddings: u128,
    /// Q, K and V projections.
    pub kqv_proj: u128,
    /// `QK^T` logits.
    pub kq_logits: u128,
    /// Softmax over the logits.
    pub softmax: u128,
    /// Softmax reduction over queries.
    pub softmax_q_reduction: u128,
    /// Attention output projection.
    pub final_linear: u128,
    /// `softmax(QK^T) V`.
    pub softmax_v_dot: u128,
    /// The two FFN matmuls.
    pub dense_blocks: u128,
    /// Unembedding.
    pub final_logits: u128,
    /// Two layer norms per block.
    pub layer_norms: u128,
    /// GeLU on the 4x-wide FFN hidden activations.
    pub gelu: u128,
}

impl ForwardTerms {
    /// Term-by-term forward FLOPs for `shape`.
    pub fn of(shape: &ModelShape) -> Self {
        let layers = shape.n_layers as u128;
        let seq = shape.seq_len as u128;
        let d = shape.d_model as u128;
        let vocab = shape.vocab_size as u128;
        // key_size * num_heads; equals d_model given the divisibility invariant.
        let attn_width = shape.d_head as u128 * shape.num_heads() as u128;
        let seq_sq = seq * seq;

        Self {
            embeddings: 2 * seq * vocab * d,
            position_embeddings: 2 * d * seq,
            kqv_proj: layers * 2 * 3 * seq * d * attn_width,
            kq_logits: layers * 2 * seq_sq * attn_width,
            softmax: layers * 3 * attn_width * seq_sq,
            softmax_q_reduction: layers * seq_sq * attn_width,
            final_linear: layers * 2 * seq * attn_width * d,
            softmax_v_dot: layers * 2 * seq_sq * attn_width,
            dense_blocks: layers * 16 * seq * d * d,
            final_logits: 2 * seq * d * vocab,
            layer_norms: layers * 2 * LAYER_NORM_FLOPS_PER_ACTIVATION * seq * d,
            gelu: layers * GELU_FLOPS_PER_ACTIVATION * 4 * seq * d,
        }
    }

    /// All attention-block terms.
    pub fn attention(&self) -> u128 {
        self.kqv_proj
            + self.kq_logits
            + self.softmax
            + self.softmax_q_reduction
            + self.softmax_v_dot
            + self.final_linear
    }

    /// Total forward FLOPs.
    pub fn total(&self) -> u128 {
        self.embeddings
            + self.position_embeddings
            + self.layer_norms
            + self.attention()
            + self.dense_blocks
            + self.final_logits
            + self.gelu
    }
}

/// FLOPs to process one full sequence.
pub fn flops_per_sequence(shape: &ModelShape, mode: FlopMode) -> FlopCount {
    let terms = ForwardTerms::of(shape);
    let forward = terms.total();
    match mode {
        FlopMode::Inference => FlopCount(forward),
        FlopMode::Train => {
            FlopCount(3 * forward - terms.embeddings - terms.position_embeddings)
        }
    }
}

/// Whole sequences needed for `tokens`, rounding half up.
pub fn sequences_for(tokens: TokenBudget, seq_len: u64) -> u128 {
    let tokens = tokens.0 as u128;
    let seq = seq_len as u128;
    (2 * tokens + seq) / (2 * seq)
}

/// Training FLOPs for `tokens` tokens.
pub fn train_flops_total(shape: &ModelShape, tokens: TokenBudget) -> FlopCount {
    flops_per_sequence(shape, FlopMode::Train) * sequences_for(tokens, shape.seq_len)
}

/// Inference FLOPs per token at full context, floor-divided.
pub fn inference_flops_per_token(shape: &ModelShape) -> FlopCount {
    FlopCount(flops_per_sequence(shape, FlopMode::Inference).0 / shape.seq_len as u128)
}

/// `round(ratio * params)` tokens.
///
/// Non-positive or non-finite ratios yield zero tokens.
pub fn chinchilla_tokens(params: u128, ratio: f64) -> TokenBudget {
    let tokens = ratio * params as f64;
    if !tokens.is_finite() || tokens <= 0.0 {
        return TokenBudget(0);
    }
    TokenBudget(libm::round(tokens) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: u64, l: u64, h: u64) -> ModelShape {
        ModelShape::gpt(d, l, h).unwrap()
    }

    #[test]
    fn published_param_counts() {
        assert_eq!(count_params(&shape(768, 10, 64)), 111_050_496);
        assert_eq!(count_params(&shape(5120, 40, 128)), 12_853_386_240);
    }

    #[test]
    fn zero_layer_params() {
        let s = ModelShape::new(2, 0, 2, 8, 4, 3).unwrap();
        assert_eq!(count_params(&s), 18);
    }

    #[test]
    fn shape_validation() {
        assert_eq!(
            ModelShape::gpt(100, 2, 64),
            Err(ShapeError::HeadMismatch {
                d_model: 100,
                d_head: 64
            })
        );
        assert_eq!(ModelShape::gpt(0, 2, 64), Err(ShapeError::Zero("d_model")));
        assert!(ModelShape::gpt(64, 0, 64).is_ok());
    }

    #[test]
    fn train_is_three_forwards_minus_embeddings() {
        let s = shape(1536, 18, 128);
        let t = ForwardTerms::of(&s);
        let train = flops_per_sequence(&s, FlopMode::Train).0;
        let inf = flops_per_sequence(&s, FlopMode::Inference).0;
        assert_eq!(train, 3 * inf - t.embeddings - t.position_embeddings);
        assert!(train >= inf);
    }

    #[test]
    fn zero_tokens_zero_flops() {
        assert_eq!(train_flops_total(&shape(768, 10, 64), TokenBudget(0)), FlopCount::ZERO);
    }

    #[test]
    fn sequence_rounding_is_half_up() {
        assert_eq!(sequences_for(TokenBudget(1023), 2048), 0);
        assert_eq!(sequences_for(TokenBudget(1024), 2048), 1);
        assert_eq!(sequences_for(TokenBudget(3071), 2048), 1);
        assert_eq!(sequences_for(TokenBudget(3072), 2048), 2);
        // odd context: 1.5 sequences rounds up
        assert_eq!(sequences_for(TokenBudget(3), 2), 2);
        assert_eq!(sequences_for(TokenBudget(4), 3), 1);
    }

    #[test]
    fn chinchilla_budget() {
        assert_eq!(chinchilla_tokens(111_050_496, 20.0), TokenBudget(2_221_009_920));
        assert_eq!(chinchilla_tokens(2, 0.5), TokenBudget(1));
        assert_eq!(chinchilla_tokens(12_853_386_240, 20.0), TokenBudget(257_067_724_800));
        assert_eq!(chinchilla_tokens(10, -1.0), TokenBudget(0));
    }

    #[test]
    fn longer_context_costs_more_per_token() {
        let s = shape(2048, 24, 128);
        let long = s.with_seq_len(4096).unwrap();
        assert!(inference_flops_per_token(&long) > inference_flops_per_token(&s));
    }

    #[test]
    fn flop_count_arithmetic() {
        let a = FlopCount(10u128.pow(29));
        assert_eq!((a * 10).get(), 10u128.pow(30));
        assert_eq!([a, a].into_iter().sum::<FlopCount>(), FlopCount(2 * 10u128.pow(29)));
        assert_eq!(FlopCount::from_f64(1e22), Some(FlopCount(10u128.pow(22))));
        assert_eq!(FlopCount::from_f64(-1.0), None);
    }
}
