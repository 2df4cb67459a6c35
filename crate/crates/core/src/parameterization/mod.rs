//! Standard (SP) and maximal-update (μP) parameterizations.
//!
//! A [`LayerPlan`] lists, for every layer class of a GPT decoder, the
//! initializer, learning rate and activation multiplier. Under μP every
//! width-dependent quantity is derived from `m_width = d_model / d_model_base`:
//! hidden-matrix init variances and learning rates are divided by `m_width`,
//! output logits are multiplied by `1 / m_width`, the embedding output by
//! `m_emb`, and attention logits are scaled by `1 / d_head`.

mod probe;
mod schedule;

pub use probe::{activation_scale_probe, ProbeRow, PROBE_ROWS_PER_SAMPLE};
pub use schedule::{lr_at, DecayKind, LRSchedule, ScheduleError, DEFAULT_FLOOR_FRACTION};

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::accounting::ModelShape;

/// SP initializer standard deviation.
pub const SP_INIT_STD: f64 = 0.02;

/// Errors deriving a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanError {
    /// Residual-output scaling is undefined without layers.
    #[error("n_layers must be at least 1")]
    ZeroLayers,
}

/// Errors rescaling a learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BatchError {
    /// A batch size was zero.
    #[error("batch sizes must be positive")]
    ZeroBatch,
}

/// The transferable μP hyperparameters tuned on a proxy model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuPBase {
    /// Proxy model width.
    pub d_model_base: u64,
    /// Base (peak) learning rate.
    pub eta_base: f64,
    /// Base initializer standard deviation.
    pub sigma_base: f64,
    /// Embedding output multiplier.
    pub m_emb: f64,
}

impl MuPBase {
    /// Values tuned on the 40M-parameter, width-256 proxy.
    pub const TUNED: Self = Self {
        d_model_base: 256,
        eta_base: 6e-3,
        sigma_base: 0.08,
        m_emb: 10.0,
    };

    /// `d_model / d_model_base`.
    pub fn width_multiplier(&self, d_model: u64) -> f64 {
        d_model as f64 / self.d_model_base as f64
    }
}

impl Default for MuPBase {
    fn default() -> Self {
        Self::TUNED
    }
}

/// Which parameterization produced a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parameterization {
    /// Standard parameterization with a single global learning rate.
    Sp {
        /// Global learning rate.
        lr: f64,
    },
    /// Maximal update parameterization.
    Mup(MuPBase),
}

/// Layer classes that receive distinct hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LayerClass {
    /// Combined token + position embedding.
    Embedding,
    /// Layer-norm gain.
    LnGain,
    /// Layer-norm bias.
    LnBias,
    /// Linear-layer biases.
    Bias,
    /// Query/key/value projection.
    Qkv,
    /// Attention output projection (last layer of the attention residual).
    AttnOutput,
    /// First FFN matrix.
    Ffn1,
    /// Second FFN matrix (last layer of the FFN residual).
    Ffn2,
    /// Unembedding; weights are tied to [`LayerClass::Embedding`].
    OutputLogits,
}

impl LayerClass {
    /// Every class, in serialization order.
    pub const ALL: [LayerClass; 9] = [
        LayerClass::Embedding,
        LayerClass::LnGain,
        LayerClass::LnBias,
        LayerClass::Bias,
        LayerClass::Qkv,
        LayerClass::AttnOutput,
        LayerClass::Ffn1,
        LayerClass::Ffn2,
        LayerClass::OutputLogits,
    ];

    /// Stable snake_case key.
    pub fn key(self) -> &'static str {
        match self {
            LayerClass::Embedding => "embedding",
            LayerClass::LnGain => "ln_gain",
            LayerClass::LnBias => "ln_bias",
            LayerClass::Bias => "bias",
            LayerClass::Qkv => "qkv",
            LayerClass::AttnOutput => "attn_output",
            LayerClass::Ffn1 => "ffn1",
            LayerClass::Ffn2 => "ffn2",
            LayerClass::OutputLogits => "output_logits",
        }
    }

    /// Inverse of [`LayerClass::key`].
    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.key() == key)
    }

    /// Matrices whose learning rate and init variance scale with width under μP.
    pub fn is_width_scaled(self) -> bool {
        matches!(
            self,
            LayerClass::Qkv | LayerClass::AttnOutput | LayerClass::Ffn1 | LayerClass::Ffn2
        )
    }

    /// Last layer inside a residual branch.
    pub fn is_residual_output(self) -> bool {
        matches!(self, LayerClass::AttnOutput | LayerClass::Ffn2)
    }
}

impl fmt::Display for LayerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Hyperparameters for one layer class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    /// Initializer mean (1 for layer-norm gains, 0 otherwise).
    pub init_mean: f64,
    /// Initializer standard deviation; zero for constant initializers.
    pub init_std: f64,
    /// Peak learning rate.
    pub lr: f64,
    /// Multiplier applied to the layer's output activation.
    pub activation_multiplier: f64,
}

/// Complete layer-wise hyperparameters for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    /// How the plan was derived.
    pub parameterization: Parameterization,
    /// Shape the plan was derived for.
    pub shape: ModelShape,
    /// `d_model / d_model_base` under μP; 1 under SP.
    pub m_width: f64,
    /// Scale applied to `QK^T` before the softmax.
    pub attention_logit_scale: f64,
    layers: [LayerSpec; 9],
}

impl LayerPlan {
    /// Spec for one class.
    pub fn get(&self, class: LayerClass) -> &LayerSpec {
        &self.layers[class as usize]
    }

    /// All `(class, spec)` pairs in [`LayerClass::ALL`] order.
    pub fn iter(&self) -> impl Iterator<Item = (LayerClass, &LayerSpec)> {
        LayerClass::ALL.into_iter().zip(self.layers.iter())
    }

    /// Assembles a plan from explicit parts, e.g. when deserializing.
    pub fn from_parts(
        parameterization: Parameterization,
        shape: ModelShape,
        m_width: f64,
        attention_logit_scale: f64,
        layers: [LayerSpec; 9],
    ) -> Self {
        Self {
            parameterization,
            shape,
            m_width,
            attention_logit_scale,
            layers,
        }
    }

    /// Standard deviation of the hidden (ffn1) initializer this plan's
    /// parameterization would assign at `d_model = width`.
    pub fn hidden_init_std_at(&self, width: u64) -> f64 {
        match self.parameterization {
            Parameterization::Sp { .. } => self.get(LayerClass::Ffn1).init_std,
            Parameterization::Mup(base) => {
                libm::sqrt(base.sigma_base * base.sigma_base / base.width_multiplier(width))
            }
        }
    }
}

fn constant(mean: f64, lr: f64) -> LayerSpec {
    LayerSpec {
        init_mean: mean,
        init_std: 0.0,
        lr,
        activation_multiplier: 1.0,
    }
}

fn normal(std: f64, lr: f64, multiplier: f64) -> LayerSpec {
    LayerSpec {
        init_mean: 0.0,
        init_std: std,
        lr,
        activation_multiplier: multiplier,
    }
}

/// Standard parameterization: σ = 0.02 everywhere except residual outputs
/// (σ / √(2·n_layers)), one global learning rate, `1/√d_head` attention.
pub fn sp_plan(shape: &ModelShape, lr: f64) -> Result<LayerPlan, PlanError> {
    if shape.n_layers() == 0 {
        return Err(PlanError::ZeroLayers);
    }
    let residual_std = SP_INIT_STD / libm::sqrt(2.0 * shape.n_layers() as f64);
    let layers = LayerClass::ALL.map(|class| match class {
        LayerClass::LnGain => constant(1.0, lr),
        LayerClass::LnBias | LayerClass::Bias => constant(0.0, lr),
        c if c.is_residual_output() => normal(residual_std, lr, 1.0),
        _ => normal(SP_INIT_STD, lr, 1.0),
    });
    Ok(LayerPlan {
        parameterization: Parameterization::Sp { lr },
        shape: *shape,
        m_width: 1.0,
        attention_logit_scale: 1.0 / libm::sqrt(shape.d_head() as f64),
        layers,
    })
}

/// Maximal update parameterization relative to `base`.
pub fn mup_plan(shape: &ModelShape, base: &MuPBase) -> Result<LayerPlan, PlanError> {
    if shape.n_layers() == 0 {
        return Err(PlanError::ZeroLayers);
    }
    let m_width = base.width_multiplier(shape.d_model());
    let var = base.sigma_base * base.sigma_base;
    let hidden_std = libm::sqrt(var / m_width);
    let residual_std = libm::sqrt(var / (2.0 * m_width * shape.n_layers() as f64));
    let eta = base.eta_base;
    let eta_hidden = eta / m_width;

    let layers = LayerClass::ALL.map(|class| match class {
        LayerClass::Embedding => normal(base.sigma_base, eta, base.m_emb),
        LayerClass::LnGain => constant(1.0, eta),
        LayerClass::LnBias | LayerClass::Bias => constant(0.0, eta),
        LayerClass::Qkv | LayerClass::Ffn1 => normal(hidden_std, eta_hidden, 1.0),
        LayerClass::AttnOutput | LayerClass::Ffn2 => normal(residual_std, eta_hidden, 1.0),
        // tied to the embedding weights
        LayerClass::OutputLogits => normal(base.sigma_base, eta, 1.0 / m_width),
    });
    Ok(LayerPlan {
        parameterization: Parameterization::Mup(*base),
        shape: *shape,
        m_width,
        attention_logit_scale: 1.0 / shape.d_head() as f64,
        layers,
    })
}

/// Reuses one set of base hyperparameters at every target width.
pub fn mu_transfer(base: &MuPBase, targets: &[ModelShape]) -> Result<Vec<LayerPlan>, PlanError> {
    targets.iter().map(|s| mup_plan(s, base)).collect()
}

/// Scales a learning rate linearly with batch size.
pub fn scale_lr_for_batch(lr: f64, batch_ref: u64, batch_new: u64) -> Result<f64, BatchError> {
    if batch_ref == 0 || batch_new == 0 {
        return Err(BatchError::ZeroBatch);
    }
    Ok(lr * batch_new as f64 / batch_ref as f64)
}
