//! Compute-optimal training plans and training+inference cost frontiers.
//!
//! Shape search covers `d_model` in multiples of 64 from 256 to 16384 with
//! `n_layers` within ±25% of `round(d_model / 80)`, plus the published
//! Cerebras-GPT shapes (the two largest follow GPT-3 rather than the ~80
//! aspect ratio).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::accounting::{
    chinchilla_tokens, count_params, inference_flops_per_token, train_flops_total, FlopCount,
    ModelShape, TokenBudget, TOKENS_PER_PARAM,
};
use crate::parameterization::DecayKind;
use crate::reference::{BatchRamp, PublishedModel, SP_MODELS};

/// Target aspect ratio `d_model / n_layers`.
pub const TARGET_ASPECT: f64 = 80.0;
/// Smallest `d_model` on the search grid.
pub const GRID_MIN_D_MODEL: u64 = 256;
/// Largest `d_model` on the search grid.
pub const GRID_MAX_D_MODEL: u64 = 16384;
/// `d_model` grid spacing.
pub const GRID_D_MODEL_STEP: u64 = 64;
/// Allowed relative deviation of `n_layers` from `round(d_model / 80)`.
pub const GRID_LAYER_SPREAD: f64 = 0.25;
/// Allowed relative deviation of a suggested shape's parameter count.
pub const PARAM_TOLERANCE: f64 = 0.10;
/// Smallest accepted `suggest_shape` target.
pub const MIN_TARGET_PARAMS: u128 = 1_000_000;
/// Head sizes tried, largest first.
pub const HEAD_SIZES: [u64; 3] = [128, 80, 64];
/// Fallback inference cost per token per parameter for records without a shape.
pub const FALLBACK_INFER_FLOPS_PER_PARAM: u128 = 2;

/// Planning failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanningError {
    /// No grid shape lands within [`PARAM_TOLERANCE`] of the target.
    #[error("no shape within 10% of {0} parameters")]
    Unsatisfiable(u128),
    /// The budget cannot train even the smallest grid shape.
    #[error("budget of {budget} FLOPs is below the smallest plan ({minimum} FLOPs)")]
    BudgetTooSmall {
        /// Requested budget.
        budget: FlopCount,
        /// Cost of the cheapest plan.
        minimum: FlopCount,
    },
}

/// Frontier failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontierError {
    /// A record has no Pile loss.
    #[error("record {family} {label} has no pile_xent")]
    MissingLoss {
        /// Record family.
        family: String,
        /// Record label.
        label: String,
    },
    /// A record's training FLOPs are not a finite non-negative number.
    #[error("record {family} {label} has invalid train_flops")]
    InvalidFlops {
        /// Record family.
        family: String,
        /// Record label.
        label: String,
    },
}

fn round_half_away(x: f64) -> u64 {
    libm::round(x) as u64
}

fn largest_head(d_model: u64) -> u64 {
    HEAD_SIZES
        .into_iter()
        .find(|h| d_model.is_multiple_of(*h))
        .unwrap_or(GRID_D_MODEL_STEP)
}

/// Every shape the planner considers: the aspect-ratio grid plus the
/// published shapes. A published shape replaces the grid entry with the same
/// `(d_model, n_layers)`.
pub fn shape_grid() -> Vec<ModelShape> {
    let mut by_dims: BTreeMap<(u64, u64), ModelShape> = BTreeMap::new();
    let mut d = GRID_MIN_D_MODEL;
    while d <= GRID_MAX_D_MODEL {
        let center = round_half_away(d as f64 / TARGET_ASPECT);
        let lo = round_half_away(center as f64 * (1.0 - GRID_LAYER_SPREAD)).max(1);
        let hi = round_half_away(center as f64 * (1.0 + GRID_LAYER_SPREAD)).max(1);
        for layers in lo..=hi {
            let shape = ModelShape::gpt(d, layers, largest_head(d)).expect("grid shapes are valid");
            by_dims.insert((d, layers), shape);
        }
        d += GRID_D_MODEL_STEP;
    }
    for m in &SP_MODELS {
        by_dims.insert((m.d_model, m.n_layers), m.shape());
    }
    by_dims.into_values().collect()
}

fn within_tolerance(params: u128, target: u128) -> bool {
    let diff = params.abs_diff(target) as f64;
    diff <= PARAM_TOLERANCE * target as f64
}

/// Picks a shape for roughly `target_params` parameters.
///
/// A published shape within 10% of the target is returned as is (closest
/// count wins). Otherwise the grid shape within 10% whose aspect ratio is
/// nearest 80 is chosen; ties go to the smaller `d_model`, then the larger
/// head size, then fewer layers.
pub fn suggest_shape(target_params: u128) -> Result<ModelShape, PlanningError> {
    if target_params < MIN_TARGET_PARAMS {
        return Err(PlanningError::Unsatisfiable(target_params));
    }
    let published = SP_MODELS
        .iter()
        .map(|m| m.shape())
        .filter(|s| within_tolerance(count_params(s), target_params))
        .min_by_key(|s| count_params(s).abs_diff(target_params));
    if let Some(shape) = published {
        return Ok(shape);
    }

    shape_grid()
        .into_iter()
        .filter(|s| within_tolerance(count_params(s), target_params))
        .min_by(|x, y| {
            let dx = (x.aspect_ratio() - TARGET_ASPECT).abs();
            let dy = (y.aspect_ratio() - TARGET_ASPECT).abs();
            dx.total_cmp(&dy)
                .then(x.d_model().cmp(&y.d_model()))
                .then(y.d_head().cmp(&x.d_head()))
                .then(x.n_layers().cmp(&y.n_layers()))
        })
        .ok_or(PlanningError::Unsatisfiable(target_params))
}

/// A compute-optimal training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    /// Model shape.
    pub shape: ModelShape,
    /// Parameter count.
    pub params: u128,
    /// Training tokens (20 per parameter).
    pub tokens: TokenBudget,
    /// Training FLOPs.
    pub train_flops: FlopCount,
    /// Final batch size in tokens.
    pub batch_size_tokens: u64,
    /// Peak learning rate.
    pub base_lr: f64,
    /// Learning-rate decay shape.
    pub decay_type: DecayKind,
    /// Published configuration the hyperparameters were taken from.
    pub reference_label: &'static str,
    /// Batch-size ramp of that configuration, if any.
    pub batch_ramp: Option<BatchRamp>,
}

/// Published configuration nearest in log-parameter distance.
pub fn nearest_published(params: u128) -> &'static PublishedModel {
    let lp = libm::log(params.max(1) as f64);
    SP_MODELS
        .iter()
        .min_by(|a, b| {
            let da = (libm::log(count_params(&a.shape()) as f64) - lp).abs();
            let db = (libm::log(count_params(&b.shape()) as f64) - lp).abs();
            da.total_cmp(&db)
        })
        .expect("SP_MODELS is not empty")
}

fn plan_for(shape: ModelShape) -> TrainingPlan {
    let params = count_params(&shape);
    let tokens = chinchilla_tokens(params, TOKENS_PER_PARAM);
    let reference = nearest_published(params);
    TrainingPlan {
        shape,
        params,
        tokens,
        train_flops: train_flops_total(&shape, tokens),
        batch_size_tokens: reference.batch_tokens(),
        base_lr: reference.lr,
        decay_type: reference.decay,
        reference_label: reference.label,
        batch_ramp: reference.ramp,
    }
}

/// The most expensive grid plan whose 20-tokens-per-parameter training cost
/// fits in `budget`. Ties prefer more parameters, then smaller `d_model`.
pub fn plan_from_budget(budget: FlopCount) -> Result<TrainingPlan, PlanningError> {
    let mut best: Option<TrainingPlan> = None;
    let mut cheapest = FlopCount(u128::MAX);
    for shape in shape_grid() {
        let plan = plan_for(shape);
        cheapest = cheapest.min(plan.train_flops);
        if plan.train_flops > budget {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => plan
                .train_flops
                .cmp(&b.train_flops)
                .then(plan.params.cmp(&b.params))
                .then(b.shape.d_model().cmp(&plan.shape.d_model()))
                == Ordering::Greater,
        };
        if better {
            best = Some(plan);
        }
    }
    best.ok_or(PlanningError::BudgetTooSmall {
        budget,
        minimum: cheapest,
    })
}

/// Inputs to the total-cost metric `F = train + n_infer * per_token`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostQuery {
    /// Expected inference tokens.
    pub n_infer_tokens: u128,
    /// Inference FLOPs per token.
    pub per_token_infer_flops: FlopCount,
    /// Total pre-training FLOPs.
    pub train_flops: FlopCount,
}

/// Pre-training FLOPs plus lifetime inference FLOPs.
pub fn total_cost(query: &CostQuery) -> FlopCount {
    query.train_flops + query.per_token_infer_flops * query.n_infer_tokens
}

/// Smallest inference volume at which the two plans' total costs meet or
/// swap order, i.e. the ceiling of the `n` solving
/// `train_a + n·i_a = train_b + n·i_b`. `None` when the costs never meet at a
/// non-negative `n`. The queries' own `n_infer_tokens` are ignored.
pub fn crossover_inference_tokens(a: &CostQuery, b: &CostQuery) -> Option<u128> {
    let dt = b.train_flops.0 as i128 - a.train_flops.0 as i128;
    let di = a.per_token_infer_flops.0 as i128 - b.per_token_infer_flops.0 as i128;
    if dt == 0 {
        return Some(0);
    }
    if di == 0 || (dt > 0) != (di > 0) {
        return None;
    }
    let (num, den) = (dt.unsigned_abs(), di.unsigned_abs());
    Some(num.div_ceil(den))
}

/// One model's published evaluation results.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    /// Model family, e.g. `Pythia`.
    pub family: String,
    /// Size label within the family, e.g. `12B`.
    pub label: String,
    /// Parameter count.
    pub params: u128,
    /// Pre-training FLOPs.
    pub train_flops: f64,
    /// Pile test cross-entropy, nats/token.
    pub pile_xent: Option<f64>,
    /// Pre-training tokens.
    pub tokens: Option<u64>,
    /// Zero-shot accuracies keyed by task.
    pub downstream: BTreeMap<String, f64>,
    /// Architecture, when known.
    pub shape: Option<ModelShape>,
    /// Trained on the deduplicated Pile.
    pub pile_dedup: bool,
}

impl EvalRecord {
    /// Inference FLOPs per token: exact for records with a shape, otherwise
    /// `2 * params`.
    pub fn infer_flops_per_token(&self) -> FlopCount {
        match &self.shape {
            Some(shape) => inference_flops_per_token(shape),
            None => FlopCount(FALLBACK_INFER_FLOPS_PER_PARAM * self.params),
        }
    }

    /// Cost query for `n_infer_tokens` inference tokens.
    pub fn cost_query(&self, n_infer_tokens: u128) -> Option<CostQuery> {
        Some(CostQuery {
            n_infer_tokens,
            per_token_infer_flops: self.infer_flops_per_token(),
            train_flops: FlopCount::from_f64(self.train_flops)?,
        })
    }

    /// Tokens per parameter, when tokens are known.
    pub fn tokens_per_param(&self) -> Option<f64> {
        self.tokens.map(|t| t as f64 / self.params as f64)
    }
}

/// A record on the cost/loss frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint<'a> {
    /// The record.
    pub record: &'a EvalRecord,
    /// Training plus inference FLOPs.
    pub total_cost: FlopCount,
    /// Pile loss.
    pub loss: f64,
}

/// Records not dominated in (total cost, Pile loss), by ascending cost.
///
/// A record is dominated when another costs no more and has no higher loss.
/// Exact ties keep the record that sorts first by family then label.
pub fn pareto_frontier(
    records: &[EvalRecord],
    n_infer_tokens: u128,
) -> Result<Vec<FrontierPoint<'_>>, FrontierError> {
    let mut points = Vec::with_capacity(records.len());
    for r in records {
        let loss = r.pile_xent.ok_or_else(|| FrontierError::MissingLoss {
            family: r.family.clone(),
            label: r.label.clone(),
        })?;
        let query = r
            .cost_query(n_infer_tokens)
            .ok_or_else(|| FrontierError::InvalidFlops {
                family: r.family.clone(),
                label: r.label.clone(),
            })?;
        points.push(FrontierPoint {
            record: r,
            total_cost: total_cost(&query),
            loss,
        });
    }
    points.sort_by(|a, b| {
        a.total_cost
            .cmp(&b.total_cost)
            .then(a.loss.total_cmp(&b.loss))
            .then(a.record.family.cmp(&b.record.family))
            .then(a.record.label.cmp(&b.record.label))
    });
    let mut best = f64::INFINITY;
    let mut frontier = Vec::new();
    for p in points {
        if p.loss < best {
            best = p.loss;
            frontier.push(p);
        }
    }
    Ok(frontier)
}
