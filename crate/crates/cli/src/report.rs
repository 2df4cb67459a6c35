//! Deterministic plain-text reports.
//!
//! Reports list `key: value` lines followed by space-aligned tables. Reals use
//! six significant figures; exact integer quantities print in full.

use std::fmt::Write as _;

use scalekit_core::accounting::{count_params, flops_per_sequence, ForwardTerms};
use scalekit_core::parameterization::{ProbeRow, Parameterization};
use scalekit_core::planner::FrontierPoint;
use scalekit_core::reference::{BatchRamp, SP_MODELS, WARMUP_TOKENS};
use scalekit_core::scaling::{relative_gap, LossPoint, PowerLawFit};
use scalekit_core::{
    FlopCount, FlopMode, LayerPlan, ModelShape, TokenBudget, TrainingPlan,
};
use thiserror::Error;

use crate::numfmt::fmt6;

/// Right-aligns every column except the first, which is left-aligned.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut parts = Vec::with_capacity(cols);
        for (i, cell) in cells.iter().enumerate() {
            if i == 0 {
                parts.push(format!("{:<w$}", cell, w = width[0]));
            } else {
                parts.push(format!("{:>w$}", cell, w = width[i]));
            }
        }
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

fn shape_lines(out: &mut String, shape: &ModelShape) {
    let _ = writeln!(out, "d_model: {}", shape.d_model());
    let _ = writeln!(out, "n_layers: {}", shape.n_layers());
    let _ = writeln!(out, "d_head: {}", shape.d_head());
    let _ = writeln!(out, "d_ffn: {}", shape.d_ffn());
    let _ = writeln!(out, "vocab_size: {}", shape.vocab_size());
    let _ = writeln!(out, "seq_len: {}", shape.seq_len());
}

/// Parameter count report.
pub fn params_report(shape: &ModelShape) -> String {
    let mut out = String::from("# parameter count\n");
    shape_lines(&mut out, shape);
    let params = count_params(shape);
    let embedding = (shape.vocab_size() as u128 + shape.seq_len() as u128) * shape.d_model() as u128;
    let _ = writeln!(out, "aspect_ratio: {}", fmt6(shape.aspect_ratio()));
    let _ = writeln!(out, "embedding_params: {embedding}");
    let _ = writeln!(out, "non_embedding_params: {}", params - embedding);
    let _ = writeln!(out, "params: {params}");
    let _ = writeln!(out, "params_sci: {}", fmt6(params as f64));
    out
}

/// FLOPs report for a training run or an inference workload.
pub fn flops_report(shape: &ModelShape, tokens: TokenBudget, mode: FlopMode, total: FlopCount) -> String {
    let mut out = String::from("# flops\n");
    shape_lines(&mut out, shape);
    let mode_name = match mode {
        FlopMode::Train => "train",
        FlopMode::Inference => "inference",
    };
    let terms = ForwardTerms::of(shape);
    let _ = writeln!(out, "mode: {mode_name}");
    let _ = writeln!(out, "tokens: {}", tokens.0);
    let _ = writeln!(out, "forward_flops_per_sequence: {}", terms.total());
    let _ = writeln!(out, "attention_flops_per_sequence: {}", terms.attention());
    let _ = writeln!(out, "flops_per_sequence: {}", flops_per_sequence(shape, mode));
    let _ = writeln!(out, "total_flops: {total}");
    let _ = writeln!(out, "total_flops_sci: {}", fmt6(total.as_f64()));
    out
}

/// Power-law fit with per-point residuals.
pub fn fit_report(fit: &PowerLawFit, points: &[(String, LossPoint)]) -> String {
    let mut out = String::from("# power-law fit L(f) = (f/a)^b + c\n");
    let _ = writeln!(out, "points: {}", points.len());
    let _ = writeln!(out, "a: {}", fmt6(fit.a));
    let _ = writeln!(out, "b: {}", fmt6(fit.b));
    let _ = writeln!(out, "c: {}", fmt6(fit.c));
    let max_err = points
        .iter()
        .map(|(_, p)| relative_gap(fit, p).abs())
        .fold(0.0, f64::max);
    let _ = writeln!(out, "max_abs_rel_err_pct: {}", fmt6(max_err));
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|(label, p)| {
            let pred = fit.predict(p.flops);
            vec![
                label.clone(),
                fmt6(p.flops),
                fmt6(p.loss),
                fmt6(pred),
                fmt6(p.loss - pred),
                fmt6(relative_gap(fit, p)),
            ]
        })
        .collect();
    out.push_str(&table(
        &["record", "flops", "observed", "predicted", "residual", "rel_err_pct"],
        &rows,
    ));
    out
}

/// Cost/loss frontier. Always states the member count, including `0 records`.
pub fn frontier_report(frontier: &[FrontierPoint<'_>], n_infer_tokens: u128, skipped: usize) -> String {
    let mut out = String::from("# training + inference cost frontier\n");
    let _ = writeln!(out, "infer_tokens: {n_infer_tokens}");
    if skipped > 0 {
        let _ = writeln!(out, "skipped_without_loss: {skipped}");
    }
    let _ = writeln!(out, "{} records", frontier.len());
    if frontier.is_empty() {
        return out;
    }
    let rows: Vec<Vec<String>> = frontier
        .iter()
        .map(|p| {
            vec![
                p.record.family.clone(),
                p.record.label.clone(),
                fmt6(p.record.train_flops),
                fmt6(p.record.infer_flops_per_token().as_f64()),
                fmt6(p.total_cost.as_f64()),
                fmt6(p.loss),
            ]
        })
        .collect();
    out.push_str(&table(
        &["family", "label", "train_flops", "infer_flops_per_token", "total_flops", "pile_xent"],
        &rows,
    ));
    out
}

/// Layer-wise hyperparameter table.
pub fn layer_plan_report(plan: &LayerPlan) -> String {
    let mut out = String::new();
    match plan.parameterization {
        Parameterization::Sp { lr } => {
            let _ = writeln!(out, "# standard parameterization");
            let _ = writeln!(out, "lr: {}", fmt6(lr));
        }
        Parameterization::Mup(base) => {
            let _ = writeln!(out, "# maximal update parameterization");
            let _ = writeln!(out, "base_width: {}", base.d_model_base);
            let _ = writeln!(out, "base_lr: {}", fmt6(base.eta_base));
            let _ = writeln!(out, "base_std: {}", fmt6(base.sigma_base));
            let _ = writeln!(out, "m_emb: {}", fmt6(base.m_emb));
        }
    }
    shape_lines(&mut out, &plan.shape);
    let _ = writeln!(out, "m_width: {}", fmt6(plan.m_width));
    let _ = writeln!(out, "attention_logit_scale: {}", fmt6(plan.attention_logit_scale));
    let rows: Vec<Vec<String>> = plan
        .iter()
        .map(|(class, spec)| {
            vec![
                class.key().to_string(),
                fmt6(spec.init_mean),
                fmt6(spec.init_std),
                fmt6(spec.lr),
                fmt6(spec.activation_multiplier),
            ]
        })
        .collect();
    out.push_str(&table(
        &["layer", "init_mean", "init_std", "lr", "multiplier"],
        &rows,
    ));
    out
}

/// Activation probe results.
pub fn probe_report(param: &str, samples: usize, seed: u64, rows: &[ProbeRow]) -> String {
    let mut out = String::from("# activation scale probe\n");
    let _ = writeln!(out, "parameterization: {param}");
    let _ = writeln!(out, "samples: {samples}");
    let _ = writeln!(out, "seed: {seed}");
    let base = rows.first().map(|r| r.rms);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.width.to_string(),
                fmt6(r.init_std),
                fmt6(r.rms),
                fmt6(base.map_or(1.0, |b| r.rms / b)),
            ]
        })
        .collect();
    out.push_str(&table(&["width", "init_std", "rms", "rms_vs_first"], &body));
    out
}

/// Key-value serialization of a [`TrainingPlan`]. Integers print exactly and
/// reals in shortest round-trip form, so [`parse_plan`] recovers the plan.
pub fn emit_plan(plan: &TrainingPlan) -> String {
    let mut out = String::from("# training plan\n");
    shape_lines(&mut out, &plan.shape);
    let _ = writeln!(out, "params: {}", plan.params);
    let _ = writeln!(out, "tokens: {}", plan.tokens.0);
    let _ = writeln!(out, "tokens_per_param: {}", fmt6(plan.tokens.0 as f64 / plan.params as f64));
    let _ = writeln!(out, "train_flops: {}", plan.train_flops);
    let _ = writeln!(out, "train_flops_sci: {}", fmt6(plan.train_flops.as_f64()));
    let _ = writeln!(out, "batch_size_tokens: {}", plan.batch_size_tokens);
    let _ = writeln!(out, "base_lr: {:e}", plan.base_lr);
    let _ = writeln!(out, "decay_type: {}", plan.decay_type);
    let _ = writeln!(out, "warmup_tokens: {WARMUP_TOKENS}");
    let _ = writeln!(out, "reference: {}", plan.reference_label);
    if let Some(r) = plan.batch_ramp {
        let _ = writeln!(out, "ramp_initial_batch_seqs: {}", r.initial_batch_seqs);
        let _ = writeln!(out, "ramp_switch_after_tokens: {}", r.switch_after_tokens);
    }
    out
}

/// Failure to read a plan back.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanParseError {
    /// A required key is absent.
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    /// A value failed to parse.
    #[error("bad value for `{0}`")]
    BadValue(&'static str),
}

/// Reads the output of [`emit_plan`]. Derived lines are ignored.
pub fn parse_plan(text: &str) -> Result<TrainingPlan, PlanParseError> {
    let get = |key: &'static str| -> Result<&str, PlanParseError> {
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .find_map(|l| l.split_once(": ").filter(|(k, _)| *k == key).map(|(_, v)| v.trim()))
            .ok_or(PlanParseError::MissingKey(key))
    };
    fn num<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<T, PlanParseError> {
        v.parse().map_err(|_| PlanParseError::BadValue(key))
    }
    let dim = |key: &'static str| get(key).and_then(|v| num::<u64>(key, v));
    let shape = ModelShape::new(
        dim("d_model")?,
        dim("n_layers")?,
        dim("d_head")?,
        dim("d_ffn")?,
        dim("vocab_size")?,
        dim("seq_len")?,
    )
    .map_err(|_| PlanParseError::BadValue("d_model"))?;
    let reference = get("reference")?;
    let reference_label = SP_MODELS
        .iter()
        .find(|m| m.label == reference)
        .map(|m| m.label)
        .ok_or(PlanParseError::BadValue("reference"))?;
    let batch_ramp = match (get("ramp_initial_batch_seqs"), get("ramp_switch_after_tokens")) {
        (Ok(a), Ok(b)) => Some(BatchRamp {
            initial_batch_seqs: num("ramp_initial_batch_seqs", a)?,
            switch_after_tokens: num("ramp_switch_after_tokens", b)?,
        }),
        _ => None,
    };
    Ok(TrainingPlan {
        shape,
        params: num("params", get("params")?)?,
        tokens: TokenBudget(num("tokens", get("tokens")?)?),
        train_flops: FlopCount(num("train_flops", get("train_flops")?)?),
        batch_size_tokens: num("batch_size_tokens", get("batch_size_tokens")?)?,
        base_lr: num("base_lr", get("base_lr")?)?,
        decay_type: get("decay_type")?
            .parse()
            .map_err(|_| PlanParseError::BadValue("decay_type"))?,
        reference_label,
        batch_ramp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use scalekit_core::planner::plan_from_budget;

    #[test]
    fn table_alignment() {
        let t = table(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    bb\nxyz   1\n");
    }

    #[test]
    fn plan_round_trip() {
        for budget in [2.6e18, 2.3e22] {
            let plan = plan_from_budget(FlopCount::from_f64(budget).unwrap()).unwrap();
            let text = emit_plan(&plan);
            assert!(text.ends_with('\n'));
            assert_eq!(parse_plan(&text), Ok(plan));
        }
    }

    #[test]
    fn empty_frontier_says_zero() {
        let r = frontier_report(&[], 0, 0);
        assert!(r.lines().any(|l| l == "0 records"));
    }
}
