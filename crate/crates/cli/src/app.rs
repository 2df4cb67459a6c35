//! Command-line parsing and dispatch.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scalekit_core::accounting::{
    inference_flops_per_token, train_flops_total, FlopCount, FlopMode, ModelShape, TokenBudget,
    DEFAULT_SEQ_LEN, GPT2_VOCAB,
};
use scalekit_core::parameterization::{
    activation_scale_probe, lr_at, mup_plan, sp_plan, DecayKind, LRSchedule, MuPBase,
};
use scalekit_core::planner::{pareto_frontier, plan_from_budget, suggest_shape, PlanningError};
use scalekit_core::scaling::{fit_power_law, loss_degradation, LossPoint, PowerLawFit};
use scalekit_core::stability::{adam_epsilon_ok, cast_fraction_zeroed, CastMode, FloatFormatSpec};
use scalekit_core::EvalRecord;
use thiserror::Error;

use crate::numfmt::{fmt6, parse_count, parse_real};
use crate::report;
use crate::svg::{emit_svg_plot, PlotSeries, SeriesStyle};
use crate::bundled;

/// Exit status for malformed or out-of-domain input.
pub const EXIT_INPUT: u8 = 2;
/// Exit status for well-formed queries with no answer.
pub const EXIT_INFEASIBLE: u8 = 3;

const FIT_CURVE_POINTS: usize = 64;
const PROBE_BASE_LAYERS: u64 = 2;

/// Scaling-law planning toolkit.
#[derive(Debug, Parser)]
#[command(name = "scalekit", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count parameters of a decoder-only transformer.
    Params(ShapeArgs),
    /// Count training or inference FLOPs.
    Flops(FlopsArgs),
    /// Fit L(f) = (f/a)^b + c to (FLOPs, loss) records.
    Fit(FitArgs),
    /// Evaluate a power law at a FLOP budget.
    Predict(PredictArgs),
    /// Loss degradation when training at `tau` tokens per parameter.
    Degrade(DegradeArgs),
    /// Compute-optimal plan for a FLOP budget.
    Plan(PlanArgs),
    /// Suggest a shape for a target parameter count.
    Shape(ShapeQueryArgs),
    /// Training + inference cost frontier.
    Tradeoff(TradeoffArgs),
    /// Derive layer-wise μP hyperparameters.
    Mup(MupArgs),
    /// Learning rate at a point in training.
    Schedule(ScheduleArgs),
    /// Measure hidden activation scale across widths.
    Probe(ProbeArgs),
    /// Mixed-precision numerics checks.
    #[command(subcommand)]
    Stability(StabilityCommand),
}

fn count_arg(s: &str) -> Result<u64, String> {
    parse_count(s)
        .and_then(|v| u64::try_from(v).ok())
        .ok_or_else(|| format!("`{s}` is not a non-negative integer"))
}

fn real_arg(s: &str) -> Result<f64, String> {
    parse_real(s).ok_or_else(|| format!("`{s}` is not a finite number"))
}

#[derive(Debug, Args)]
struct ShapeArgs {
    /// Hidden width.
    #[arg(long, value_parser = count_arg)]
    d_model: u64,
    /// Number of decoder blocks.
    #[arg(long, value_parser = count_arg)]
    layers: u64,
    /// Per-head size.
    #[arg(long, value_parser = count_arg)]
    d_head: u64,
    /// Feed-forward width [default: 4 * d_model].
    #[arg(long, value_parser = count_arg)]
    d_ffn: Option<u64>,
    /// Vocabulary size.
    #[arg(long, default_value_t = GPT2_VOCAB, value_parser = count_arg)]
    vocab: u64,
    /// Context length.
    #[arg(long, default_value_t = DEFAULT_SEQ_LEN, value_parser = count_arg)]
    seq: u64,
}

impl ShapeArgs {
    fn shape(&self) -> Result<ModelShape, CliError> {
        let d_ffn = self.d_ffn.unwrap_or(4 * self.d_model);
        ModelShape::new(self.d_model, self.layers, self.d_head, d_ffn, self.vocab, self.seq)
            .map_err(|e| CliError::Input(e.to_string()))
    }
}

#[derive(Debug, Args)]
struct FlopsArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Tokens processed.
    #[arg(long, value_parser = count_arg)]
    tokens: u64,
    /// Count inference (forward only, per token) instead of training.
    #[arg(long)]
    inference: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Record file, `bundled`, or `bundled:NAME`.
    #[arg(long)]
    records: String,
    /// Only fit records of this family.
    #[arg(long)]
    family: Option<String>,
    /// Write a log-log plot here.
    #[arg(long)]
    out_svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long, default_value_t = PowerLawFit::PUBLISHED.a, value_parser = real_arg)]
    a: f64,
    #[arg(long, default_value_t = PowerLawFit::PUBLISHED.b, value_parser = real_arg, allow_negative_numbers = true)]
    b: f64,
    #[arg(long, default_value_t = PowerLawFit::PUBLISHED.c, value_parser = real_arg, allow_negative_numbers = true)]
    c: f64,
    /// Training FLOPs.
    #[arg(long, value_parser = real_arg)]
    flops: f64,
}

#[derive(Debug, Args)]
struct DegradeArgs {
    /// Tokens per parameter.
    #[arg(long, value_parser = real_arg)]
    tau: f64,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Training FLOP budget.
    #[arg(long, value_parser = real_arg)]
    budget_flops: f64,
}

#[derive(Debug, Args)]
struct ShapeQueryArgs {
    /// Target parameter count.
    #[arg(long, value_parser = count_arg)]
    params: u64,
}

#[derive(Debug, Args)]
struct TradeoffArgs {
    /// Record file, `bundled`, or `bundled:NAME`.
    #[arg(long)]
    records: String,
    /// Expected lifetime inference tokens.
    #[arg(long, value_parser = count_arg)]
    infer_tokens: u64,
    /// Write a log-log plot here.
    #[arg(long)]
    out_svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MupArgs {
    #[arg(long, value_parser = count_arg)]
    d_model: u64,
    #[arg(long, value_parser = count_arg)]
    layers: u64,
    #[arg(long, value_parser = count_arg)]
    d_head: u64,
    /// Proxy model width the base values were tuned at.
    #[arg(long, default_value_t = MuPBase::TUNED.d_model_base, value_parser = count_arg)]
    base_width: u64,
    #[arg(long, default_value_t = MuPBase::TUNED.eta_base, value_parser = real_arg)]
    base_lr: f64,
    #[arg(long, default_value_t = MuPBase::TUNED.sigma_base, value_parser = real_arg)]
    base_std: f64,
    #[arg(long, default_value_t = MuPBase::TUNED.m_emb, value_parser = real_arg)]
    m_emb: f64,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long, value_parser = real_arg)]
    max_lr: f64,
    #[arg(long, default_value = "375e6", value_parser = count_arg)]
    warmup_tokens: u64,
    #[arg(long, value_parser = count_arg)]
    total_tokens: u64,
    /// `linear` or `cosine`.
    #[arg(long)]
    decay: DecayKind,
    /// Tokens seen; omit for an 11-point table.
    #[arg(long, value_parser = count_arg)]
    at: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParamKind {
    Sp,
    Mup,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[arg(long, value_enum)]
    param: ParamKind,
    /// Comma-separated widths.
    #[arg(long, value_delimiter = ',', default_value = "256,1024,4096", value_parser = count_arg)]
    widths: Vec<u64>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum StabilityCommand {
    /// Fraction of values that underflow to zero when cast.
    Cast(CastArgs),
    /// Check Adam's epsilon against the velocity scale.
    AdamEps(AdamEpsArgs),
}

#[derive(Debug, Args)]
struct CastArgs {
    /// `fp16`, `bf16` or `fp32`.
    #[arg(long)]
    format: FloatFormatSpec,
    /// File of numbers separated by whitespace or commas.
    #[arg(long)]
    values: PathBuf,
    /// Flush subnormal results to zero.
    #[arg(long)]
    flush_to_zero: bool,
}

#[derive(Debug, Args)]
struct AdamEpsArgs {
    /// Mean of Adam's second-moment state.
    #[arg(long, value_parser = real_arg)]
    mu_v: f64,
    #[arg(long, value_parser = real_arg)]
    eps: f64,
}

/// Failures surfaced as exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input, exit code 2.
    #[error("{0}")]
    Input(String),
    /// No answer exists, exit code 3.
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    /// Process exit status.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let records = bundled::resolve(&args.records).map_err(input)?;
    let selected: Vec<&EvalRecord> = records
        .iter()
        .filter(|r| args.family.as_ref().is_none_or(|f| &r.family == f))
        .filter(|r| r.pile_xent.is_some())
        .collect();
    let labelled: Vec<(String, LossPoint)> = selected
        .iter()
        .map(|r| {
            (
                format!("{} {}", r.family, r.label),
                LossPoint::new(r.train_flops, r.pile_xent.expect("filtered")),
            )
        })
        .collect();
    let points: Vec<LossPoint> = labelled.iter().map(|(_, p)| *p).collect();
    let fit = fit_power_law(&points).map_err(input)?;
    let mut out = report::fit_report(&fit, &labelled);
    if let Some(path) = &args.out_svg {
        let lo = points.iter().map(|p| p.flops).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.flops).fold(0.0, f64::max);
        let curve = log_space(lo, hi, FIT_CURVE_POINTS)
            .into_iter()
            .map(|f| (f, fit.predict(f)))
            .collect();
        let series = [
            PlotSeries {
                name: args.family.clone().unwrap_or_else(|| "records".into()),
                points: points.iter().map(|p| (p.flops, p.loss)).collect(),
                style: SeriesStyle::Scatter,
                log_x: true,
                log_y: true,
            },
            PlotSeries {
                name: "fit".into(),
                points: curve,
                style: SeriesStyle::Line,
                log_x: true,
                log_y: true,
            },
        ];
        let svg = emit_svg_plot(&series, "pre-training FLOPs", "Pile test loss (nats/token)").map_err(input)?;
        write_file(path, &svg)?;
        let _ = writeln!(out, "svg: {}", path.display());
    }
    Ok(out)
}

fn cmd_tradeoff(args: &TradeoffArgs) -> Result<String, CliError> {
    let records = bundled::resolve(&args.records).map_err(input)?;
    let (with_loss, without): (Vec<EvalRecord>, Vec<EvalRecord>) =
        records.into_iter().partition(|r| r.pile_xent.is_some());
    let n = args.infer_tokens as u128;
    let frontier = pareto_frontier(&with_loss, n).map_err(input)?;
    let mut out = report::frontier_report(&frontier, n, without.len());
    if let Some(path) = &args.out_svg {
        let mut by_family: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &with_loss {
            let q = r
                .cost_query(n)
                .ok_or_else(|| input(format!("invalid train_flops for {} {}", r.family, r.label)))?;
            let total = scalekit_core::planner::total_cost(&q).as_f64();
            by_family
                .entry(&r.family)
                .or_default()
                .push((total, r.pile_xent.expect("partitioned")));
        }
        let mut series: Vec<PlotSeries> = by_family
            .into_iter()
            .map(|(name, points)| PlotSeries {
                name: name.to_string(),
                points,
                style: SeriesStyle::Scatter,
                log_x: true,
                log_y: true,
            })
            .collect();
        if !frontier.is_empty() {
            series.push(PlotSeries {
                name: "frontier".into(),
                points: frontier.iter().map(|p| (p.total_cost.as_f64(), p.loss)).collect(),
                style: SeriesStyle::Line,
                log_x: true,
                log_y: true,
            });
        }
        let svg = emit_svg_plot(&series, "pre-training + inference FLOPs", "Pile test loss (nats/token)")
            .map_err(input)?;
        write_file(path, &svg)?;
        let _ = writeln!(out, "svg: {}", path.display());
    }
    Ok(out)
}

fn planning(e: PlanningError) -> CliError {
    CliError::Infeasible(e.to_string())
}

fn cmd_schedule(args: &ScheduleArgs) -> Result<String, CliError> {
    let s = LRSchedule::new(args.max_lr, args.warmup_tokens, args.total_tokens, args.decay)
        .map_err(input)?;
    let mut out = String::from("# learning-rate schedule\n");
    let _ = writeln!(out, "max_lr: {}", fmt6(s.max_lr()));
    let _ = writeln!(out, "warmup_tokens: {}", s.warmup_tokens());
    let _ = writeln!(out, "total_tokens: {}", s.total_tokens());
    let _ = writeln!(out, "decay: {}", s.decay());
    let _ = writeln!(out, "floor_fraction: {}", fmt6(s.floor_fraction()));
    match args.at {
        Some(t) => {
            let lr = lr_at(&s, t).map_err(input)?;
            let _ = writeln!(out, "tokens_seen: {t}");
            let _ = writeln!(out, "lr: {}", fmt6(lr));
        }
        None => {
            let rows = (0..=10u64)
                .map(|i| {
                    let t = (s.total_tokens() as u128 * i as u128 / 10) as u64;
                    let lr = lr_at(&s, t).map_err(input)?;
                    Ok(vec![t.to_string(), fmt6(lr)])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            out.push_str(&report::table(&["tokens_seen", "lr"], &rows));
        }
    }
    Ok(out)
}

fn cmd_probe(args: &ProbeArgs) -> Result<String, CliError> {
    if args.samples == 0 {
        return Err(input("--samples must be positive"));
    }
    if args.widths.is_empty() || args.widths.contains(&0) {
        return Err(input("--widths must be positive"));
    }
    let base = MuPBase::TUNED;
    let shape = ModelShape::gpt(base.d_model_base, PROBE_BASE_LAYERS, 64).map_err(input)?;
    let (plan, name) = match args.param {
        ParamKind::Sp => (sp_plan(&shape, base.eta_base).map_err(input)?, "sp"),
        ParamKind::Mup => (mup_plan(&shape, &base).map_err(input)?, "mup"),
    };
    let rows = activation_scale_probe(&plan, &args.widths, args.samples, args.seed);
    Ok(report::probe_report(name, args.samples, args.seed, &rows))
}

fn cmd_cast(args: &CastArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&args.values)
        .map_err(|e| input(format!("cannot read {}: {e}", args.values.display())))?;
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_real(t).ok_or_else(|| input(format!("`{t}` is not a finite number"))))
        .collect::<Result<Vec<f64>, _>>()?;
    let mode = if args.flush_to_zero {
        CastMode::FlushToZero
    } else {
        CastMode::Subnormal
    };
    let fraction = cast_fraction_zeroed(&values, &args.format, mode).map_err(input)?;
    let nonzero = values.iter().filter(|v| **v != 0.0).count();
    let overflowed = values
        .iter()
        .filter(|v| args.format.cast(**v, mode).is_infinite())
        .count();
    let mut out = String::from("# cast underflow check\n");
    let _ = writeln!(out, "format: {}", args.format);
    let _ = writeln!(out, "mode: {}", if args.flush_to_zero { "flush-to-zero" } else { "subnormal" });
    let _ = writeln!(out, "min_subnormal: {}", fmt6(args.format.min_subnormal()));
    let _ = writeln!(out, "min_normal: {}", fmt6(args.format.min_normal()));
    let _ = writeln!(out, "values: {}", values.len());
    let _ = writeln!(out, "nonzero: {nonzero}");
    let _ = writeln!(out, "zeroed: {}", (fraction * nonzero as f64).round() as usize);
    let _ = writeln!(out, "overflowed: {overflowed}");
    let _ = writeln!(out, "fraction_zeroed: {}", fmt6(fraction));
    Ok(out)
}

fn run_command(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Params(a) => Ok(report::params_report(&a.shape()?)),
        Command::Flops(a) => {
            let shape = a.shape.shape()?;
            let tokens = TokenBudget(a.tokens);
            let (mode, total) = if a.inference {
                let per = inference_flops_per_token(&shape);
                (FlopMode::Inference, FlopCount(per.0 * a.tokens as u128))
            } else {
                (FlopMode::Train, train_flops_total(&shape, tokens))
            };
            Ok(report::flops_report(&shape, tokens, mode, total))
        }
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => {
            if a.flops <= 0.0 || a.a <= 0.0 {
                return Err(input("--flops and --a must be positive"));
            }
            let fit = PowerLawFit { a: a.a, b: a.b, c: a.c };
            let mut out = String::from("# power-law prediction\n");
            let _ = writeln!(out, "a: {}", fmt6(fit.a));
            let _ = writeln!(out, "b: {}", fmt6(fit.b));
            let _ = writeln!(out, "c: {}", fmt6(fit.c));
            let _ = writeln!(out, "flops: {}", fmt6(a.flops));
            let _ = writeln!(out, "loss: {}", fmt6(fit.predict(a.flops)));
            Ok(out)
        }
        Command::Degrade(a) => {
            if a.tau <= 0.0 {
                return Err(input("--tau must be positive"));
            }
            let d = loss_degradation(a.tau);
            let mut out = String::from("# loss degradation vs 20 tokens per parameter\n");
            let _ = writeln!(out, "tau: {}", fmt6(a.tau));
            let _ = writeln!(out, "degradation: {}", fmt6(d));
            let _ = writeln!(out, "degradation_pct: {}", fmt6(100.0 * d));
            Ok(out)
        }
        Command::Plan(a) => {
            let budget = FlopCount::from_f64(a.budget_flops)
                .filter(|_| a.budget_flops > 0.0)
                .ok_or_else(|| input("--budget-flops must be positive"))?;
            let plan = plan_from_budget(budget).map_err(planning)?;
            Ok(report::emit_plan(&plan))
        }
        Command::Shape(a) => {
            let shape = suggest_shape(a.params as u128).map_err(planning)?;
            let mut out = report::params_report(&shape);
            out = out.replacen("# parameter count", "# suggested shape", 1);
            let _ = writeln!(out, "target_params: {}", a.params);
            Ok(out)
        }
        Command::Tradeoff(a) => cmd_tradeoff(a),
        Command::Mup(a) => {
            let shape = ModelShape::gpt(a.d_model, a.layers, a.d_head).map_err(input)?;
            if a.base_width == 0 || a.base_lr <= 0.0 || a.base_std <= 0.0 {
                return Err(input("base width, lr and std must be positive"));
            }
            let base = MuPBase {
                d_model_base: a.base_width,
                eta_base: a.base_lr,
                sigma_base: a.base_std,
                m_emb: a.m_emb,
            };
            Ok(report::layer_plan_report(&mup_plan(&shape, &base).map_err(input)?))
        }
        Command::Schedule(a) => cmd_schedule(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Stability(StabilityCommand::Cast(a)) => cmd_cast(a),
        Command::Stability(StabilityCommand::AdamEps(a)) => {
            if a.mu_v < 0.0 {
                return Err(input("--mu-v must be non-negative"));
            }
            let check = adam_epsilon_ok(a.mu_v, a.eps);
            let mut out = String::from("# adam epsilon check\n");
            let _ = writeln!(out, "mu_v: {}", fmt6(a.mu_v));
            let _ = writeln!(out, "eps: {}", fmt6(a.eps));
            let _ = writeln!(out, "threshold: {}", fmt6(check.threshold));
            let _ = writeln!(out, "ok: {}", check.ok);
            Ok(out)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing the report to `out`.
pub fn run<I, T>(args: I, out: &mut impl Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(input)?;
    let text = run_command(&cli.command)?;
    out.write_all(text.as_bytes())
        .map_err(|e| input(format!("cannot write output: {e}")))
}

/// Binary entry point.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run_command(&cli.command) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(EXIT_INPUT);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
