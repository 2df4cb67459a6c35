//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scalekit::bundled;
use scalekit::records::{emit_records, parse_records, RecordFile};
use scalekit_core::accounting::{chinchilla_tokens, count_params, train_flops_total, ModelShape};
use scalekit_core::parameterization::{
    activation_scale_probe, lr_at, mup_plan, sp_plan, DecayKind, LRSchedule, LayerClass, MuPBase,
};
use scalekit_core::planner::pareto_frontier;
use scalekit_core::reference::{MUP_MODELS, SP_MODELS, SP_TRAIN_FLOPS};
use scalekit_core::scaling::{
    fit_power_law, loss_degradation, predict_loss, relative_gap, LossPoint, PowerLawFit,
};
use scalekit_core::stability::{
    adam_epsilon_ok, cast_fraction_zeroed, loss_scale_step, CastMode, FloatFormatSpec,
    LossScaleState,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// "Total tokens" column of the architecture table, in billions, as printed.
const TABLE_TOKENS: [&str; 7] = ["2.2", "5.1", "11.8", "26.3", "53.0", "133.2", "257.1"];

const FLOPS_TOLERANCE: f64 = 0.10;
const FIT_B_RANGE: (f64, f64) = (-0.084, -0.064);
const FIT_POINT_TOLERANCE: f64 = 0.01;
const NEOX_FLOPS: f64 = 6.4e22;
const NEOX_LOSS: f64 = 1.519;
const NEOX_GAP_RANGE: (f64, f64) = (0.010, 0.014);
const EXTRAPOLATION_TOLERANCE: f64 = 0.01;
const PYTHIA_GAP_PCT: (f64, f64) = (0.1, 0.5);
const MUP_SHAPES: usize = 200;
const PROBE_SAMPLES: usize = 10_000;
const PROBE_WIDTHS: [u64; 3] = [256, 1024, 4096];
const MUP_RMS_SPREAD: f64 = 1.1;
const SP_RMS_RATIO: (f64, f64) = (3.5, 4.5);
const SYNTHETIC_SIG_FIGS: i32 = 4;
const LOSS_SCALE_STEPS: usize = 10_000;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sig_figs(s: &str) -> i32 {
    s.chars()
        .filter(char::is_ascii_digit)
        .skip_while(|c| *c == '0')
        .count() as i32
}

fn round_sig(x: f64, sig: i32) -> f64 {
    let scale = 10f64.powi(sig - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

fn cerebras_points() -> Vec<LossPoint> {
    let records = bundled::load("cerebras_gpt").expect("bundled data").records;
    records
        .iter()
        .filter(|r| r.family == "Cerebras-GPT")
        .map(|r| LossPoint::new(r.train_flops, r.pile_xent.expect("loss")))
        .collect()
}

fn criterion_1() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (m, printed) in SP_MODELS.iter().zip(TABLE_TOKENS) {
        let tokens_b = 20.0 * count_params(&m.shape()) as f64 / 1e9;
        let want: f64 = printed.parse().unwrap();
        // the table prints fewer than three figures for the two smallest rows
        let sig = sig_figs(printed).min(3);
        let matches = round_sig(tokens_b, sig) == round_sig(want, sig);
        ok &= matches;
        detail.push(format!("{}:{tokens_b:.3}B~{printed}B", m.label));
    }
    check(ok, detail.join(" "))
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (m, want) in SP_MODELS.iter().zip(SP_TRAIN_FLOPS) {
        let shape = m.shape();
        let tokens = chinchilla_tokens(count_params(&shape), 20.0);
        let got = train_flops_total(&shape, tokens).as_f64();
        let ratio = got / want;
        ok &= (ratio - 1.0).abs() <= FLOPS_TOLERANCE;
        detail.push(format!("{}:{ratio:.3}", m.label));
    }
    check(ok, format!("ratio to table {}", detail.join(" ")))
}

fn criterion_3() -> Outcome {
    let pts = cerebras_points();
    if pts.len() != 7 {
        return Err(format!("expected 7 points, found {}", pts.len()));
    }
    let fit = fit_power_law(&pts).map_err(|e| e.to_string())?;
    let b_ok = (FIT_B_RANGE.0..=FIT_B_RANGE.1).contains(&fit.b);
    let worst = pts
        .iter()
        .map(|p| (fit.predict(p.flops) - p.loss).abs() / p.loss)
        .fold(0.0, f64::max);
    let below = (NEOX_LOSS - fit.predict(NEOX_FLOPS)) / NEOX_LOSS;
    let gap_ok = (NEOX_GAP_RANGE.0..=NEOX_GAP_RANGE.1).contains(&below);
    check(
        b_ok && worst <= FIT_POINT_TOLERANCE && gap_ok,
        format!(
            "a={:.4e} b={:.5} c={:.4} max_err={:.3}% below_neox={:.2}%",
            fit.a,
            fit.b,
            fit.c,
            100.0 * worst,
            100.0 * below
        ),
    )
}

fn criterion_4() -> Outcome {
    let pts = cerebras_points();
    let fit = fit_power_law(&pts[..6]).map_err(|e| e.to_string())?;
    let pred = fit.predict(2.3e22);
    let err = (pred - 1.572).abs() / 1.572;
    check(
        err <= EXTRAPOLATION_TOLERANCE,
        format!(
            "fit on 6: b={:.5} c={:.4}; predicted {pred:.4} at 2.3e22, {:.2}% from 1.572",
            fit.b,
            fit.c,
            100.0 * err
        ),
    )
}

fn criterion_5() -> Outcome {
    let zero = loss_degradation(20.0) == 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut sym = true;
    for _ in 0..100 {
        let tau = rng.random_range(-4.0f64..10.0).exp();
        let a = loss_degradation(tau);
        let b = loss_degradation(400.0 / tau);
        // 400/tau is itself rounded; allow for its effect through the slope
        let slope = 0.023 * (20.0 / tau).ln().abs();
        let tol = 4.0 * f64::EPSILON * (a.max(b) + slope);
        sym &= (a - b).abs() <= tol;
        worst = worst.max((a - b).abs());
    }
    let records = bundled::load("pythia").expect("bundled data").records;
    let py = records
        .iter()
        .find(|r| r.family == "Pythia" && r.label == "12B")
        .expect("Pythia 12B");
    let gap = relative_gap(
        &PowerLawFit::PUBLISHED,
        &LossPoint::new(py.train_flops, py.pile_xent.unwrap()),
    );
    let gap_ok = (PYTHIA_GAP_PCT.0..=PYTHIA_GAP_PCT.1).contains(&gap);
    check(
        zero && sym && gap_ok,
        format!("D(20)==0:{zero} max_sym_diff={worst:.1e} pythia12B_gap={gap:.3}%"),
    )
}

fn criterion_6() -> Outcome {
    let base = MuPBase::TUNED;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let var = base.sigma_base * base.sigma_base;
    for i in 0..MUP_SHAPES {
        let head = if rng.random_bool(0.5) { 64 } else { 128 };
        let shape = ModelShape::gpt(head * rng.random_range(1..=128), rng.random_range(1..=96), head)
            .expect("valid shape");
        let plan = mup_plan(&shape, &base).map_err(|e| e.to_string())?;
        let m = shape.d_model() as f64 / base.d_model_base as f64;
        let l = shape.n_layers() as f64;
        let fail = |what: &str| Err(format!("shape {i} {shape:?}: {what}"));
        if plan.m_width != m {
            return fail("m_width");
        }
        for (class, spec) in plan.iter() {
            let lr = if class.is_width_scaled() { base.eta_base / m } else { base.eta_base };
            if spec.lr != lr {
                return fail(class.key());
            }
            let want_var = match class {
                LayerClass::Qkv | LayerClass::Ffn1 => Some(var / m),
                LayerClass::AttnOutput | LayerClass::Ffn2 => Some(var / (2.0 * m * l)),
                LayerClass::Embedding | LayerClass::OutputLogits => Some(var),
                _ => None,
            };
            if let Some(v) = want_var {
                if ((spec.init_std * spec.init_std) / v - 1.0).abs() > 1e-14 {
                    return fail(class.key());
                }
            }
        }
        let logits = plan.get(LayerClass::OutputLogits).activation_multiplier;
        if (logits * m - 1.0).abs() > 1e-15 {
            return fail("logits multiplier");
        }
        if plan.attention_logit_scale != 1.0 / shape.d_head() as f64 {
            return fail("attention scale");
        }
        if plan.get(LayerClass::Embedding).activation_multiplier != base.m_emb {
            return fail("embedding multiplier");
        }
    }
    for m in &MUP_MODELS {
        let plan = mup_plan(&m.shape(), &base).map_err(|e| e.to_string())?;
        if m.lr != 6.0e-3 || plan.get(LayerClass::Embedding).lr != 6.0e-3 {
            return Err(format!("{} base lr {}", m.label, m.lr));
        }
    }
    Ok(format!("{MUP_SHAPES} random shapes exact; {} muP rows at 6.0e-3", MUP_MODELS.len()))
}

fn criterion_7() -> Outcome {
    let base = MuPBase::TUNED;
    let proxy = ModelShape::gpt(base.d_model_base, 2, 64).unwrap();
    let mup = activation_scale_probe(&mup_plan(&proxy, &base).unwrap(), &PROBE_WIDTHS, PROBE_SAMPLES, 0);
    let sp = activation_scale_probe(&sp_plan(&proxy, base.eta_base).unwrap(), &PROBE_WIDTHS, PROBE_SAMPLES, 0);
    let hi = mup.iter().map(|r| r.rms).fold(0.0, f64::max);
    let lo = mup.iter().map(|r| r.rms).fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let ratio = sp[2].rms / sp[0].rms;
    check(
        spread <= MUP_RMS_SPREAD && (SP_RMS_RATIO.0..=SP_RMS_RATIO.1).contains(&ratio),
        format!("muP spread x{spread:.4}; SP 4096/256 ratio {ratio:.3}"),
    )
}

fn criterion_8() -> Outcome {
    let truth = PowerLawFit { a: 1e20, b: -0.1, c: 0.5 };
    let pts: Vec<LossPoint> = (0..10)
        .map(|i| {
            let f = 10f64.powf(18.0 + 5.0 * i as f64 / 9.0);
            LossPoint::new(f, predict_loss(&truth, f))
        })
        .collect();
    let got = fit_power_law(&pts).map_err(|e| e.to_string())?;
    let same = |x: f64, y: f64| round_sig(x, SYNTHETIC_SIG_FIGS) == round_sig(y, SYNTHETIC_SIG_FIGS);
    check(
        same(got.a, truth.a) && same(got.b, truth.b) && same(got.c, truth.c),
        format!("recovered a={:.6e} b={:.6} c={:.6}", got.a, got.b, got.c),
    )
}

fn criterion_9() -> Outcome {
    let all = bundled::load_all().expect("bundled data");
    let with_loss: Vec<_> = all.into_iter().filter(|r| r.pile_xent.is_some()).collect();
    let names = |n: u128| -> Vec<String> {
        pareto_frontier(&with_loss, n)
            .unwrap()
            .iter()
            .filter(|p| !bundled::is_cerebras(p.record))
            .map(|p| format!("{} {}", p.record.family, p.record.label))
            .collect()
    };
    let at_20b = names(20_000_000_000);
    let at_2t = names(2_000_000_000_000);
    let part_a = at_20b.is_empty();
    let part_b = !at_2t.is_empty();
    check(
        part_a && part_b,
        format!(
            "(a) n=20e9 only Cerebras-GPT: {} [non-Cerebras: {}]; (b) n=2e12 non-Cerebras present: {} [{}]",
            if part_a { "PASS" } else { "FAIL" },
            at_20b.join(", "),
            if part_b { "PASS" } else { "FAIL" },
            at_2t.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut notes = Vec::new();
    for (m, decay) in [(6e-4, DecayKind::Linear), (2e-4, DecayKind::Cosine)] {
        let s = LRSchedule::new(m, 375_000_000, 26_314_465_280, decay).unwrap();
        if lr_at(&s, 375_000_000) != Ok(m) || lr_at(&s, 26_314_465_280) != Ok(0.1 * m) {
            return Err(format!("{decay} schedule endpoints"));
        }
    }
    notes.push("lr endpoints exact".to_string());

    let h = FloatFormatSpec::FP16;
    let b = FloatFormatSpec::BF16;
    let sub = CastMode::Subnormal;
    let half_h = h.min_subnormal() / 2.0;
    let half_b = b.min_subnormal() / 2.0;
    let above = 1.0 + f64::EPSILON;
    let cases: [(&[f64], FloatFormatSpec, f64); 6] = [
        (&[1e-10, 1.0], h, 0.5),
        (&[1e-10, 1.0], b, 0.0),
        (&[half_h, half_h * above, 1.0, 2.0], h, 0.25),
        (&[half_b, half_b * above], b, 0.5),
        (&[h.min_subnormal(), -h.min_subnormal()], h, 0.0),
        (&[1e-8, 1e-9, 3e-8], h, 2.0 / 3.0),
    ];
    for (vals, fmt, want) in cases {
        let got = cast_fraction_zeroed(vals, &fmt, sub).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("{fmt} {vals:?}: zeroed {got}, want {want}"));
        }
    }
    notes.push("zeroed fractions exact".into());

    for mu in [1e-12, 3.7e-9, 1e-6, 0.25, 42.0] {
        let base = adam_epsilon_ok(mu, 0.0).threshold;
        for k in 1..10 {
            let scaled = adam_epsilon_ok(mu * 4f64.powi(k), 0.0).threshold;
            if scaled != base * 2f64.powi(k) {
                return Err(format!("adam threshold scaling at mu={mu}, k={k}"));
            }
        }
    }
    notes.push("adam sqrt scaling exact".into());

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut state = LossScaleState::default();
    let (mut scale, mut clean) = (32768.0f64, 0u32);
    let (mut grew, mut backed_off) = (0, 0);
    for step in 0..LOSS_SCALE_STEPS {
        let overflow = rng.random_bool(1.0 / 4000.0);
        state = loss_scale_step(state, overflow);
        if overflow {
            scale *= 0.5;
            clean = 0;
            backed_off += 1;
        } else if clean + 1 == 2000 {
            scale *= 2.0;
            clean = 0;
            grew += 1;
        } else {
            clean += 1;
        }
        if state.scale != scale || state.steps_since_overflow != clean {
            return Err(format!("loss scale diverged at step {step}"));
        }
    }
    notes.push(format!("loss scale matched {LOSS_SCALE_STEPS} steps ({grew} growths, {backed_off} backoffs)"));
    Ok(notes.join("; "))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scalekit"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("scalekit-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn criterion_11() -> Outcome {
    let values = scratch("values.txt");
    std::fs::write(&values, "1e-10 1.0 5e-8\n0, 3e-5\n").unwrap();
    let fit_svg = scratch("fit.svg");
    let trade_svg = scratch("tradeoff.svg");
    let v = values.to_str().unwrap();
    let fs = fit_svg.to_str().unwrap();
    let ts = trade_svg.to_str().unwrap();
    let invocations: Vec<(Vec<&str>, Option<&PathBuf>)> = vec![
        (vec!["params", "--d-model", "768", "--layers", "10", "--d-head", "64", "--d-ffn", "3072"], None),
        (vec!["flops", "--d-model", "5120", "--layers", "40", "--d-head", "128", "--tokens", "257.1e9"], None),
        (vec!["flops", "--d-model", "768", "--layers", "10", "--d-head", "64", "--tokens", "2e10", "--inference"], None),
        (vec!["fit", "--records", "bundled:cerebras_gpt", "--family", "Cerebras-GPT", "--out-svg", fs], Some(&fit_svg)),
        (vec!["predict", "--flops", "6.4e22"], None),
        (vec!["degrade", "--tau", "25.3"], None),
        (vec!["plan", "--budget-flops", "2.3e22"], None),
        (vec!["shape", "--params", "1.3e9"], None),
        (vec!["tradeoff", "--records", "bundled", "--infer-tokens", "200e9", "--out-svg", ts], Some(&trade_svg)),
        (vec!["mup", "--d-model", "2048", "--layers", "24", "--d-head", "128"], None),
        (vec!["schedule", "--max-lr", "6e-4", "--total-tokens", "2.2e9", "--decay", "linear", "--at", "1e9"], None),
        (vec!["probe", "--param", "mup", "--widths", "256,512", "--samples", "200", "--seed", "3"], None),
        (vec!["stability", "cast", "--format", "fp16", "--values", v], None),
        (vec!["stability", "adam-eps", "--mu-v", "1e-10", "--eps", "1e-9"], None),
    ];
    for (args, file) in &invocations {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let out = bin().args(args).output().map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!("`{}` exited with {}", args.join(" "), out.status));
            }
            let written = file.map(|p| std::fs::read(p).unwrap());
            outputs.push((out.stdout, written));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("`{}` is not deterministic", args.join(" ")));
        }
    }

    for (name, _) in bundled::FILES {
        let file = bundled::load(name).map_err(|e| e.to_string())?;
        let text = emit_records(&file);
        let back: RecordFile = parse_records(&text).map_err(|e| format!("{name}: {e}"))?;
        if back != file || emit_records(&back) != text {
            return Err(format!("{name} does not round-trip"));
        }
    }
    Ok(format!(
        "{} invocations byte-identical; {} bundled files round-trip",
        invocations.len(),
        bundled::FILES.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("parameter accounting", criterion_1),
        ("FLOPs accounting", criterion_2),
        ("scaling-law fit", criterion_3),
        ("extrapolation", criterion_4),
        ("degradation curve", criterion_5),
        ("muP derivation", criterion_6),
        ("activation probe", criterion_7),
        ("synthetic fit identity", criterion_8),
        ("tradeoff frontier", criterion_9),
        ("schedules and stability", criterion_10),
        ("determinism and round-trip", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
