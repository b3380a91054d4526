//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 5 to 8 run the desk-scale configuration (3 corpora of 200
//! training sentences, 16-dimensional single-layer encoder) on one thread.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use weaver_core::cl::{
    load_checkpoint, save_checkpoint, weaver_run, Checkpoint, Trainer, TrainingObjective, WeaverOptions,
};
use weaver_core::data::{generate_suite, read_conll, write_conll, Corpus, SizeMode, Sentence, Split, Tag, TrainingData};
use weaver_core::eval::{backward_transfer, forward_transfer, span_f1, EvalCounts, ResultMatrix};
use weaver_core::experiment::{
    run_ablation, run_cross_eval, run_experiment, run_project_embeddings, ExperimentConfig, Strategy,
};
use weaver_core::model::{init_params, loss, loss_and_grad, Context, Example, FreezeMask, ModelConfig, ParameterSet};
use weaver_core::stats::aso;
use weaver_core::{Error, Result};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn desk_config(out: &Path, num_corpora: usize) -> ExperimentConfig {
    let json = serde_json::json!({
        "suite": {"num_corpora": num_corpora, "sizes": vec![200; num_corpora], "shared_vocab_size": 60,
                  "lexicon_size": 40, "lexicon_overlap": 0.3, "entity_density": 0.2,
                  "test_fraction": 0.5, "seed": 7},
        "model": {"vocab_size": 5000, "embed_dim": 16, "num_layers": 1, "hidden_dim": 32,
                  "num_labels": 3, "context": "full"},
        "hyper": {"epochs": 3, "batch_size": 16, "learning_rate": 0.05, "optimizer": "adam", "grad_clip": 1.0},
        "seeds": SEEDS,
        "output_dir": out,
    });
    ExperimentConfig::from_json(&json.to_string()).expect("desk config is valid")
}

// ---- 1: gradients -------------------------------------------------------

fn fd_relative_error(config: &ModelConfig, params: &ParameterSet, batch: &[Example]) -> f64 {
    let obj = TrainingObjective::plain();
    let (_, grad) = loss_and_grad(config, params, batch, &obj).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for ti in 0..params.tensors().len() {
        for j in 0..params.tensors()[ti].data.len() {
            let orig = params.tensors()[ti].data[j];
            probe.tensors_mut()[ti].data[j] = orig + h;
            let up = loss(config, &probe, batch, &obj).unwrap();
            probe.tensors_mut()[ti].data[j] = orig - h;
            let down = loss(config, &probe, batch, &obj).unwrap();
            probe.tensors_mut()[ti].data[j] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grad.tensors()[ti].data[j];
            if (fd - an).abs() >= 1e-9 {
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
            }
        }
    }
    worst
}

fn criterion_gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    let cases = 24;
    for seed in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let config = ModelConfig {
            vocab_size: rng.random_range(3..=20),
            embed_dim: rng.random_range(2..=8),
            num_layers: rng.random_range(1..=2),
            hidden_dim: rng.random_range(2..=8),
            num_labels: rng.random_range(3..=5),
            context: if rng.random_bool(0.5) { Context::Full } else { Context::Window(rng.random_range(0..3)) },
            seed,
        };
        let mut params = init_params(&config).unwrap();
        for t in params.tensors_mut() {
            for v in t.data.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let batch: Vec<Example> = (0..2)
            .map(|_| {
                let n = rng.random_range(1..=6);
                Example {
                    tokens: (0..n).map(|_| rng.random_range(0..config.vocab_size as u32)).collect(),
                    labels: (0..n).map(|_| rng.random_range(0..config.num_labels as u32)).collect(),
                }
            })
            .collect();
        worst = worst.max(fd_relative_error(&config, &params, &batch));
    }
    outcome(worst < 1e-3, format!("{cases} configs, max relative error {worst:.2e} (< 1e-3)"))
}

// ---- 2: closed form -----------------------------------------------------

struct Stub {
    size: usize,
    examples: Vec<Example>,
}

impl TrainingData for Stub {
    fn name(&self) -> &str {
        "stub"
    }
    fn declared_size(&self) -> usize {
        self.size
    }
    fn examples(&self) -> &[Example] {
        &self.examples
    }
}

/// Corpus `i` carries `i + 1` placeholder sentences; training on it sets
/// every parameter to `values[i]`.
struct StubTrainer(Vec<f64>);

impl Trainer for StubTrainer {
    fn epochs(&self) -> usize {
        1
    }
    fn train(
        &self,
        _: &ModelConfig,
        params: &ParameterSet,
        examples: &[Example],
        _: &TrainingObjective,
        _: &FreezeMask,
        _: usize,
        _: usize,
    ) -> Result<ParameterSet> {
        Ok(params.filled_like(self.0[examples.len() - 1]))
    }
}

fn criterion_closed_form() -> Outcome {
    let config =
        ModelConfig { vocab_size: 6, embed_dim: 2, num_layers: 1, hidden_dim: 2, num_labels: 3, context: Context::Full, seed: 0 };
    let base = Checkpoint::base(&config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let sizes: Vec<usize> = if draw == 0 {
            vec![4725, 3230, 3043, 2944, 1885]
        } else {
            let k = rng.random_range(1..=8);
            (0..k).map(|_| rng.random_range(1..=10_000)).collect()
        };
        let values: Vec<f64> = sizes.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
        let corpora: Vec<Stub> = sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| Stub { size, examples: vec![Example { tokens: vec![2], labels: vec![0] }; i + 1] })
            .collect();
        let stages =
            weaver_run(&corpora, &base, &StubTrainer(values.clone()), &FreezeMask::none(), &WeaverOptions::default())
                .unwrap();
        let total: usize = sizes.iter().sum();
        let expected = sizes.iter().zip(&values).map(|(&n, v)| n as f64 * v).sum::<f64>() / total as f64;
        for v in stages.last().unwrap().params.values() {
            worst = worst.max((v - expected).abs());
        }
    }
    outcome(worst <= 1e-12, format!("100 draws, max |error| {worst:.2e} (<= 1e-12)"))
}

// ---- 3: metric oracles --------------------------------------------------

const TYPES: [&str; 2] = ["Disease", "Chemical"];

fn random_tags(rng: &mut ChaCha8Rng, n: usize) -> Vec<Tag> {
    (0..n)
        .map(|_| {
            let ty = TYPES[rng.random_range(0..2)].to_string();
            match rng.random_range(0..3) {
                0 => Tag::O,
                1 => Tag::B(ty),
                _ => Tag::I(ty),
            }
        })
        .collect()
}

fn type_of(tag: &Tag) -> Option<&str> {
    match tag {
        Tag::O => None,
        Tag::B(t) | Tag::I(t) => Some(t),
    }
}

/// Every `(start, end, type)` that forms a chunk, found by testing all
/// candidate intervals against the chunk definition.
fn brute_force_chunks(tags: &[Tag]) -> Vec<(usize, usize, String)> {
    let n = tags.len();
    let mut out = Vec::new();
    for i in 0..n {
        let Some(ty) = type_of(&tags[i]) else { continue };
        let starts = matches!(&tags[i], Tag::B(_)) || i == 0 || type_of(&tags[i - 1]) != Some(ty);
        if !starts {
            continue;
        }
        for j in i..n {
            let inner = (i + 1..=j).all(|k| tags[k] == Tag::I(ty.to_string()));
            let closed = j + 1 == n || tags[j + 1] != Tag::I(ty.to_string());
            if inner && closed {
                out.push((i, j + 1, ty.to_string()));
            }
        }
    }
    out
}

fn criterion_metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let mut gold = random_tags(&mut rng, n);
        // gold must be valid BIO: stray I- becomes B-
        for k in 0..n {
            if let Tag::I(t) = &gold[k] {
                if k == 0 || type_of(&gold[k - 1]) != Some(t.as_str()) {
                    gold[k] = Tag::B(t.clone());
                }
            }
        }
        let pred = random_tags(&mut rng, n);
        let tokens = (0..n).map(|i| format!("w{i}")).collect();
        let corpus = Corpus::new("g", Split::Test, vec![Sentence::new(tokens, gold.clone()).unwrap()], SizeMode::Sentences)
            .unwrap();
        let got = span_f1(&corpus, std::slice::from_ref(&pred)).unwrap();
        let g = brute_force_chunks(&gold);
        let p = brute_force_chunks(&pred);
        let tp = p.iter().filter(|c| g.contains(c)).count();
        let expected = EvalCounts { tp, fp: p.len() - tp, fn_: g.len() - tp };
        if got.counts != expected || got.f1 != expected.scores().f1 {
            mismatches += 1;
        }
    }

    let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let m1 = ResultMatrix::new(
        names.clone(),
        vec![vec![0.75, 0.125, 0.25], vec![0.5, 0.875, 0.375], vec![0.625, 0.5, 1.0]],
        vec![0.0625, 0.125, 0.25],
    )
    .unwrap();
    let m2 = ResultMatrix::new(
        names,
        vec![vec![0.5, 0.25, 0.0], vec![0.5, 0.75, 0.5], vec![0.5, 0.75, 1.0]],
        vec![0.25, 0.25, 0.25],
    )
    .unwrap();
    // (0.625 - 0.75 + 0.5 - 0.875) / 2, (0.125 - 0.125 + 0.375 - 0.25) / 2
    let transfer_ok = backward_transfer(&m1).unwrap() == -0.25
        && forward_transfer(&m1).unwrap() == 0.0625
        && backward_transfer(&m2).unwrap() == 0.0
        && forward_transfer(&m2).unwrap() == 0.125;
    outcome(
        mismatches == 0 && transfer_ok,
        format!("span F1 mismatches {mismatches}/1000, BWT/FWT hand values {}", if transfer_ok { "match" } else { "differ" }),
    )
}

// ---- 4: ASO -------------------------------------------------------------

fn criterion_aso() -> Outcome {
    let high: Vec<f64> = (0..10).map(|i| 0.9 + i as f64 * 0.001).collect();
    let low: Vec<f64> = (0..10).map(|i| 0.1 + i as f64 * 0.001).collect();
    let disjoint = aso(&high, &low, 0.05, 0.2, 1000, 0).unwrap().eps_min;
    let constant = vec![0.5; 10];
    let identical = aso(&constant, &constant, 0.05, 0.2, 1000, 0).unwrap().eps_min;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut below = 0;
    for trial in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + trial);
        let better: Vec<f64> = (0..10).map(|_| 1.0 + normal.sample(&mut rng)).collect();
        let worse: Vec<f64> = (0..10).map(|_| normal.sample(&mut rng)).collect();
        if aso(&better, &worse, 0.05, 0.2, 1000, trial).unwrap().eps_min < 0.5 {
            below += 1;
        }
    }
    outcome(
        disjoint == 0.0 && identical == 1.0 && below >= 45,
        format!("disjoint {disjoint}, identical {identical}, shifted Gaussians below 0.5 in {below}/50 (>= 45)"),
    )
}

// ---- 5 to 8: desk-scale trends ------------------------------------------

fn criterion_cross_eval(dir: &Path) -> Outcome {
    let cfg = desk_config(dir, 3);
    let r = run_cross_eval(&cfg, 1).unwrap();
    let gap = r.diagonal_gap();
    outcome(gap >= 0.10, format!("diagonal minus off-diagonal F1 {gap:.3} (>= 0.10)"))
}

fn criterion_forgetting(dir: &Path) -> Outcome {
    let mut cfg = desk_config(dir, 3);
    cfg.strategies = vec![Strategy::Finetune, Strategy::Weaver, Strategy::Mtl];
    cfg.orders = cfg.resolved_orders()[..2].to_vec();
    let s = run_experiment(&cfg, 1).unwrap();
    let mean = |st: Strategy, f: &dyn Fn(&weaver_core::experiment::CellSummary) -> f64| {
        let cells: Vec<_> = s.cells_of(st).collect();
        cells.iter().map(|c| f(c)).sum::<f64>() / cells.len() as f64
    };
    let final_f1 = |st| mean(st, &|c| c.final_f1_mean);
    let bwt = |st| mean(st, &|c| c.bwt_mean.unwrap());
    let first_task = |st| mean(st, &|c| *c.forgetting_mean.last().unwrap());
    let (ft, wv, mtl) = (final_f1(Strategy::Finetune), final_f1(Strategy::Weaver), final_f1(Strategy::Mtl));
    let (bft, bwv) = (bwt(Strategy::Finetune), bwt(Strategy::Weaver));
    let (cft, cwv) = (first_task(Strategy::Finetune), first_task(Strategy::Weaver));
    let checks = [wv >= ft, bwv - bft >= 0.02, mtl >= wv, cwv >= cft];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "final F1 finetune {ft:.3} weaver {wv:.3} mtl {mtl:.3}; BWT finetune {bft:.3} weaver {bwv:.3}; \
             first-task F1 after last stage finetune {cft:.3} weaver {cwv:.3}; checks (a,b,c,d) {checks:?}"
        ),
    )
}

fn criterion_embeddings(dir: &Path) -> Outcome {
    let cfg = desk_config(dir, 2);
    let all = run_project_embeddings(&cfg, 1).unwrap();
    let votes = all.iter().filter(|d| d.weaver_resembles_joint()).count();
    let detail: Vec<String> =
        all.iter().map(|d| format!("{:.2}/{:.2}/{:.2}", d.independent, d.joint, d.weaver)).collect();
    outcome(
        votes * 2 > all.len(),
        format!("{votes}/{} seeds agree; distances independent/joint/weaver {}", all.len(), detail.join(" ")),
    )
}

fn criterion_ablation(dir: &Path) -> Outcome {
    let mut cfg = desk_config(dir, 3);
    cfg.strategies = vec![Strategy::Weaver];
    cfg.orders = cfg.resolved_orders()[..1].to_vec();
    cfg.freeze_layers = Some(1);
    let r = run_ablation(&cfg, 1).unwrap();
    let ok = r.stages_frozen_not_better();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        ok >= 3,
        format!("frozen <= full at {ok}/{} stages; full {} frozen {}", r.full_mean.len(), fmt(&r.full_mean), fmt(&r.frozen_mean)),
    )
}

// ---- 9: formats ---------------------------------------------------------

fn exit_code(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_weaver"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn criterion_formats(dir: &Path) -> Outcome {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // checkpoint round trip
    let config =
        ModelConfig { vocab_size: 30, embed_dim: 6, num_layers: 2, hidden_dim: 5, num_labels: 3, context: Context::Window(2), seed: 8 };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = Checkpoint::base(&config).unwrap();
    let mut params = base.params.clone();
    for t in params.tensors_mut() {
        for v in t.data.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
    }
    let ckpt = base.advanced(params, "corpus-a", 123).advanced(base.params.map(|v| -v / 3.0), "corpus-b", 45);
    let mut bytes = Vec::new();
    save_checkpoint(&ckpt, &mut bytes).unwrap();
    let back = load_checkpoint(bytes.as_slice()).unwrap();
    let bits = |c: &Checkpoint| c.params.values().map(f64::to_bits).collect::<Vec<_>>();
    let mut again = Vec::new();
    save_checkpoint(&back, &mut again).unwrap();
    check(back == ckpt && bits(&back) == bits(&ckpt) && again == bytes, "checkpoint round trip");

    // CoNLL round trip
    let suite = generate_suite(&weaver_core::data::SuiteConfig::small(1, 40, 0.3, 5)).unwrap();
    let corpus = &suite.tasks[0].train;
    let mut text = Vec::new();
    write_conll(corpus, &mut text).unwrap();
    let read = read_conll(text.as_slice(), corpus.name(), Split::Train).unwrap();
    let mut text2 = Vec::new();
    write_conll(&read, &mut text2).unwrap();
    check(read.sentences() == corpus.sentences() && text2 == text, "CoNLL round trip");

    // malformed inputs
    check(matches!(load_checkpoint(&bytes[..bytes.len() - 3]), Err(Error::Format(_))), "truncated checkpoint");
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xFF;
    check(matches!(load_checkpoint(bad_magic.as_slice()), Err(Error::Format(_))), "bad magic");
    let future = Checkpoint { format_version: 99, ..ckpt.clone() };
    let mut fb = Vec::new();
    save_checkpoint(&future, &mut fb).unwrap();
    check(matches!(load_checkpoint(fb.as_slice()), Err(Error::UnsupportedVersion { found: 99, .. })), "version");
    // 168 -> 169 in the header, history unchanged
    let field = b"\"cumulative_examples\":168";
    let pos = bytes.windows(field.len()).position(|w| w == field).expect("header field");
    let mut inconsistent = bytes.clone();
    inconsistent[pos + field.len() - 1] = b'9';
    check(matches!(load_checkpoint(inconsistent.as_slice()), Err(Error::Validation(_))), "inconsistent history");
    check(
        matches!(read_conll("a\tO\nb O\n".as_bytes(), "x", Split::Train), Err(Error::Parse { line: 2, .. })),
        "two-field CoNLL line",
    );
    check(
        matches!(read_conll("a\tO\nb\tI-Disease\n".as_bytes(), "x", Split::Train), Err(Error::Validation(_))),
        "BIO violation",
    );
    let mut sizes_zero = weaver_core::data::SuiteConfig::small(2, 10, 0.3, 0);
    sizes_zero.sizes[1] = 0;
    check(generate_suite(&sizes_zero).map(|_| ()).unwrap_err().is_config(), "zero corpus size");

    // exit codes
    let good = dir.join("good.json");
    let mut cfg = desk_config(&dir.join("out"), 2);
    cfg.suite.sizes = vec![20, 20];
    cfg.seeds = vec![0];
    cfg.strategies = vec![Strategy::Weaver];
    fs::write(&good, serde_json::to_string(&cfg).unwrap()).unwrap();
    let malformed = dir.join("malformed.json");
    fs::write(&malformed, "{\"suite\": ").unwrap();
    let too_deep = dir.join("too_deep.json");
    fs::write(&too_deep, serde_json::to_string(&ExperimentConfig { freeze_layers: Some(3), ..cfg.clone() }).unwrap())
        .unwrap();
    let diverging = dir.join("diverging.json");
    let mut div = cfg.clone();
    div.hyper.learning_rate = 1e300;
    div.output_dir = dir.join("diverged");
    fs::write(&diverging, serde_json::to_string(&div).unwrap()).unwrap();
    let p = |path: &Path| path.to_str().unwrap().to_string();
    check(exit_code(&["run", "--config", &p(&good)]) == 0, "exit 0 on success");
    check(exit_code(&["run", "--config", &p(&malformed)]) == 2, "exit 2 on malformed config");
    check(exit_code(&["ablation", "--config", &p(&too_deep)]) == 2, "exit 2 on freeze_layers > L");
    check(exit_code(&["run", "--config", &p(&diverging)]) == 1, "exit 1 on runtime failure");
    check(dir.join("diverged").join("FAILED").exists(), "FAILED marker");

    outcome(failures.is_empty(), if failures.is_empty() { "all format checks hold".into() } else { failures.join(", ") })
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let sub = |name: &str| tmp.path().join(name);
    type Check<'a> = (&'a str, Duration, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Check> = vec![
        ("1 gradient oracle", Duration::from_secs(60), Box::new(criterion_gradients)),
        ("2 WEAVER closed form", Duration::from_secs(60), Box::new(criterion_closed_form)),
        ("3 metric oracles", Duration::from_secs(60), Box::new(criterion_metric_oracles)),
        ("4 ASO behaviour", Duration::from_secs(60), Box::new(criterion_aso)),
        ("5 cross-evaluation gap", Duration::from_secs(600), Box::new(|| criterion_cross_eval(&sub("c5")))),
        ("6 forgetting trend", Duration::from_secs(1800), Box::new(|| criterion_forgetting(&sub("c6")))),
        ("7 embedding overlap", Duration::from_secs(600), Box::new(|| criterion_embeddings(&sub("c7")))),
        ("8 ablation direction", Duration::from_secs(1200), Box::new(|| criterion_ablation(&sub("c8")))),
        ("9 formats", Duration::from_secs(300), Box::new(|| {
            fs::create_dir_all(sub("c9")).unwrap();
            criterion_formats(&sub("c9"))
        })),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
