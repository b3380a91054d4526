//! Browser bindings. Every function returns a JSON string for the page to plot.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use weaver_core::cl::new_model_coefficient;
use weaver_core::data::SuiteConfig;
use weaver_core::experiment::{prepare_order, run_strategy, ExperimentConfig, Strategy};
use weaver_core::model::{Context, FreezeMask, Hyperparams, ModelConfig};
use weaver_core::stats::{aso, quantile, DEFAULT_ALPHA, DEFAULT_BOOTSTRAP, DEFAULT_TAU};

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, String> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| format!("not a number: {s:?}")))
        .collect()
}

#[derive(Serialize)]
struct Coefficients {
    /// Weight of the freshly fine-tuned model at each stage.
    new_model: Vec<f64>,
    /// `share[k][i]`: weight of corpus i's fine-tuning inside the merged
    /// model after stage k.
    share: Vec<Vec<f64>>,
}

/// Merge coefficients for a list of corpus sizes, e.g. `"4725, 3230, 3043"`.
#[wasm_bindgen]
pub fn merge_coefficients(sizes: &str) -> Result<String, String> {
    let sizes: Vec<usize> = parse_list(sizes)?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err("sizes must be positive integers".into());
    }
    let mut seen = 0;
    let mut new_model = Vec::new();
    let mut share: Vec<Vec<f64>> = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        seen += n;
        let c = if k == 0 { 1.0 } else { new_model_coefficient(seen, n) };
        let mut row: Vec<f64> = share.last().map_or_else(Vec::new, |prev| prev.iter().map(|s| s * (1.0 - c)).collect());
        row.push(c);
        new_model.push(c);
        share.push(row);
    }
    to_json(&Coefficients { new_model, share })
}

#[derive(Serialize)]
struct AsoDemo {
    eps_min: f64,
    dominant: bool,
    tau: f64,
    /// Quantile functions of both samples on a shared grid.
    t: Vec<f64>,
    quantiles_a: Vec<f64>,
    quantiles_b: Vec<f64>,
}

/// ASO between two score lists given as comma or space separated numbers.
#[wasm_bindgen]
pub fn aso_compare(a: &str, b: &str, seed: u64) -> Result<String, String> {
    let a: Vec<f64> = parse_list(a)?;
    let b: Vec<f64> = parse_list(b)?;
    let r = aso(&a, &b, DEFAULT_ALPHA, DEFAULT_TAU, DEFAULT_BOOTSTRAP, seed).map_err(|e| e.to_string())?;
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (sa, sb) = (sort(&a), sort(&b));
    let t: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    to_json(&AsoDemo {
        eps_min: r.eps_min,
        dominant: r.dominant,
        tau: r.tau,
        quantiles_a: t.iter().map(|&x| quantile(&sa, x)).collect(),
        quantiles_b: t.iter().map(|&x| quantile(&sb, x)).collect(),
        t,
    })
}

#[derive(Serialize)]
struct StrategyCurves {
    strategy: Strategy,
    forgetting_curve: Vec<f64>,
    stage_avg_f1: Vec<f64>,
    r: Vec<Vec<f64>>,
    bwt: Option<f64>,
}

fn demo_config(sentences: usize, overlap: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        suite: SuiteConfig::small(3, sentences, overlap, seed),
        model: ModelConfig {
            vocab_size: 5000,
            embed_dim: 16,
            num_layers: 1,
            hidden_dim: 32,
            num_labels: 3,
            context: Context::Full,
            seed,
        },
        hyper: Hyperparams { learning_rate: 0.05, grad_clip: Some(1.0), ..Hyperparams::default() },
        strategies: vec![Strategy::Finetune, Strategy::Weaver],
        orders: vec![vec![0, 1, 2]],
        seeds: vec![seed],
        freeze_layers: None,
        ewc_lambda: 100.0,
        fisher_samples: None,
        replay_fraction: 0.1,
        output_dir: "unused".into(),
        task_label: "NER".into(),
    }
}

/// Trains FineTune and WEAVER over a fresh three-corpus synthetic suite and
/// reports F1 on the first corpus after every stage.
#[wasm_bindgen]
pub fn forgetting_demo(sentences: usize, overlap: f64, seed: u64) -> Result<String, String> {
    if !(20..=400).contains(&sentences) {
        return Err("sentences per corpus must be between 20 and 400".into());
    }
    let cfg = demo_config(sentences, overlap, seed);
    cfg.validate().map_err(|e| e.to_string())?;
    let suite = weaver_core::data::generate_suite(&cfg.suite).map_err(|e| e.to_string())?;
    let data = prepare_order(&suite, &cfg.orders[0], &cfg.model, cfg.model.vocab_size - 2).map_err(|e| e.to_string())?;
    let curves = cfg
        .strategies
        .iter()
        .map(|&st| {
            let r = run_strategy(&cfg, &data, st, seed, &FreezeMask::none()).map_err(|e| e.to_string())?;
            let m = r.metrics;
            Ok(StrategyCurves {
                strategy: st,
                forgetting_curve: m.forgetting_curve.unwrap_or_default(),
                stage_avg_f1: m.stage_avg_f1,
                r: m.r,
                bwt: m.bwt,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&curves)
}
