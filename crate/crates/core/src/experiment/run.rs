use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Strategy};
use super::tables::{aggregate_experiment, ExperimentSummary};
use super::{collect_runs, parallel_map, read_json, write_csv, write_json, PROVENANCE};
use crate::cl::{
    ewc_run, finetune_run, mtl_run, replay_run, weaver_run, write_checkpoint_file, Checkpoint, EwcOptions,
    GradientTrainer, ReplayOptions, WeaverOptions,
};
use crate::data::{generate_suite, EncodedCorpus, LabelSet, Suite, TaskEncoding};
use crate::error::{Error, Result};
use crate::eval::{evaluate, fmt_num, forgetting_curve, result_matrix, EvalSet, MetricsRecord};
use crate::model::{FreezeMask, ModelConfig};

/// A suite encoded for one training order.
#[derive(Debug, Clone)]
pub struct OrderData {
    pub order: Vec<usize>,
    pub encoding: TaskEncoding,
    /// Training corpora in training order.
    pub train: Vec<EncodedCorpus>,
    /// Test sets in training order.
    pub tests: Vec<EvalSet>,
    /// Model shape with the vocabulary size of `encoding`.
    pub model: ModelConfig,
}

impl OrderData {
    pub fn task_names(&self) -> Vec<String> {
        self.tests.iter().map(|t| t.name().to_string()).collect()
    }
}

/// Encodes `suite` in `order`, with the vocabulary fixed from the first
/// corpus of the order.
pub fn prepare_order(suite: &Suite, order: &[usize], model: &ModelConfig, vocab_cap: usize) -> Result<OrderData> {
    let first = *order.first().ok_or_else(|| Error::Argument("empty order".into()))?;
    let encoding = TaskEncoding::new(suite.vocabulary(first, vocab_cap), LabelSet::single(&suite.entity_type));
    let mut train = Vec::with_capacity(order.len());
    let mut tests = Vec::with_capacity(order.len());
    for &i in order {
        let task = suite
            .tasks
            .get(i)
            .ok_or_else(|| Error::Argument(format!("order refers to corpus {i} of {}", suite.tasks.len())))?;
        train.push(encoding.encode_corpus(&task.train)?);
        tests.push(EvalSet::new(task.test.clone(), &encoding)?);
    }
    let model = ModelConfig { vocab_size: encoding.vocab.len(), num_labels: encoding.labels.len(), ..model.clone() };
    model.validate()?;
    Ok(OrderData { order: order.to_vec(), encoding, train, tests, model })
}

/// One finished (strategy, order, seed) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub strategy: Strategy,
    pub seed: u64,
    pub base: Checkpoint,
    /// One checkpoint per stage; MTL has a single one.
    pub stages: Vec<Checkpoint>,
    pub metrics: MetricsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub strategy: Strategy,
    pub order_index: usize,
    pub order: Vec<usize>,
    pub seed: u64,
    pub config_hash: String,
    pub task_label: String,
    pub provenance: String,
    pub freeze_layers: Option<usize>,
}

fn seeded(cfg: &ExperimentConfig, data: &OrderData, seed: u64) -> (ModelConfig, GradientTrainer) {
    let model = ModelConfig { seed, ..data.model.clone() };
    let hyper = crate::model::Hyperparams { seed, ..cfg.hyper.clone() };
    (model, GradientTrainer::new(hyper))
}

/// Trains one strategy over `data` with `seed` and evaluates it.
pub fn run_strategy(
    cfg: &ExperimentConfig,
    data: &OrderData,
    strategy: Strategy,
    seed: u64,
    mask: &FreezeMask,
) -> Result<RunResult> {
    let (model, trainer) = seeded(cfg, data, seed);
    let base = Checkpoint::base(&model)?;
    let stages = match strategy {
        Strategy::Finetune => finetune_run(&data.train, &base, &trainer, mask)?,
        Strategy::Weaver => weaver_run(&data.train, &base, &trainer, mask, &WeaverOptions::default())?,
        Strategy::Ewc => {
            let options = EwcOptions { lambda: cfg.ewc_lambda, fisher_samples: cfg.fisher_samples, seed };
            ewc_run(&data.train, &base, &trainer, mask, &options)?
        }
        Strategy::Replay => {
            let options = ReplayOptions { fraction: cfg.replay_fraction, seed };
            replay_run(&data.train, &base, &trainer, mask, &options)?
        }
        Strategy::Mtl => vec![mtl_run(&data.train, &base, &trainer, mask)?],
    };
    let metrics = if strategy.is_sequential() {
        let m = result_matrix(&stages, &data.tests, &base, &data.encoding)?;
        let curve = forgetting_curve(&stages, &data.tests[0], &base, &data.encoding)?;
        MetricsRecord::from_matrix(&m, Some(curve))?
    } else {
        let score = |c: &Checkpoint| -> Result<Vec<f64>> {
            data.tests.iter().map(|t| Ok(evaluate(&c.model_config, &c.params, t, &data.encoding)?.f1)).collect()
        };
        MetricsRecord::joint(data.task_names(), score(&stages[0])?, score(&base)?)
    };
    Ok(RunResult { strategy, seed, base, stages, metrics })
}

pub(crate) fn run_dir(root: &Path, strategy: Strategy, order_index: usize, seed: u64) -> PathBuf {
    root.join(strategy.name()).join(format!("order{order_index}")).join(format!("seed{seed}"))
}

fn persist_run(dir: &Path, run: &RunResult, manifest: &RunManifest) -> Result<()> {
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    for (i, c) in run.stages.iter().enumerate() {
        write_checkpoint_file(c, &ckpt_dir.join(format!("stage-{i}.wvr")))?;
    }
    write_json(&dir.join("manifest.json"), manifest)?;
    write_json(&dir.join("metrics.json"), &run.metrics)
}

struct Prepared {
    cfg: ExperimentConfig,
    orders: Vec<OrderData>,
    hash: String,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let suite = generate_suite(&cfg.suite)?;
    let orders = cfg
        .orders
        .iter()
        .map(|o| prepare_order(&suite, o, &cfg.model, cfg.vocab_cap()))
        .collect::<Result<_>>()?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("config.json"), &cfg)?;
    let hash = cfg.hash();
    Ok(Prepared { cfg, orders, hash })
}

fn freeze_mask(data: &OrderData, layers: Option<usize>) -> Result<FreezeMask> {
    layers.map_or(Ok(FreezeMask::none()), |k| FreezeMask::prefix(k, &data.model))
}

/// Every (strategy, order, seed) run of `cfg`, persisted under
/// `output_dir`, followed by the aggregate tables. `freeze_layers`, when set,
/// applies to every strategy.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentSummary> {
    let p = prepare(cfg)?;
    let cfg = &p.cfg;
    let mut work = Vec::new();
    for &strategy in &cfg.strategies {
        for oi in 0..p.orders.len() {
            for &seed in &cfg.seeds {
                work.push((strategy, oi, seed));
            }
        }
    }
    let labels: Vec<String> = work.iter().map(|(s, o, seed)| format!("{s}/order{o}/seed{seed}")).collect();
    let results = parallel_map(jobs, work.len(), |i| {
        let (strategy, oi, seed) = work[i];
        let data = &p.orders[oi];
        let mask = freeze_mask(data, cfg.freeze_layers)?;
        let run = run_strategy(cfg, data, strategy, seed, &mask)?;
        let manifest = RunManifest {
            strategy,
            order_index: oi,
            order: data.order.clone(),
            seed,
            config_hash: p.hash.clone(),
            task_label: cfg.task_label.clone(),
            provenance: PROVENANCE.into(),
            freeze_layers: cfg.freeze_layers,
        };
        persist_run(&run_dir(&cfg.output_dir, strategy, oi, seed), &run, &manifest)?;
        info!("{}: final averaged F1 {:.4}", labels[i], run.metrics.avg_final_f1);
        Ok(())
    });
    collect_runs(&cfg.output_dir, &labels, results)?;
    aggregate_experiment(&cfg.output_dir)
}

/// Independent single-corpus models evaluated on every test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalResult {
    pub task_names: Vec<String>,
    pub seeds: Vec<u64>,
    /// One K×K grid per seed; row = training corpus, column = test set.
    pub grids: Vec<Vec<Vec<f64>>>,
    /// Cell-wise mean over seeds.
    pub mean: Vec<Vec<f64>>,
}

impl CrossEvalResult {
    /// Mean diagonal cell minus mean off-diagonal cell of the mean grid.
    pub fn diagonal_gap(&self) -> f64 {
        let k = self.mean.len();
        if k < 2 {
            return 0.0;
        }
        let diag: f64 = (0..k).map(|i| self.mean[i][i]).sum::<f64>() / k as f64;
        let total: f64 = self.mean.iter().flatten().sum();
        let off = (total - diag * k as f64) / (k * k - k) as f64;
        diag - off
    }
}

/// Trains one model per corpus from the base initialisation (vocabulary from
/// corpus 0) and evaluates each on every test set, for every seed.
pub fn run_cross_eval(cfg: &ExperimentConfig, jobs: usize) -> Result<CrossEvalResult> {
    cfg.validate()?;
    let suite = generate_suite(&cfg.suite)?;
    let identity: Vec<usize> = (0..cfg.suite.num_corpora).collect();
    let data = prepare_order(&suite, &identity, &cfg.model, cfg.vocab_cap())?;
    let root = cfg.output_dir.join("cross-eval");
    fs::create_dir_all(&root)?;
    let labels: Vec<String> = cfg.seeds.iter().map(|s| format!("cross-eval/seed{s}")).collect();
    let results = parallel_map(jobs, cfg.seeds.len(), |i| {
        let seed = cfg.seeds[i];
        let dir = root.join(format!("seed{seed}"));
        fs::create_dir_all(dir.join("checkpoints"))?;
        let mask = freeze_mask(&data, cfg.freeze_layers)?;
        let (model, trainer) = seeded(cfg, &data, seed);
        let base = Checkpoint::base(&model)?;
        let mut grid = Vec::with_capacity(data.train.len());
        for (c, corpus) in data.train.iter().enumerate() {
            let ckpt = finetune_run(std::slice::from_ref(corpus), &base, &trainer, &mask)?.remove(0);
            write_checkpoint_file(&ckpt, &dir.join("checkpoints").join(format!("corpus-{c}.wvr")))?;
            let row = data
                .tests
                .iter()
                .map(|t| Ok(evaluate(&model, &ckpt.params, t, &data.encoding)?.f1))
                .collect::<Result<Vec<f64>>>()?;
            grid.push(row);
        }
        write_json(&dir.join("grid.json"), &grid)?;
        info!("{}: done", labels[i]);
        Ok(())
    });
    collect_runs(&root, &labels, results)?;

    let grids: Vec<Vec<Vec<f64>>> = cfg
        .seeds
        .iter()
        .map(|s| read_json(&root.join(format!("seed{s}")).join("grid.json")))
        .collect::<Result<_>>()?;
    let k = data.tests.len();
    let n = grids.len() as f64;
    let mean: Vec<Vec<f64>> =
        (0..k).map(|i| (0..k).map(|j| grids.iter().map(|g| g[i][j]).sum::<f64>() / n).collect()).collect();
    let task_names = data.task_names();
    let result = CrossEvalResult { task_names: task_names.clone(), seeds: cfg.seeds.clone(), grids, mean };

    let tables = cfg.output_dir.join("tables");
    fs::create_dir_all(&tables)?;
    let header: Vec<String> = std::iter::once("trained_on".to_string()).chain(task_names.iter().cloned()).collect();
    let rows: Vec<Vec<String>> = result
        .mean
        .iter()
        .zip(&task_names)
        .map(|(row, name)| std::iter::once(name.clone()).chain(row.iter().map(|&v| fmt_num(v))).collect())
        .collect();
    write_csv(&tables.join("cross_eval.csv"), &header, &rows)?;
    write_json(&tables.join("cross_eval.json"), &result)?;
    Ok(result)
}

/// WEAVER with and without a frozen prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub freeze_layers: usize,
    /// Per-stage averaged F1 of every (order, seed) run, full fine-tuning.
    pub full: Vec<Vec<f64>>,
    pub frozen: Vec<Vec<f64>>,
    pub full_mean: Vec<f64>,
    pub frozen_mean: Vec<f64>,
}

impl AblationResult {
    /// Stages at which the frozen run's mean is at most the full run's.
    pub fn stages_frozen_not_better(&self) -> usize {
        self.full_mean.iter().zip(&self.frozen_mean).filter(|(f, z)| z <= f).count()
    }
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let width = rows.first().map_or(0, Vec::len);
    (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Runs WEAVER over every order and seed twice, once training all layers and
/// once with the first `freeze_layers` layer ordinals frozen.
pub fn run_ablation(cfg: &ExperimentConfig, jobs: usize) -> Result<AblationResult> {
    let k = cfg
        .freeze_layers
        .ok_or_else(|| Error::Config("ablation requires freeze_layers".into()))?;
    let p = prepare(cfg)?;
    let cfg = &p.cfg;
    let root = cfg.output_dir.join("ablation");
    let settings = [("full", None), ("frozen", Some(k))];
    let mut work = Vec::new();
    for (si, _) in settings.iter().enumerate() {
        for oi in 0..p.orders.len() {
            for &seed in &cfg.seeds {
                work.push((si, oi, seed));
            }
        }
    }
    let dir_of = |si: usize, oi: usize, seed: u64| {
        root.join(settings[si].0).join(format!("order{oi}")).join(format!("seed{seed}"))
    };
    let labels: Vec<String> =
        work.iter().map(|&(si, oi, seed)| format!("ablation/{}/order{oi}/seed{seed}", settings[si].0)).collect();
    let results = parallel_map(jobs, work.len(), |i| {
        let (si, oi, seed) = work[i];
        let data = &p.orders[oi];
        let mask = freeze_mask(data, settings[si].1)?;
        let run = run_strategy(cfg, data, Strategy::Weaver, seed, &mask)?;
        let manifest = RunManifest {
            strategy: Strategy::Weaver,
            order_index: oi,
            order: data.order.clone(),
            seed,
            config_hash: p.hash.clone(),
            task_label: cfg.task_label.clone(),
            provenance: PROVENANCE.into(),
            freeze_layers: settings[si].1,
        };
        persist_run(&dir_of(si, oi, seed), &run, &manifest)?;
        info!("{}: done", labels[i]);
        Ok(())
    });
    fs::create_dir_all(&root)?;
    collect_runs(&root, &labels, results)?;

    let mut per_setting: Vec<Vec<Vec<f64>>> = vec![Vec::new(), Vec::new()];
    for &(si, oi, seed) in &work {
        let m: MetricsRecord = read_json(&dir_of(si, oi, seed).join("metrics.json"))?;
        per_setting[si].push(m.stage_avg_f1);
    }
    let frozen = per_setting.pop().unwrap_or_default();
    let full = per_setting.pop().unwrap_or_default();
    let result = AblationResult {
        freeze_layers: k,
        full_mean: column_means(&full),
        frozen_mean: column_means(&frozen),
        full,
        frozen,
    };

    let tables = cfg.output_dir.join("tables");
    fs::create_dir_all(&tables)?;
    let stages = result.full_mean.len();
    let header: Vec<String> = ["setting".to_string(), "frozen_layers".to_string()]
        .into_iter()
        .chain((1..=stages).map(|s| format!("stage_{s}")))
        .collect();
    let row = |name: &str, frozen: usize, values: &[f64]| -> Vec<String> {
        [name.to_string(), frozen.to_string()].into_iter().chain(values.iter().map(|&v| fmt_num(v))).collect()
    };
    let rows = vec![row("full", 0, &result.full_mean), row("frozen", k, &result.frozen_mean)];
    write_csv(&tables.join("ablation.csv"), &header, &rows)?;
    write_json(&tables.join("ablation.json"), &result)?;
    Ok(result)
}
