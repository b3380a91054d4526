use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Strategy};
use super::run::run_dir;
use super::{read_json, write_csv, write_json};
use crate::error::Result;
use crate::eval::{fmt_num, mean_sd, MetricsRecord};
use crate::stats::{aso, DEFAULT_ALPHA, DEFAULT_BOOTSTRAP, DEFAULT_TAU};

/// Seed-level results of one strategy on one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: Strategy,
    pub order_index: usize,
    pub order: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Averaged final F1 per seed.
    pub final_f1: Vec<f64>,
    pub final_f1_mean: f64,
    pub final_f1_sd: f64,
    /// Empty for joint training.
    pub bwt: Vec<f64>,
    pub fwt: Vec<f64>,
    pub bwt_mean: Option<f64>,
    pub bwt_sd: Option<f64>,
    pub fwt_mean: Option<f64>,
    pub fwt_sd: Option<f64>,
    /// Seed mean of the forgetting curve, untrained model first.
    pub forgetting_mean: Vec<f64>,
    pub forgetting_sd: Vec<f64>,
    pub stage_avg_mean: Vec<f64>,
}

/// ASO comparison of averaged final F1 over seeds; `a` is WEAVER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAso {
    pub order_index: usize,
    pub a: Strategy,
    pub b: Strategy,
    pub eps_min: f64,
    pub dominant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub task_label: String,
    pub config_hash: String,
    pub cells: Vec<CellSummary>,
    pub aso: Vec<PairwiseAso>,
}

impl ExperimentSummary {
    pub fn cell(&self, strategy: Strategy, order_index: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.strategy == strategy && c.order_index == order_index)
    }

    /// Cells of one strategy, in order index order.
    pub fn cells_of(&self, strategy: Strategy) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(move |c| c.strategy == strategy)
    }
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let width = rows.first().map_or(0, Vec::len);
    (0..width)
        .map(|j| mean_sd(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .unzip()
}

fn summarise(strategy: Strategy, order_index: usize, order: &[usize], seeds: &[u64], runs: &[MetricsRecord]) -> CellSummary {
    let final_f1: Vec<f64> = runs.iter().map(|m| m.avg_final_f1).collect();
    let (final_f1_mean, final_f1_sd) = mean_sd(&final_f1);
    let bwt: Vec<f64> = runs.iter().filter_map(|m| m.bwt).collect();
    let fwt: Vec<f64> = runs.iter().filter_map(|m| m.fwt).collect();
    let opt = |v: &[f64]| if v.is_empty() { (None, None) } else { let (m, s) = mean_sd(v); (Some(m), Some(s)) };
    let (bwt_mean, bwt_sd) = opt(&bwt);
    let (fwt_mean, fwt_sd) = opt(&fwt);
    let curves: Vec<Vec<f64>> = runs.iter().filter_map(|m| m.forgetting_curve.clone()).collect();
    let (forgetting_mean, forgetting_sd) = column_stats(&curves);
    let stages: Vec<Vec<f64>> = runs.iter().map(|m| m.stage_avg_f1.clone()).collect();
    let (stage_avg_mean, _) = column_stats(&stages);
    CellSummary {
        strategy,
        order_index,
        order: order.to_vec(),
        seeds: seeds.to_vec(),
        final_f1,
        final_f1_mean,
        final_f1_sd,
        bwt,
        fwt,
        bwt_mean,
        bwt_sd,
        fwt_mean,
        fwt_sd,
        forgetting_mean,
        forgetting_sd,
        stage_avg_mean,
    }
}

/// Rebuilds every table from the `config.json` and per-run `metrics.json`
/// files under `output_dir`.
pub fn aggregate_experiment(output_dir: &Path) -> Result<ExperimentSummary> {
    let cfg: ExperimentConfig = read_json(&output_dir.join("config.json"))?;
    let orders = cfg.resolved_orders();
    let mut cells = Vec::new();
    for &strategy in &cfg.strategies {
        for (oi, order) in orders.iter().enumerate() {
            let runs = cfg
                .seeds
                .iter()
                .map(|&s| read_json::<MetricsRecord>(&run_dir(output_dir, strategy, oi, s).join("metrics.json")))
                .collect::<Result<Vec<_>>>()?;
            cells.push(summarise(strategy, oi, order, &cfg.seeds, &runs));
        }
    }

    let mut pairs = Vec::new();
    if cfg.strategies.contains(&Strategy::Weaver) && cfg.seeds.len() >= 2 {
        for oi in 0..orders.len() {
            let find = |s: Strategy| cells.iter().find(|c: &&CellSummary| c.strategy == s && c.order_index == oi);
            let Some(weaver) = find(Strategy::Weaver) else { continue };
            for &other in cfg.strategies.iter().filter(|&&s| s != Strategy::Weaver) {
                let Some(cell) = find(other) else { continue };
                let r = aso(&weaver.final_f1, &cell.final_f1, DEFAULT_ALPHA, DEFAULT_TAU, DEFAULT_BOOTSTRAP, cfg.suite.seed)?;
                pairs.push(PairwiseAso {
                    order_index: oi,
                    a: Strategy::Weaver,
                    b: other,
                    eps_min: r.eps_min,
                    dominant: r.dominant,
                });
            }
        }
    }

    let summary = ExperimentSummary { task_label: cfg.task_label.clone(), config_hash: cfg.hash(), cells, aso: pairs };
    write_tables(output_dir, &cfg, orders.len(), &summary)?;
    Ok(summary)
}

fn write_tables(output_dir: &Path, cfg: &ExperimentConfig, num_orders: usize, s: &ExperimentSummary) -> Result<()> {
    let dir = output_dir.join("tables");
    fs::create_dir_all(&dir)?;

    // averaged final F1, mean and sd per order, then the mean over orders
    let mut header = vec!["strategy".to_string()];
    for oi in 0..num_orders {
        header.push(format!("order{oi}_mean"));
        header.push(format!("order{oi}_sd"));
    }
    header.push("mean".into());
    let rows: Vec<Vec<String>> = cfg
        .strategies
        .iter()
        .map(|&st| {
            let cells: Vec<&CellSummary> = s.cells_of(st).collect();
            let mut row = vec![st.to_string()];
            for c in &cells {
                row.push(fmt_num(c.final_f1_mean));
                row.push(fmt_num(c.final_f1_sd));
            }
            row.push(fmt_num(cells.iter().map(|c| c.final_f1_mean).sum::<f64>() / cells.len() as f64));
            row
        })
        .collect();
    write_csv(&dir.join("final_f1.csv"), &header, &rows)?;

    let header: Vec<String> =
        ["strategy", "order", "bwt_mean", "bwt_sd", "fwt_mean", "fwt_sd"].map(String::from).to_vec();
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    let rows: Vec<Vec<String>> = s
        .cells
        .iter()
        .filter(|c| c.strategy.is_sequential())
        .map(|c| {
            vec![
                c.strategy.to_string(),
                c.order_index.to_string(),
                opt(c.bwt_mean),
                opt(c.bwt_sd),
                opt(c.fwt_mean),
                opt(c.fwt_sd),
            ]
        })
        .collect();
    write_csv(&dir.join("transfer.csv"), &header, &rows)?;

    let header: Vec<String> = ["strategy", "order", "point", "mean", "sd"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = s
        .cells
        .iter()
        .flat_map(|c| {
            c.forgetting_mean.iter().zip(&c.forgetting_sd).enumerate().map(move |(p, (m, sd))| {
                vec![c.strategy.to_string(), c.order_index.to_string(), p.to_string(), fmt_num(*m), fmt_num(*sd)]
            })
        })
        .collect();
    write_csv(&dir.join("forgetting_curves.csv"), &header, &rows)?;

    let header: Vec<String> = ["order", "a", "b", "eps_min", "dominant"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = s
        .aso
        .iter()
        .map(|p| vec![p.order_index.to_string(), p.a.to_string(), p.b.to_string(), fmt_num(p.eps_min), p.dominant.to_string()])
        .collect();
    write_csv(&dir.join("aso.csv"), &header, &rows)?;

    write_json(&dir.join("summary.json"), s)
}
