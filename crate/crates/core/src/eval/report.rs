use serde::{Deserialize, Serialize};

use super::transfer::{backward_transfer, forward_transfer, ResultMatrix};
use crate::error::Result;

/// Per-run evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub task_names: Vec<String>,
    /// Rows of the result matrix. Joint (MTL) training has a single row.
    pub r: Vec<Vec<f64>>,
    pub baseline: Vec<f64>,
    pub bwt: Option<f64>,
    pub fwt: Option<f64>,
    pub avg_final_f1: f64,
    /// Mean F1 over all test sets after each stage.
    pub stage_avg_f1: Vec<f64>,
    /// F1 on the first task's test set: untrained, then after each stage.
    pub forgetting_curve: Option<Vec<f64>>,
}

impl MetricsRecord {
    pub fn from_matrix(m: &ResultMatrix, forgetting_curve: Option<Vec<f64>>) -> Result<Self> {
        let (bwt, fwt) = if m.size() >= 2 {
            (Some(backward_transfer(m)?), Some(forward_transfer(m)?))
        } else {
            (None, None)
        };
        Ok(Self {
            task_names: m.task_names.clone(),
            r: m.r.clone(),
            baseline: m.baseline.clone(),
            bwt,
            fwt,
            avg_final_f1: m.final_average(),
            stage_avg_f1: m.stage_averages(),
            forgetting_curve,
        })
    }

    /// Record for a model trained once on everything: one row of scores.
    pub fn joint(task_names: Vec<String>, scores: Vec<f64>, baseline: Vec<f64>) -> Self {
        let avg = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
        Self {
            task_names,
            r: vec![scores],
            baseline,
            bwt: None,
            fwt: None,
            avg_final_f1: avg,
            stage_avg_f1: vec![avg],
            forgetting_curve: None,
        }
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Fixed six-decimal rendering used in every CSV table.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.6}")
}
