use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, EvalSet};
use crate::cl::Checkpoint;
use crate::data::TaskEncoding;
use crate::error::{Error, Result};

/// `r[i][j]`: F1 on test set `j` after finishing stage `i`; `baseline[j]`:
/// F1 of the untrained model on test set `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMatrix {
    pub task_names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    pub baseline: Vec<f64>,
}

impl ResultMatrix {
    pub fn new(task_names: Vec<String>, r: Vec<Vec<f64>>, baseline: Vec<f64>) -> Result<Self> {
        let t = task_names.len();
        if r.len() != t || r.iter().any(|row| row.len() != t) || baseline.len() != t {
            return Err(Error::Argument(format!("result matrix must be {t}×{t} with {t} baseline values")));
        }
        Ok(Self { task_names, r, baseline })
    }

    pub fn size(&self) -> usize {
        self.r.len()
    }

    /// Unweighted mean of the last row: averaged F1 after the final stage.
    pub fn final_average(&self) -> f64 {
        let last = self.r.last().expect("non-empty result matrix");
        last.iter().sum::<f64>() / last.len() as f64
    }

    /// Mean F1 over all test sets after every stage.
    pub fn stage_averages(&self) -> Vec<f64> {
        self.r.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect()
    }
}

/// Evaluates every stage checkpoint on every test set.
pub fn result_matrix(
    stages: &[Checkpoint],
    test_sets: &[EvalSet],
    base: &Checkpoint,
    encoding: &TaskEncoding,
) -> Result<ResultMatrix> {
    if stages.len() != test_sets.len() || stages.is_empty() {
        return Err(Error::Argument(format!(
            "{} stage checkpoints for {} test sets",
            stages.len(),
            test_sets.len()
        )));
    }
    let row = |ckpt: &Checkpoint| -> Result<Vec<f64>> {
        test_sets
            .iter()
            .map(|t| Ok(evaluate(&ckpt.model_config, &ckpt.params, t, encoding)?.f1))
            .collect()
    };
    let r = stages.iter().map(row).collect::<Result<_>>()?;
    let baseline = row(base)?;
    ResultMatrix::new(test_sets.iter().map(|t| t.name().to_string()).collect(), r, baseline)
}

/// Mean over earlier tasks of final-stage F1 minus F1 right after learning
/// the task.
pub fn backward_transfer(m: &ResultMatrix) -> Result<f64> {
    let t = m.size();
    if t < 2 {
        return Err(Error::Argument("backward transfer needs at least two tasks".into()));
    }
    let sum: f64 = (0..t - 1).map(|i| m.r[t - 1][i] - m.r[i][i]).sum();
    Ok(sum / (t - 1) as f64)
}

/// Mean over later tasks of F1 just before training on the task minus the
/// untrained baseline.
pub fn forward_transfer(m: &ResultMatrix) -> Result<f64> {
    let t = m.size();
    if t < 2 {
        return Err(Error::Argument("forward transfer needs at least two tasks".into()));
    }
    let sum: f64 = (1..t).map(|i| m.r[i - 1][i] - m.baseline[i]).sum();
    Ok(sum / (t - 1) as f64)
}

/// F1 on the first task's test set: base model first, then after every stage.
pub fn forgetting_curve(
    stages: &[Checkpoint],
    first_test_set: &EvalSet,
    base: &Checkpoint,
    encoding: &TaskEncoding,
) -> Result<Vec<f64>> {
    if stages.is_empty() {
        return Err(Error::Argument("forgetting curve needs at least one stage".into()));
    }
    std::iter::once(base)
        .chain(stages)
        .map(|c| Ok(evaluate(&c.model_config, &c.params, first_test_set, encoding)?.f1))
        .collect()
}

/// Cell `(i, j)`: F1 of the model trained only on corpus `i`, on test set `j`.
pub fn cross_eval_grid(models: &[Checkpoint], test_sets: &[EvalSet], encoding: &TaskEncoding) -> Result<Vec<Vec<f64>>> {
    if models.len() != test_sets.len() {
        return Err(Error::Argument(format!("{} models for {} test sets", models.len(), test_sets.len())));
    }
    models
        .iter()
        .map(|m| {
            test_sets
                .iter()
                .map(|t| Ok(evaluate(&m.model_config, &m.params, t, encoding)?.f1))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(t: usize) -> Vec<String> {
        (0..t).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn bwt_arithmetic() {
        let r = vec![vec![0.8, 0.1, 0.1], vec![0.5, 0.7, 0.2], vec![0.6, 0.7, 0.9]];
        let m = ResultMatrix::new(names(3), r, vec![0.0; 3]).unwrap();
        let bwt = backward_transfer(&m).unwrap();
        assert!((bwt - (-0.1)).abs() < 1e-15, "{bwt}");
    }

    #[test]
    fn bwt_zero_when_last_row_matches_diagonal() {
        let r = vec![vec![0.8, 0.1, 0.4], vec![0.3, 0.7, 0.2], vec![0.8, 0.7, 0.9]];
        let m = ResultMatrix::new(names(3), r, vec![0.0; 3]).unwrap();
        assert_eq!(backward_transfer(&m).unwrap(), 0.0);
        let uniform = ResultMatrix::new(names(3), vec![vec![0.42; 3]; 3], vec![0.1; 3]).unwrap();
        assert_eq!(backward_transfer(&uniform).unwrap(), 0.0);
    }

    #[test]
    fn fwt_arithmetic() {
        let m = ResultMatrix::new(names(2), vec![vec![0.9, 0.5], vec![0.7, 0.8]], vec![0.1, 0.0]).unwrap();
        assert_eq!(forward_transfer(&m).unwrap(), 0.5);
        let r = vec![vec![0.9, 0.3, 0.0], vec![0.0, 0.9, 0.2], vec![0.0, 0.0, 0.9]];
        let m = ResultMatrix::new(names(3), r.clone(), vec![0.0, 0.3, 0.2]).unwrap();
        assert_eq!(forward_transfer(&m).unwrap(), 0.0);
        let m = ResultMatrix::new(names(3), r, vec![0.0; 3]).unwrap();
        assert!((forward_transfer(&m).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_task_rejected() {
        let m = ResultMatrix::new(names(1), vec![vec![0.5]], vec![0.0]).unwrap();
        assert!(backward_transfer(&m).is_err());
        assert!(forward_transfer(&m).is_err());
        assert_eq!(m.final_average(), 0.5);
    }

    #[test]
    fn shape_checked() {
        assert!(ResultMatrix::new(names(2), vec![vec![0.5]; 2], vec![0.0; 2]).is_err());
    }
}
