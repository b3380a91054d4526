//! Experiment harness: suite generation, strategy runs over orders and
//! seeds, persistence and aggregate tables.
//!
//! Every run writes its own `metrics.json`; tables are computed afterwards
//! from those files only.

mod config;
mod embeddings;
mod run;
mod tables;

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use config::{ExperimentConfig, Strategy, DEFAULT_ORDERS, DEFAULT_SEEDS};
pub use embeddings::{embedding_projection, run_project_embeddings, OverlapDistances, TAG_INDEPENDENT, TAG_JOINT, TAG_WEAVER};
pub use run::{
    prepare_order, run_ablation, run_cross_eval, run_experiment, run_strategy, AblationResult, CrossEvalResult,
    OrderData, RunManifest, RunResult,
};
pub use tables::{aggregate_experiment, CellSummary, ExperimentSummary, PairwiseAso};

use crate::cl::write_atomic;
use crate::error::{Error, Result};

/// Recorded in every run manifest.
pub const PROVENANCE: &str = concat!("weaver-core ", env!("CARGO_PKG_VERSION"));

/// Marker left in an output directory when some runs failed.
pub const FAILED_MARKER: &str = "FAILED";

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub(crate) fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Runs `f(0..n)` on at most `jobs` threads, results in index order.
pub(crate) fn parallel_map<T, F>(jobs: usize, n: usize, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Collects job results. On any failure the successful runs stay on disk,
/// a `FAILED` marker lists what went wrong, and the first error is returned.
pub(crate) fn collect_runs<T>(dir: &Path, labels: &[String], results: Vec<Result<T>>) -> Result<Vec<T>> {
    let marker = dir.join(FAILED_MARKER);
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut first = None;
    for (label, r) in labels.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                first.get_or_insert(e);
            }
        }
    }
    match first {
        None => {
            if marker.exists() {
                fs::remove_file(&marker)?;
            }
            Ok(ok)
        }
        Some(e) => {
            log::error!("{} of {} runs failed", failures.len(), labels.len());
            write_atomic(&marker, (failures.join("\n") + "\n").as_bytes())?;
            Err(e)
        }
    }
}
