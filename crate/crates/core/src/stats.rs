//! Almost Stochastic Order test on score samples.
//!
//! The violation ratio compares the empirical quantile functions of two
//! samples on a fixed grid; the test statistic is a bootstrap upper
//! confidence bound on that ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 1000;
pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsoResult {
    pub eps_min: f64,
    pub tau: f64,
    pub alpha: f64,
    pub bootstrap_n: usize,
    pub seed: u64,
    /// `eps_min < tau`: the first sample almost stochastically dominates.
    pub dominant: bool,
}

/// Empirical quantile of sorted data at `t ∈ [0, 1]`, linear interpolation
/// between order statistics.
pub fn quantile(sorted: &[f64], t: f64) -> f64 {
    let pos = t * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Grid point `k` of the quantile grid: midpoints of `GRID_SIZE` equal cells.
pub fn grid_point(k: usize) -> f64 {
    (k as f64 + 0.5) / GRID_SIZE as f64
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn ratio_sorted(a: &[f64], b: &[f64]) -> f64 {
    let mut violation = 0.0;
    let mut total = 0.0;
    for k in 0..GRID_SIZE {
        let t = grid_point(k);
        let gap = quantile(a, t) - quantile(b, t);
        let sq = gap * gap;
        total += sq;
        if gap < 0.0 {
            violation += sq;
        }
    }
    if total == 0.0 {
        1.0
    } else {
        violation / total
    }
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Argument(format!(
            "samples need at least 2 values each (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Argument("samples must be finite".into()));
    }
    Ok(())
}

/// Share of the squared quantile gap where `a` lies below `b`: 0 when `a`
/// dominates everywhere, 1 when `b` does, 1 by convention when the quantile
/// functions coincide.
pub fn violation_ratio(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    Ok(ratio_sorted(&sorted(a), &sorted(b)))
}

/// `eps_min`: the violation ratio plus `z_{1−α}` bootstrap standard errors,
/// clamped to `[0, 1]`.
pub fn aso(a: &[f64], b: &[f64], alpha: f64, tau: f64, bootstrap_n: usize, seed: u64) -> Result<AsoResult> {
    check_samples(a, b)?;
    if bootstrap_n < 100 {
        return Err(Error::Argument(format!("bootstrap_n must be at least 100, got {bootstrap_n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha {alpha} outside (0, 1)")));
    }
    let sa = sorted(a);
    let sb = sorted(b);
    let eps = ratio_sorted(&sa, &sb);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ra = vec![0.0; a.len()];
    let mut rb = vec![0.0; b.len()];
    let samples: Vec<f64> = (0..bootstrap_n)
        .map(|_| {
            for x in ra.iter_mut() {
                *x = sa[rng.random_range(0..sa.len())];
            }
            for x in rb.iter_mut() {
                *x = sb[rng.random_range(0..sb.len())];
            }
            ra.sort_by(f64::total_cmp);
            rb.sort_by(f64::total_cmp);
            ratio_sorted(&ra, &rb)
        })
        .collect();

    // Scale by sqrt(nm/(n+m)) as in the asymptotic theory; the factor cancels
    // against the 1/sqrt(nm/(n+m)) in the bound.
    let (n, m) = (a.len() as f64, b.len() as f64);
    let scale = (n * m / (n + m)).sqrt();
    let mean = samples.iter().sum::<f64>() / bootstrap_n as f64;
    let var = samples.iter().map(|s| (scale * (s - mean)).powi(2)).sum::<f64>() / (bootstrap_n - 1) as f64;
    let sigma = var.sqrt();
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(alpha);
    let eps_min = (eps - sigma * z / scale).clamp(0.0, 1.0);
    Ok(AsoResult { eps_min, tau, alpha, bootstrap_n, seed, dominant: eps_min < tau })
}
