//! Two-dimensional PCA projections of token representations and their CSV
//! export.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    pub token: String,
    pub corpus: String,
    pub model_tag: String,
    pub x: f64,
    pub y: f64,
}

/// Fitted projection onto the top two principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-length components, largest variance first.
    pub components: [Vec<f64>; 2],
    pub variances: [f64; 2],
    pub points: Vec<(f64, f64)>,
}

impl Pca {
    /// Maps a projected point back to the original space.
    pub fn reconstruct(&self, p: (f64, f64)) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.components[0])
            .zip(&self.components[1])
            .map(|((m, c0), c1)| m + p.0 * c0 + p.1 * c1)
            .collect()
    }
}

pub fn pca_fit(vectors: &[Vec<f64>]) -> Result<Pca> {
    if vectors.len() < 3 {
        return Err(Error::Argument(format!("PCA needs at least 3 vectors, got {}", vectors.len())));
    }
    let d = vectors[0].len();
    if d < 2 {
        return Err(Error::Argument("PCA to two dimensions needs inputs of dimension ≥ 2".into()));
    }
    if let Some(i) = vectors.iter().position(|v| v.len() != d) {
        return Err(Error::Argument(format!("vector {i} has dimension {} instead of {d}", vectors[i].len())));
    }
    let n = vectors.len();
    let mean: Vec<f64> = (0..d).map(|c| vectors.iter().map(|v| v[c]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |r, c| vectors[r][c] - mean[c]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps lower component index first on equal eigenvalues
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let component = |k: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let dot = |row: usize, c: &[f64]| (0..d).map(|j| centered[(row, j)] * c[j]).sum::<f64>();
    let points = (0..n).map(|r| (dot(r, &components[0]), dot(r, &components[1]))).collect();
    let variances = [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)];
    Ok(Pca { mean, components, variances, points })
}

/// Projects mean-centred vectors onto their top two principal components.
pub fn pca_project(vectors: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    Ok(pca_fit(vectors)?.points)
}

pub fn centroid(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    (sx / n, sy / n)
}

pub fn centroid_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (ca, cb) = (centroid(a), centroid(b));
    ((ca.0 - cb.0).powi(2) + (ca.1 - cb.1).powi(2)).sqrt()
}

/// Six significant digits, fixed notation for moderate magnitudes.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, v)
    } else {
        sci
    }
}

pub fn export_projection(records: &[ProjectionRecord], sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["token", "corpus", "model_tag", "x", "y"])?;
    for r in records {
        if !(r.x.is_finite() && r.y.is_finite()) {
            return Err(Error::Argument(format!("non-finite coordinate for token {}", r.token)));
        }
        w.write_record([&r.token, &r.corpus, &r.model_tag, &format_sig6(r.x), &format_sig6(r.y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_projection(source: impl Read) -> Result<Vec<ProjectionRecord>> {
    let mut r = csv::Reader::from_reader(source);
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}
