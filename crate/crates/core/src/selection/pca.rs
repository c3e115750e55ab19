use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PooledVector;
use crate::store::{Label, LayerDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub utt_id: String,
    pub label: Label,
    pub x: f64,
    pub y: f64,
}

/// Leading eigenvector of a symmetric PSD matrix by power iteration. The sign
/// is fixed so the largest-magnitude component is positive.
fn leading_eigenvector(c: &Array2<f64>, seed_shift: f64) -> Array1<f64> {
    let d = c.nrows();
    let mut v = Array1::from_shape_fn(d, |j| 1.0 + seed_shift * (j as f64 + 1.0) / d as f64);
    v /= v.dot(&v).sqrt();
    for _ in 0..2000 {
        let mut w = c.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            break;
        }
        w /= norm;
        let delta = (&w - &v).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        v = w;
        if delta < 1e-12 {
            break;
        }
    }
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    if pivot < 0.0 {
        v.mapv_inplace(|x| -x);
    }
    v
}

/// Projects a pooled dataset on its first two principal components.
pub fn pca_scatter(ds: &LayerDataset<PooledVector>) -> Result<Vec<ScatterPoint>> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::usage("a scatter needs at least 2 vectors"));
    }
    let d = ds.items[0].features.dim();
    let flat: Vec<f64> = ds
        .items
        .iter()
        .flat_map(|i| i.features.values.iter().copied())
        .collect();
    let mut x = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::usage(e.to_string()))?;
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    x -= &mean;
    let cov = x.t().dot(&x) / n as f64;
    let pc1 = leading_eigenvector(&cov, 0.5);
    let lambda1 = pc1.dot(&cov.dot(&pc1));
    let deflated = &cov - &(lambda1 * outer(&pc1));
    let pc2 = leading_eigenvector(&deflated, -0.25);
    let a = x.dot(&pc1);
    let b = x.dot(&pc2);
    Ok(ds
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| ScatterPoint {
            utt_id: item.utt_id.clone(),
            label: item.label,
            x: a[i],
            y: b[i],
        })
        .collect())
}

fn outer(v: &Array1<f64>) -> Array2<f64> {
    let col = v.view().insert_axis(Axis(1));
    let row = v.view().insert_axis(Axis(0));
    col.dot(&row)
}
