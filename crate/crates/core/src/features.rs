//! Frame-average pooling and optional per-dimension standardization.
//!
//! Payloads arrive as `f32`; all accumulation here is done in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EmbeddingRecord, Keyed, Label, LayerDataset};

/// Scale floor for degenerate (constant) dimensions.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Frame-averaged embedding of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledVector {
    pub utt_id: String,
    pub layer: u16,
    pub values: Vec<f64>,
}

impl PooledVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// A `frames = 1` record for the pooled-vector cache file. Values are
    /// narrowed to `f32`.
    pub fn to_record(&self, label: Label) -> Result<EmbeddingRecord> {
        let values = self.values.iter().map(|&v| v as f32).collect();
        Ok(EmbeddingRecord::new(
            self.utt_id.clone(),
            self.layer,
            1,
            self.values.len() as u32,
            values,
        )?
        .with_label(label))
    }
}

impl Keyed for PooledVector {
    fn utt_id(&self) -> &str {
        &self.utt_id
    }
    fn layer(&self) -> u16 {
        self.layer
    }
}

/// Column mean over frames.
pub fn pool(record: &EmbeddingRecord) -> PooledVector {
    let dim = record.dim as usize;
    let mut acc = vec![0.0f64; dim];
    for row in record.rows() {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v as f64;
        }
    }
    let n = record.frames as f64;
    for a in &mut acc {
        *a /= n;
    }
    PooledVector {
        utt_id: record.utt_id.clone(),
        layer: record.layer,
        values: acc,
    }
}

pub fn pool_dataset(ds: LayerDataset<EmbeddingRecord>) -> LayerDataset<PooledVector> {
    ds.map(|r| pool(&r))
}

/// Per-dimension affine standardizer fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Mean and population standard deviation (divisor `N`), scale floored at
    /// [`SCALE_FLOOR`].
    pub fn fit<'a, I>(train: I) -> Result<Standardizer>
    where
        I: IntoIterator<Item = &'a PooledVector>,
    {
        let vectors: Vec<&PooledVector> = train.into_iter().collect();
        if vectors.len() < 2 {
            return Err(Error::usage(format!(
                "standardizer needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let dim = vectors[0].dim();
        if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
            return Err(Error::usage(format!(
                "{}: length {} differs from {dim}",
                v.utt_id,
                v.dim()
            )));
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in &vectors {
            for (m, x) in mean.iter_mut().zip(&v.values) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in &vectors {
            for ((s, x), m) in var.iter_mut().zip(&v.values).zip(&mean) {
                let d = x - m;
                *s += d * d;
            }
        }
        let scale = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(SCALE_FLOOR))
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn identity(dim: usize) -> Standardizer {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, v: &PooledVector) -> Result<PooledVector> {
        Ok(PooledVector {
            utt_id: v.utt_id.clone(),
            layer: v.layer,
            values: self.transform_slice(&v.values)?,
        })
    }

    pub fn transform_slice(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::usage(format!(
                "vector length {} does not match standardizer dim {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn transform_dataset(
        &self,
        ds: &LayerDataset<PooledVector>,
    ) -> Result<LayerDataset<PooledVector>> {
        ds.clone().try_map(|v| self.transform(&v))
    }
}

/// Convenience for `Standardizer::fit` over a dataset's vectors.
pub fn fit_standardizer(train: &LayerDataset<PooledVector>) -> Result<Standardizer> {
    Standardizer::fit(train.items.iter().map(|i| &i.features))
}
