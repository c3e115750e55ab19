//! Seeded synthetic embeddings for tests, examples and desk-scale checks.
//!
//! Two isotropic Gaussian classes `N(+mu, I)` (bonafide) and `N(-mu, I)`
//! (spoof), with `mu` spread evenly over every dimension. The optimal linear
//! rule then has error `Phi(-|mu|)`. Utterance ids and labels depend only on
//! the seed and partition, so every layer of one synthetic corpus shares them.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::PooledVector;
use crate::selection::{DataLayout, LayerData};
use crate::store::{write_gaie, DatasetItem, EmbeddingRecord, Label, LayerDataset, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub dim: usize,
    /// `|mu|`; 0 makes the classes indistinguishable.
    pub separation: f64,
    pub train: usize,
    pub dev: usize,
    pub eval: usize,
    pub bonafide_fraction: f64,
}

impl BlobSpec {
    /// 768 dims, 1% Bayes error, 2000/500/2000 split, balanced classes.
    pub fn desk_scale() -> BlobSpec {
        BlobSpec {
            dim: 768,
            separation: separation_for_bayes_error(0.01),
            train: 2000,
            dev: 500,
            eval: 2000,
            bonafide_fraction: 0.5,
        }
    }

    pub fn small(dim: usize, separation: f64, n: usize) -> BlobSpec {
        BlobSpec {
            dim,
            separation,
            train: n,
            dev: n,
            eval: n,
            bonafide_fraction: 0.5,
        }
    }

    pub fn count(&self, p: Partition) -> usize {
        match p {
            Partition::Train => self.train,
            Partition::Dev => self.dev,
            Partition::Eval => self.eval,
        }
    }
}

/// `|mu|` such that two unit-variance classes at `+-mu` have Bayes error `err`.
pub fn separation_for_bayes_error(err: f64) -> f64 {
    assert!(err > 0.0 && err < 0.5, "Bayes error must lie in (0, 0.5)");
    -Normal::standard().inverse_cdf(err)
}

/// Bayes error of the two classes at separation `s`.
pub fn bayes_error(separation: f64) -> f64 {
    Normal::standard().cdf(-separation)
}

fn partition_stream(p: Partition) -> u64 {
    match p {
        Partition::Train => 1,
        Partition::Dev => 2,
        Partition::Eval => 3,
    }
}

fn id_prefix(p: Partition) -> &'static str {
    match p {
        Partition::Train => "SYN_T",
        Partition::Dev => "SYN_D",
        Partition::Eval => "SYN_E",
    }
}

/// Ids and labels of one partition. Exactly `round(n * fraction)` bonafide.
pub fn labels(spec: &BlobSpec, p: Partition, seed: u64) -> Vec<(String, Label)> {
    let n = spec.count(p);
    let nb = (n as f64 * spec.bonafide_fraction).round() as usize;
    let mut labels: Vec<Label> = (0..n)
        .map(|i| {
            if i < nb {
                Label::Bonafide
            } else {
                Label::Spoof
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(partition_stream(p));
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| (format!("{}_{:07}", id_prefix(p), i), l))
        .collect()
}

/// Pooled vectors of one partition for `layer` at the given separation.
pub fn blob_partition(
    spec: &BlobSpec,
    separation: f64,
    p: Partition,
    layer: u16,
    seed: u64,
) -> LayerDataset<PooledVector> {
    let mu = separation / (spec.dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (u64::from(layer) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
    );
    rng.set_stream(partition_stream(p));
    let items = labels(spec, p, seed)
        .into_iter()
        .map(|(utt_id, label)| {
            let sign = if label == Label::Bonafide { 1.0 } else { -1.0 };
            let values = (0..spec.dim)
                .map(|_| sign * mu + rng.sample::<f64, _>(StandardNormal))
                .collect();
            DatasetItem {
                features: PooledVector {
                    utt_id: utt_id.clone(),
                    layer,
                    values,
                },
                utt_id,
                label,
            }
        })
        .collect();
    LayerDataset {
        layer,
        partition: p,
        items,
    }
}

pub fn blobs(spec: &BlobSpec, layer: u16, seed: u64) -> LayerData {
    blobs_with_separation(spec, spec.separation, layer, seed)
}

pub fn blobs_with_separation(spec: &BlobSpec, separation: f64, layer: u16, seed: u64) -> LayerData {
    LayerData {
        train: blob_partition(spec, separation, Partition::Train, layer, seed),
        dev: blob_partition(spec, separation, Partition::Dev, layer, seed),
        eval: blob_partition(spec, separation, Partition::Eval, layer, seed),
    }
}

/// Expands pooled vectors into frame-level records whose frame mean is the
/// pooled vector (up to 32-bit rounding). Frame counts are drawn from
/// `frames.0..=frames.1`; frames deviate from the mean by `N(0, noise^2)`.
pub fn frame_records(
    ds: &LayerDataset<PooledVector>,
    frames: (u32, u32),
    noise: f64,
    seed: u64,
) -> Result<Vec<EmbeddingRecord>> {
    if frames.0 == 0 || frames.0 > frames.1 {
        return Err(Error::usage("frame range must satisfy 1 <= lo <= hi"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(ds.layer) * 4 + partition_stream(ds.partition));
    ds.items
        .iter()
        .map(|item| {
            let v = &item.features.values;
            let d = v.len();
            let n = rng.random_range(frames.0..=frames.1) as usize;
            let mut dev: Vec<f64> = (0..n * d)
                .map(|_| noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for j in 0..d {
                let m = (0..n).map(|i| dev[i * d + j]).sum::<f64>() / n as f64;
                for i in 0..n {
                    dev[i * d + j] -= m;
                }
            }
            let values = (0..n * d).map(|k| (v[k % d] + dev[k]) as f32).collect();
            Ok(
                EmbeddingRecord::new(&item.utt_id, ds.layer, n as u32, d as u32, values)?
                    .with_label(item.label),
            )
        })
        .collect()
}

/// Protocol text in the five-field format. Spoof rows cycle through six
/// attack ids.
pub fn protocol_text(ds: &LayerDataset<PooledVector>) -> String {
    let mut s = String::new();
    for (i, item) in ds.items.iter().enumerate() {
        let attack = match item.label {
            Label::Bonafide => "-".to_string(),
            _ => format!("A{:02}", i % 6 + 1),
        };
        let key = match item.label {
            Label::Bonafide => "bonafide",
            _ => "spoof",
        };
        let _ = writeln!(s, "SPK_{:04} {} - {attack} {key}", i % 40, item.utt_id);
    }
    s
}

/// How [`write_layer`] stores vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameMode {
    /// One frame per record.
    Pooled,
    /// Frame-level records as produced by [`frame_records`].
    Frames { min: u32, max: u32, noise: f64 },
}

/// Writes the three embedding files of one layer under `layout`.
pub fn write_layer(
    layout: &DataLayout,
    data: &LayerData,
    mode: FrameMode,
    seed: u64,
) -> Result<()> {
    fs::create_dir_all(&layout.root)?;
    for ds in [&data.train, &data.dev, &data.eval] {
        let records = match mode {
            FrameMode::Pooled => ds
                .items
                .iter()
                .map(|i| i.features.to_record(i.label))
                .collect::<Result<Vec<_>>>()?,
            FrameMode::Frames { min, max, noise } => frame_records(ds, (min, max), noise, seed)?,
        };
        let dim = ds.items.first().map(|i| i.features.dim()).unwrap_or(0) as u32;
        let f = File::create(layout.gaie_path(ds.partition, ds.layer))?;
        write_gaie(dim, ds.layer, &records, BufWriter::new(f))?;
    }
    Ok(())
}

/// Writes the three protocol files. Labels are shared by all layers, so one
/// layer's data suffices.
pub fn write_protocols(layout: &DataLayout, data: &LayerData) -> Result<()> {
    fs::create_dir_all(&layout.root)?;
    for ds in [&data.train, &data.dev, &data.eval] {
        fs::write(layout.protocol_path(ds.partition), protocol_text(ds))?;
    }
    Ok(())
}

/// A corpus where only `signal_layers` separate the classes; every other
/// layer is pure noise.
pub fn planted_corpus(
    spec: &BlobSpec,
    layers: &[u16],
    signal_layers: &[u16],
    seed: u64,
) -> std::collections::BTreeMap<u16, LayerData> {
    layers
        .iter()
        .map(|&l| {
            let sep = if signal_layers.contains(&l) {
                spec.separation
            } else {
                0.0
            };
            (l, blobs_with_separation(spec, sep, l, seed))
        })
        .collect()
}
