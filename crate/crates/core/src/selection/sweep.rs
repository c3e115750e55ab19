use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_grid_in_pool, with_pool, GridResult, GridSpec};
use crate::classifiers::Algorithm;
use crate::error::{Error, Result};
use crate::features::PooledVector;
use crate::store::LayerDataset;

/// Pooled train/dev/eval partitions of one layer.
#[derive(Debug, Clone)]
pub struct LayerData {
    pub train: LayerDataset<PooledVector>,
    pub dev: LayerDataset<PooledVector>,
    pub eval: LayerDataset<PooledVector>,
}

/// Supplies layers one at a time so a sweep never holds all of them.
pub trait LayerSource: Sync {
    /// `Ok(None)` when the layer is not available.
    fn load(&self, layer: u16) -> Result<Option<Cow<'_, LayerData>>>;
}

impl LayerSource for BTreeMap<u16, LayerData> {
    fn load(&self, layer: u16) -> Result<Option<Cow<'_, LayerData>>> {
        Ok(self.get(&layer).map(Cow::Borrowed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepEntry {
    Done(GridResult),
    /// Layer files were not found.
    Absent {
        algorithm: Algorithm,
        layer: u16,
    },
    Failed {
        algorithm: Algorithm,
        layer: u16,
        reason: String,
    },
}

impl SweepEntry {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            SweepEntry::Done(r) => r.algorithm,
            SweepEntry::Absent { algorithm, .. } | SweepEntry::Failed { algorithm, .. } => {
                *algorithm
            }
        }
    }

    pub fn layer(&self) -> u16 {
        match self {
            SweepEntry::Done(r) => r.layer,
            SweepEntry::Absent { layer, .. } | SweepEntry::Failed { layer, .. } => *layer,
        }
    }

    pub fn result(&self) -> Option<&GridResult> {
        match self {
            SweepEntry::Done(r) => Some(r),
            _ => None,
        }
    }
}

/// Which partition the aggregate EER/F1 figures come from. Eval is used when
/// every completed entry has eval labels, dev otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricBasis {
    Eval,
    Dev,
}

impl MetricBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricBasis::Eval => "eval",
            MetricBasis::Dev => "dev",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgminPair {
    pub algorithm: Algorithm,
    pub layer: u16,
    /// Fraction on [`SweepResult::basis`].
    pub eer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub algorithms: Vec<Algorithm>,
    pub layers: Vec<u16>,
    /// Algorithm-major, layers ascending.
    pub entries: Vec<SweepEntry>,
    pub basis: MetricBasis,
    pub argmin: Option<ArgminPair>,
}

impl SweepResult {
    pub fn entry(&self, algorithm: Algorithm, layer: u16) -> Option<&SweepEntry> {
        self.entries
            .iter()
            .find(|e| e.algorithm() == algorithm && e.layer() == layer)
    }

    /// EER fraction of the selected cell on the sweep's basis.
    pub fn eer_of(&self, r: &GridResult) -> Option<f64> {
        match self.basis {
            MetricBasis::Eval => r.eval.map(|m| m.eer),
            MetricBasis::Dev => r.chosen_cell().dev_eer,
        }
    }

    pub fn f1_of(&self, r: &GridResult) -> Option<f64> {
        match self.basis {
            MetricBasis::Eval => r.eval.map(|m| m.f1),
            MetricBasis::Dev => r.chosen_cell().dev_f1,
        }
    }

    /// Per algorithm, the EER of every requested layer (`None` when absent).
    pub fn eer_by_algorithm(&self) -> Vec<(Algorithm, Vec<Option<f64>>)> {
        self.algorithms
            .iter()
            .map(|&a| {
                let v = self
                    .layers
                    .iter()
                    .map(|&l| {
                        self.entry(a, l)
                            .and_then(|e| e.result())
                            .and_then(|r| self.eer_of(r))
                    })
                    .collect();
                (a, v)
            })
            .collect()
    }

    /// Per layer, the EER of every requested algorithm.
    pub fn eer_by_layer(&self) -> Vec<(u16, Vec<Option<f64>>)> {
        self.layers
            .iter()
            .map(|&l| {
                let v = self
                    .algorithms
                    .iter()
                    .map(|&a| {
                        self.entry(a, l)
                            .and_then(|e| e.result())
                            .and_then(|r| self.eer_of(r))
                    })
                    .collect();
                (l, v)
            })
            .collect()
    }

    pub fn f1_by_algorithm(&self) -> Vec<(Algorithm, Vec<Option<f64>>)> {
        self.algorithms
            .iter()
            .map(|&a| {
                let v = self
                    .layers
                    .iter()
                    .map(|&l| {
                        self.entry(a, l)
                            .and_then(|e| e.result())
                            .and_then(|r| self.f1_of(r))
                    })
                    .collect();
                (a, v)
            })
            .collect()
    }

    pub fn completed(&self) -> impl Iterator<Item = &GridResult> {
        self.entries.iter().filter_map(SweepEntry::result)
    }
}

/// One grid search per (algorithm, layer). Layers are loaded one at a time;
/// within a layer all grid cells of all algorithms share the worker pool.
pub fn run_sweep<S: LayerSource>(
    grids: &[GridSpec],
    layers: &[u16],
    source: &S,
    jobs: usize,
) -> Result<SweepResult> {
    if grids.is_empty() || layers.is_empty() {
        return Err(Error::usage(
            "a sweep needs at least one algorithm and one layer",
        ));
    }
    let mut seen = HashSet::new();
    if !grids.iter().all(|g| seen.insert(g.algorithm)) {
        return Err(Error::usage(
            "each algorithm may appear only once in a sweep",
        ));
    }
    let mut sorted = layers.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != layers.len() {
        return Err(Error::usage("duplicate layer in sweep"));
    }

    let mut by_layer: BTreeMap<u16, Vec<SweepEntry>> = BTreeMap::new();
    for &layer in &sorted {
        let entries = match source.load(layer)? {
            None => {
                log::warn!("layer {layer} not available, marked absent");
                grids
                    .iter()
                    .map(|g| SweepEntry::Absent {
                        algorithm: g.algorithm,
                        layer,
                    })
                    .collect()
            }
            Some(data) => with_pool(jobs, || {
                grids
                    .par_iter()
                    .map(
                        |g| match run_grid_in_pool(g, &data.train, &data.dev, &data.eval) {
                            Ok(out) => SweepEntry::Done(out.result),
                            Err(e) => {
                                log::warn!("{} on layer {layer} failed: {e}", g.algorithm);
                                SweepEntry::Failed {
                                    algorithm: g.algorithm,
                                    layer,
                                    reason: e.to_string(),
                                }
                            }
                        },
                    )
                    .collect()
            })?,
        };
        by_layer.insert(layer, entries);
    }

    let mut entries = Vec::with_capacity(grids.len() * sorted.len());
    for (gi, _) in grids.iter().enumerate() {
        for l in &sorted {
            entries.push(by_layer[l][gi].clone());
        }
    }
    if entries.iter().all(|e| e.result().is_none()) {
        return Err(Error::Run("sweep produced no completed grid search".into()));
    }

    let basis = if entries
        .iter()
        .filter_map(SweepEntry::result)
        .all(|r| r.eval.is_some())
    {
        MetricBasis::Eval
    } else {
        MetricBasis::Dev
    };
    let mut result = SweepResult {
        algorithms: grids.iter().map(|g| g.algorithm).collect(),
        layers: sorted,
        entries,
        basis,
        argmin: None,
    };
    // ties go to the lower layer, then the earlier algorithm in `Algorithm`
    // order, so the winner does not depend on how the grids were listed
    let mut best: Option<ArgminPair> = None;
    for r in result.completed() {
        if let Some(e) = result.eer_of(r) {
            let better = best.is_none_or(|b| {
                e < b.eer || (e == b.eer && (r.layer, r.algorithm) < (b.layer, b.algorithm))
            });
            if better {
                best = Some(ArgminPair {
                    algorithm: r.algorithm,
                    layer: r.layer,
                    eer: e,
                });
            }
        }
    }
    result.argmin = best;
    Ok(result)
}
