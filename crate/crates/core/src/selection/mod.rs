//! Brute-force grid search, layer sweeps and report rendering.
//!
//! Every grid cell is fitted on train and scored on dev. The winner maximizes
//! dev F1, with ties going to the smaller model and then to the earlier cell.
//! Eval is scored exactly once, for the winner, after selection.

mod layout;
mod pca;
mod report;
mod sweep;

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    fit_samples, Algorithm, Criterion, FitStatus, Hyperparams, LrSchedule, ModelBundle, OutputHead,
    Samples, TrainConfig,
};
use crate::error::{Error, Result};
use crate::features::{PooledVector, Standardizer};
use crate::metrics::{eer, f1, ScoredSet};
use crate::store::{Label, LayerDataset};

pub use layout::DataLayout;
pub use pca::{pca_scatter, ScatterPoint};
pub use report::{
    boxplot_by_algorithm, boxplot_by_layer, cells_csv, grid_csv, grid_markdown, render_grid,
    render_sweep, scatter_csv, sweep_csv, sweep_markdown, write_grid_report, write_sweep_report,
    ReportFormat, ReportOptions, SummaryRow, CSV_HEADER,
};
pub use sweep::{
    run_sweep, ArgminPair, LayerData, LayerSource, MetricBasis, SweepEntry, SweepResult,
};

pub const DEFAULT_SEED: u64 = 1919;

/// The cells of one search, in enumeration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub algorithm: Algorithm,
    pub cells: Vec<Hyperparams>,
    pub standardize: bool,
    pub seed: u64,
    /// Overrides the algorithm's default F1 threshold.
    pub threshold: Option<f64>,
}

impl GridSpec {
    pub fn new(algorithm: Algorithm, cells: Vec<Hyperparams>) -> Result<GridSpec> {
        if cells.is_empty() {
            return Err(Error::usage(format!("empty grid for {algorithm}")));
        }
        for c in &cells {
            if c.algorithm() != algorithm {
                return Err(Error::usage(format!(
                    "{} cell in a {algorithm} grid",
                    c.algorithm()
                )));
            }
            c.validate()?;
        }
        Ok(GridSpec {
            algorithm,
            cells,
            standardize: false,
            seed: DEFAULT_SEED,
            threshold: None,
        })
    }

    /// The published search space. Products enumerate with the first-listed
    /// hyperparameter outermost; MLP cells use a single sigmoid output.
    pub fn table1(algorithm: Algorithm) -> GridSpec {
        let cells = match algorithm {
            Algorithm::Knn => [3, 5, 6].map(|k| Hyperparams::Knn { k }).to_vec(),
            Algorithm::LogReg => [0.2, 0.1, 10.0].map(|c| Hyperparams::LogReg { c }).to_vec(),
            Algorithm::SvmRbf => [0.2, 0.1, 1.0]
                .map(|c| Hyperparams::SvmRbf { c, gamma: None })
                .to_vec(),
            Algorithm::GaussianNb => vec![Hyperparams::GaussianNb {
                var_smoothing: 1e-9,
            }],
            Algorithm::DecisionTree => {
                let mut v = Vec::new();
                for criterion in [Criterion::Gini, Criterion::Entropy] {
                    for max_depth in [50, 100, 150] {
                        v.push(Hyperparams::DecisionTree {
                            criterion,
                            max_depth,
                        });
                    }
                }
                v
            }
            Algorithm::Mlp => {
                let mut v = Vec::new();
                for hidden in [50, 100] {
                    for batch_size in [32, 64] {
                        for schedule in [LrSchedule::Constant, LrSchedule::InvScaling] {
                            v.push(Hyperparams::Mlp {
                                hidden,
                                batch_size,
                                schedule,
                                alpha: 1e-4,
                                head: OutputHead::Sigmoid,
                            });
                        }
                    }
                }
                v
            }
        };
        GridSpec::new(algorithm, cells).expect("published grids are valid")
    }

    pub fn single(hyper: Hyperparams) -> Result<GridSpec> {
        GridSpec::new(hyper.algorithm(), vec![hyper])
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threshold(mut self, threshold: Option<f64>) -> Self {
        self.threshold = threshold;
        self
    }

    /// Replaces the output head of every MLP cell.
    pub fn with_mlp_head(mut self, new_head: OutputHead) -> Self {
        for c in &mut self.cells {
            if let Hyperparams::Mlp { head, .. } = c {
                *head = new_head;
            }
        }
        self
    }

    /// Keeps only cells whose canonical string is listed, in grid order.
    pub fn restrict(mut self, canonical: &[String]) -> Result<GridSpec> {
        self.cells.retain(|c| canonical.contains(&c.canonical()));
        if self.cells.is_empty() {
            return Err(Error::usage(format!(
                "no {} grid cell matches {canonical:?}",
                self.algorithm
            )));
        }
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
            .unwrap_or_else(|| self.algorithm.default_threshold())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    /// Fitted, but the optimizer stopped at its cap.
    NotConverged(String),
    Failed(String),
}

impl CellStatus {
    pub fn is_usable(&self) -> bool {
        !matches!(self, CellStatus::Failed(_))
    }

    pub fn label(&self) -> String {
        match self {
            CellStatus::Ok => "ok".into(),
            CellStatus::NotConverged(r) => format!("not_converged: {r}"),
            CellStatus::Failed(r) => format!("failed: {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub hyper: Hyperparams,
    pub status: CellStatus,
    pub dev_f1: Option<f64>,
    /// Fraction, not percent.
    pub dev_eer: Option<f64>,
    pub param_count: Option<usize>,
    pub train_seconds: f64,
    pub state_bytes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub f1: f64,
    pub eer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub algorithm: Algorithm,
    pub layer: u16,
    pub standardized: bool,
    pub seed: u64,
    pub threshold: f64,
    /// Training-set cardinality.
    pub train_size: usize,
    pub cells: Vec<CellRecord>,
    /// Index into `cells`.
    pub chosen: usize,
    /// Absent when the eval partition carries no labels.
    pub eval: Option<EvalMetrics>,
    pub param_convention: String,
}

impl GridResult {
    pub fn chosen_cell(&self) -> &CellRecord {
        &self.cells[self.chosen]
    }

    pub fn param_count(&self) -> usize {
        self.chosen_cell().param_count.unwrap_or(0)
    }
}

/// The search record plus the fitted winner.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub result: GridResult,
    pub model: ModelBundle,
    /// Winner's scores on eval, in eval item order.
    pub eval_scores: Vec<f64>,
}

/// Winner index under max F1, then fewer parameters, then enumeration order.
pub fn select_cell(cells: &[CellRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        let (Some(f), Some(p)) = (c.dev_f1, c.param_count) else {
            continue;
        };
        best = match best {
            None => Some(i),
            Some(b) => {
                let (bf, bp) = (cells[b].dev_f1.unwrap(), cells[b].param_count.unwrap());
                if f > bf || (f == bf && p < bp) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn check_disjoint(parts: &[&LayerDataset<PooledVector>]) -> Result<()> {
    let mut seen = HashSet::new();
    for p in parts {
        for item in &p.items {
            if !seen.insert(item.utt_id.as_str()) {
                return Err(Error::usage(format!(
                    "utterance {} appears in more than one partition",
                    item.utt_id
                )));
            }
        }
    }
    Ok(())
}

fn matrix(ds: &LayerDataset<PooledVector>, std: Option<&Standardizer>) -> Result<Vec<Vec<f64>>> {
    ds.items
        .iter()
        .map(|i| match std {
            Some(s) => s.transform_slice(&i.features.values),
            None => Ok(i.features.values.clone()),
        })
        .collect()
}

/// Runs the grid with at most `jobs` worker threads.
pub fn run_grid(
    spec: &GridSpec,
    train: &LayerDataset<PooledVector>,
    dev: &LayerDataset<PooledVector>,
    eval: &LayerDataset<PooledVector>,
    jobs: usize,
) -> Result<GridOutcome> {
    with_pool(jobs, || run_grid_in_pool(spec, train, dev, eval))?
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Run(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn run_grid_in_pool(
    spec: &GridSpec,
    train: &LayerDataset<PooledVector>,
    dev: &LayerDataset<PooledVector>,
    eval: &LayerDataset<PooledVector>,
) -> Result<GridOutcome> {
    if spec.is_empty() {
        return Err(Error::usage("empty grid"));
    }
    if train.layer != dev.layer || train.layer != eval.layer {
        return Err(Error::usage(format!(
            "layer mismatch: train {}, dev {}, eval {}",
            train.layer, dev.layer, eval.layer
        )));
    }
    check_disjoint(&[train, dev, eval])?;

    let standardizer = if spec.standardize {
        Some(crate::features::fit_standardizer(train)?)
    } else {
        None
    };
    let x_train = Samples::from_rows(
        &matrix(train, standardizer.as_ref())?,
        train.labels().collect(),
    )?;
    let x_dev = Samples::from_rows(&matrix(dev, standardizer.as_ref())?, dev.labels().collect())?;
    // validates dev before any fitting
    ScoredSet::new(vec![0.0; x_dev.len()], x_dev.y.clone())?;
    let x_eval = matrix(eval, standardizer.as_ref())?;
    let threshold = spec.threshold();

    let fitted: Vec<_> = spec
        .cells
        .par_iter()
        .enumerate()
        .map(|(index, &hyper)| {
            let config = TrainConfig::new(hyper, spec.seed);
            let start = Instant::now();
            let fit = fit_samples(&config, &x_train, Some(&x_dev));
            let train_seconds = start.elapsed().as_secs_f64();
            let scored = fit.and_then(|m| {
                let scores = m.score_samples(&x_dev)?;
                let set = ScoredSet::new(scores, x_dev.y.clone())?;
                Ok((m, set))
            });
            match scored {
                Ok((m, set)) => {
                    let status = match &m.status {
                        FitStatus::Converged { .. } => CellStatus::Ok,
                        FitStatus::NotConverged { reason, .. } => {
                            log::warn!("{} {}: {reason}", spec.algorithm, hyper.canonical());
                            CellStatus::NotConverged(reason.clone())
                        }
                    };
                    let record = CellRecord {
                        index,
                        hyper,
                        status,
                        dev_f1: Some(f1(&set, threshold)),
                        dev_eer: Some(eer(&set)),
                        param_count: Some(m.param_count()),
                        train_seconds,
                        state_bytes: Some(m.state_bytes()),
                    };
                    (record, Some(m))
                }
                Err(e) => {
                    log::warn!("{} {} failed: {e}", spec.algorithm, hyper.canonical());
                    let record = CellRecord {
                        index,
                        hyper,
                        status: CellStatus::Failed(e.to_string()),
                        dev_f1: None,
                        dev_eer: None,
                        param_count: None,
                        train_seconds,
                        state_bytes: None,
                    };
                    (record, None)
                }
            }
        })
        .collect();

    let (cells, mut models): (Vec<CellRecord>, Vec<_>) = fitted.into_iter().unzip();
    let chosen = select_cell(&cells).ok_or_else(|| {
        Error::Run(format!(
            "every {} grid cell failed on layer {}",
            spec.algorithm, train.layer
        ))
    })?;
    let winner = models[chosen].take().expect("usable cell has a model");

    let eval_scores = x_eval
        .iter()
        .map(|x| winner.score(x))
        .collect::<Result<Vec<f64>>>()?;
    let eval_labels: Vec<Label> = eval.labels().collect();
    let eval_metrics = if !eval_labels.is_empty() && eval_labels.iter().all(|l| l.is_known()) {
        match ScoredSet::new(eval_scores.clone(), eval_labels) {
            Ok(set) => Some(EvalMetrics {
                f1: f1(&set, threshold),
                eer: eer(&set),
            }),
            Err(e) => {
                log::warn!("eval metrics unavailable: {e}");
                None
            }
        }
    } else {
        None
    };

    let param_convention = winner.param_count_convention();
    Ok(GridOutcome {
        result: GridResult {
            algorithm: spec.algorithm,
            layer: train.layer,
            standardized: spec.standardize,
            seed: spec.seed,
            threshold,
            train_size: train.len(),
            cells,
            chosen,
            eval: eval_metrics,
            param_convention,
        },
        model: ModelBundle {
            scorer: winner,
            standardizer,
            layer: train.layer,
            threshold,
        },
        eval_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(index: usize, f: Option<f64>, p: Option<usize>) -> CellRecord {
        CellRecord {
            index,
            hyper: Hyperparams::Knn { k: 3 },
            status: if f.is_some() {
                CellStatus::Ok
            } else {
                CellStatus::Failed("x".into())
            },
            dev_f1: f,
            dev_eer: f.map(|_| 0.1),
            param_count: p,
            train_seconds: 0.0,
            state_bytes: None,
        }
    }

    #[test]
    fn table1_cardinalities() {
        let sizes: Vec<usize> = Algorithm::ALL
            .iter()
            .map(|&a| GridSpec::table1(a).len())
            .collect();
        assert_eq!(sizes, vec![3, 3, 3, 1, 6, 8]);
    }

    #[test]
    fn selection_prefers_f1_then_size_then_order() {
        let cells = vec![
            cell(0, Some(0.8), Some(10)),
            cell(1, Some(0.9), Some(50)),
            cell(2, Some(0.9), Some(20)),
            cell(3, Some(0.9), Some(20)),
            cell(4, None, None),
        ];
        assert_eq!(select_cell(&cells), Some(2));
        assert_eq!(select_cell(&cells[4..]), None);
    }

    #[test]
    fn restrict_keeps_grid_order() {
        let g = GridSpec::table1(Algorithm::LogReg)
            .restrict(&["C=10".to_string(), "C=0.2".to_string()])
            .unwrap();
        assert_eq!(
            g.cells,
            vec![
                Hyperparams::LogReg { c: 0.2 },
                Hyperparams::LogReg { c: 10.0 }
            ]
        );
        assert!(GridSpec::table1(Algorithm::LogReg)
            .restrict(&["C=3".into()])
            .is_err());
    }
}
