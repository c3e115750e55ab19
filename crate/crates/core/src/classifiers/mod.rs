//! Six classical back-ends behind one fit/score contract.
//!
//! Every fitted model produces a real-valued score where higher means more
//! bonafide. Fitting is single-threaded and fully determined by
//! `(config, data, seed)`.

pub mod knn;
pub mod logreg;
pub mod mlp;
pub mod naive_bayes;
mod persist;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PooledVector;
use crate::store::{Label, LayerDataset};

pub use persist::{read_model, read_model_file, write_model, write_model_file, ModelBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Knn,
    LogReg,
    SvmRbf,
    GaussianNb,
    DecisionTree,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Knn,
        Algorithm::LogReg,
        Algorithm::SvmRbf,
        Algorithm::GaussianNb,
        Algorithm::DecisionTree,
        Algorithm::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::LogReg => "logreg",
            Algorithm::SvmRbf => "svm_rbf",
            Algorithm::GaussianNb => "gaussian_nb",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::Mlp => "mlp",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Algorithm::Knn => 1,
            Algorithm::LogReg => 2,
            Algorithm::SvmRbf => 3,
            Algorithm::GaussianNb => 4,
            Algorithm::DecisionTree => 5,
            Algorithm::Mlp => 6,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.tag() == tag)
    }

    /// Whether scores live on a probability-like `[0, 1]` scale (as opposed to
    /// a margin or log-likelihood ratio centred on zero).
    pub fn probability_scores(self) -> bool {
        !matches!(self, Algorithm::SvmRbf | Algorithm::GaussianNb)
    }

    /// Decision threshold used for F1 unless overridden: 0.5 on probability-like
    /// scores, 0 on margins and log-likelihood ratios.
    pub fn default_threshold(self) -> f64 {
        if self.probability_scores() {
            0.5
        } else {
            0.0
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            _ => Err(Error::usage(format!("unknown split criterion {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LrSchedule {
    Constant,
    /// `lr0 / sqrt(epoch)`, epochs counted from 1.
    InvScaling,
}

impl LrSchedule {
    pub fn name(self) -> &'static str {
        match self {
            LrSchedule::Constant => "constant",
            LrSchedule::InvScaling => "invscaling",
        }
    }
}

impl FromStr for LrSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "invscaling" => Ok(LrSchedule::InvScaling),
            _ => Err(Error::usage(format!(
                "unknown learning-rate schedule {s:?}"
            ))),
        }
    }
}

/// Output layer of the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputHead {
    /// One unit with a sigmoid.
    Sigmoid,
    /// Two units (spoof, bonafide) with a softmax.
    SoftmaxPair,
}

impl OutputHead {
    pub fn name(self) -> &'static str {
        match self {
            OutputHead::Sigmoid => "sigmoid",
            OutputHead::SoftmaxPair => "softmax_pair",
        }
    }

    pub fn outputs(self) -> usize {
        match self {
            OutputHead::Sigmoid => 1,
            OutputHead::SoftmaxPair => 2,
        }
    }
}

impl FromStr for OutputHead {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(OutputHead::Sigmoid),
            "softmax_pair" => Ok(OutputHead::SoftmaxPair),
            _ => Err(Error::usage(format!("unknown output head {s:?}"))),
        }
    }
}

/// Hyperparameters of one grid cell. The variant fixes the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Hyperparams {
    Knn {
        k: usize,
    },
    LogReg {
        /// Inverse regularization strength; the L2 penalty is `|w|^2 / (2C)`.
        c: f64,
    },
    SvmRbf {
        c: f64,
        /// `None` selects `1 / (dim * mean per-dimension variance)`.
        gamma: Option<f64>,
    },
    GaussianNb {
        var_smoothing: f64,
    },
    DecisionTree {
        criterion: Criterion,
        max_depth: usize,
    },
    Mlp {
        hidden: usize,
        batch_size: usize,
        schedule: LrSchedule,
        alpha: f64,
        head: OutputHead,
    },
}

impl Hyperparams {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Hyperparams::Knn { .. } => Algorithm::Knn,
            Hyperparams::LogReg { .. } => Algorithm::LogReg,
            Hyperparams::SvmRbf { .. } => Algorithm::SvmRbf,
            Hyperparams::GaussianNb { .. } => Algorithm::GaussianNb,
            Hyperparams::DecisionTree { .. } => Algorithm::DecisionTree,
            Hyperparams::Mlp { .. } => Algorithm::Mlp,
        }
    }

    /// `key=value` pairs joined by `;`, keys in a fixed order.
    pub fn canonical(&self) -> String {
        match *self {
            Hyperparams::Knn { k } => format!("k={k}"),
            Hyperparams::LogReg { c } => format!("C={c}"),
            Hyperparams::SvmRbf { c, gamma } => match gamma {
                Some(g) => format!("C={c};gamma={g}"),
                None => format!("C={c};gamma=scale"),
            },
            Hyperparams::GaussianNb { var_smoothing } => format!("var_smoothing={var_smoothing}"),
            Hyperparams::DecisionTree {
                criterion,
                max_depth,
            } => format!("criterion={};max_depth={max_depth}", criterion.name()),
            Hyperparams::Mlp {
                hidden,
                batch_size,
                schedule,
                alpha,
                head,
            } => format!(
                "hidden={hidden};batch_size={batch_size};learning_rate={};alpha={alpha};head={}",
                schedule.name(),
                head.name()
            ),
        }
    }

    /// Inverse of [`Hyperparams::canonical`]. Unknown or missing keys are
    /// usage errors.
    pub fn parse(algorithm: Algorithm, canonical: &str) -> Result<Hyperparams> {
        let mut pairs = std::collections::BTreeMap::new();
        for part in canonical.split(';').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("malformed hyperparameter {part:?}")))?;
            pairs.insert(k.trim(), v.trim());
        }
        let mut take = |key: &str| -> Result<&str> {
            pairs
                .remove(key)
                .ok_or_else(|| Error::usage(format!("{algorithm}: missing hyperparameter {key:?}")))
        };
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::usage(format!("bad value {v:?} for {key}")))
        }
        let hp = match algorithm {
            Algorithm::Knn => Hyperparams::Knn {
                k: num("k", take("k")?)?,
            },
            Algorithm::LogReg => Hyperparams::LogReg {
                c: num("C", take("C")?)?,
            },
            Algorithm::SvmRbf => Hyperparams::SvmRbf {
                c: num("C", take("C")?)?,
                gamma: match take("gamma")? {
                    "scale" => None,
                    g => Some(num("gamma", g)?),
                },
            },
            Algorithm::GaussianNb => Hyperparams::GaussianNb {
                var_smoothing: num("var_smoothing", take("var_smoothing")?)?,
            },
            Algorithm::DecisionTree => Hyperparams::DecisionTree {
                criterion: take("criterion")?.parse()?,
                max_depth: num("max_depth", take("max_depth")?)?,
            },
            Algorithm::Mlp => Hyperparams::Mlp {
                hidden: num("hidden", take("hidden")?)?,
                batch_size: num("batch_size", take("batch_size")?)?,
                schedule: take("learning_rate")?.parse()?,
                alpha: num("alpha", take("alpha")?)?,
                head: take("head")?.parse()?,
            },
        };
        if let Some(extra) = pairs.keys().next() {
            return Err(Error::usage(format!(
                "{algorithm}: unknown hyperparameter {extra:?}"
            )));
        }
        hp.validate()?;
        Ok(hp)
    }

    // negated comparisons so that NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::usage(m));
        match *self {
            Hyperparams::Knn { k: 0 } => bad("knn: k must be >= 1".into()),
            Hyperparams::LogReg { c } | Hyperparams::SvmRbf { c, .. }
                if !(c.is_finite() && c > 0.0) =>
            {
                bad(format!("C must be positive, got {c}"))
            }
            Hyperparams::SvmRbf { gamma: Some(g), .. } if !(g.is_finite() && g > 0.0) => {
                bad(format!("gamma must be positive, got {g}"))
            }
            Hyperparams::GaussianNb { var_smoothing } if !(var_smoothing >= 0.0) => {
                bad(format!("var_smoothing must be >= 0, got {var_smoothing}"))
            }
            Hyperparams::DecisionTree { max_depth: 0, .. } => {
                bad("decision_tree: max_depth must be >= 1".into())
            }
            Hyperparams::Mlp {
                hidden,
                batch_size,
                alpha,
                ..
            } if hidden == 0 || batch_size == 0 || !(alpha >= 0.0) => {
                bad("mlp: hidden and batch_size must be >= 1, alpha >= 0".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hyper: Hyperparams,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(hyper: Hyperparams, seed: u64) -> Self {
        TrainConfig { hyper, seed }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.hyper.algorithm()
    }
}

/// Whether the optimizer met its stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitStatus {
    Converged {
        iterations: usize,
    },
    /// Usable model, but the iteration cap or a numerical floor was hit first.
    NotConverged {
        iterations: usize,
        reason: String,
    },
}

impl FitStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, FitStatus::Converged { .. })
    }

    pub fn iterations(&self) -> usize {
        match self {
            FitStatus::Converged { iterations } | FitStatus::NotConverged { iterations, .. } => {
                *iterations
            }
        }
    }
}

/// Dense training matrix with known labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Array2<f64>,
    pub y: Vec<Label>,
}

impl Samples {
    pub fn new(x: Array2<f64>, y: Vec<Label>) -> Result<Samples> {
        if x.nrows() != y.len() {
            return Err(Error::usage(format!(
                "{} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("non-finite feature value"));
        }
        if y.iter().any(|l| !l.is_known()) {
            return Err(Error::usage("training data contains unknown labels"));
        }
        Ok(Samples { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<Label>) -> Result<Samples> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::usage("ragged feature rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::usage(e.to_string()))?;
        Samples::new(x, y)
    }

    pub fn from_dataset(ds: &LayerDataset<PooledVector>) -> Result<Samples> {
        let rows: Vec<Vec<f64>> = ds.items.iter().map(|i| i.features.values.clone()).collect();
        Samples::from_rows(&rows, ds.labels().collect())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i).to_slice().expect("standard layout")
    }

    /// +1 for bonafide, -1 for spoof.
    pub fn signs(&self) -> Vec<f64> {
        self.y
            .iter()
            .map(|&l| if l == Label::Bonafide { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let bona = self.y.iter().filter(|&&l| l == Label::Bonafide).count();
        (bona, self.y.len() - bona)
    }

    fn require_both_classes(&self) -> Result<()> {
        let (b, s) = self.class_counts();
        if b == 0 || s == 0 {
            return Err(Error::usage(format!(
                "training set must contain both classes ({b} bonafide, {s} spoof)"
            )));
        }
        Ok(())
    }
}

/// Fitted per-algorithm state.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Knn(knn::Knn),
    LogReg(logreg::LogReg),
    SvmRbf(svm::SvmModel),
    GaussianNb(naive_bayes::GaussianNb),
    DecisionTree(tree::DecisionTree),
    Mlp(mlp::Network),
}

/// A fitted classifier. Immutable; scoring is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedScorer {
    pub config: TrainConfig,
    pub model: Model,
    pub status: FitStatus,
    pub dim: usize,
}

impl TrainedScorer {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm()
    }

    /// Bonafide-ness score of one feature vector.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::usage(format!(
                "feature dim {} does not match model dim {}",
                x.len(),
                self.dim
            )));
        }
        Ok(match &self.model {
            Model::Knn(m) => m.score(x),
            Model::LogReg(m) => m.score(x),
            Model::SvmRbf(m) => m.score(x),
            Model::GaussianNb(m) => m.score(x),
            Model::DecisionTree(m) => m.score(x),
            Model::Mlp(m) => m.score(x),
        })
    }

    pub fn score_vector(&self, v: &PooledVector) -> Result<f64> {
        self.score(&v.values)
    }

    pub fn score_dataset(&self, ds: &LayerDataset<PooledVector>) -> Result<Vec<f64>> {
        ds.items
            .iter()
            .map(|i| self.score(&i.features.values))
            .collect()
    }

    pub fn score_samples(&self, s: &Samples) -> Result<Vec<f64>> {
        (0..s.len()).map(|i| self.score(s.row(i))).collect()
    }

    /// Trainable parameters under the conventions of [`param_count_convention`].
    ///
    /// [`param_count_convention`]: TrainedScorer::param_count_convention
    pub fn param_count(&self) -> usize {
        match &self.model {
            Model::Knn(_) => 0,
            Model::LogReg(m) => m.param_count(),
            Model::SvmRbf(m) => m.param_count(),
            Model::GaussianNb(m) => m.param_count(),
            Model::DecisionTree(m) => m.param_count(),
            Model::Mlp(m) => m.param_count(),
        }
    }

    pub fn param_count_convention(&self) -> String {
        match &self.model {
            Model::Knn(m) => format!(
                "no trainable parameters; stores {} training vectors",
                m.stored_vectors()
            ),
            Model::LogReg(_) => "weights + bias".into(),
            Model::SvmRbf(_) => "support vectors (dual coefficients) + bias".into(),
            Model::GaussianNb(_) => {
                "per-class mean and variance per dimension + class priors".into()
            }
            Model::DecisionTree(_) => {
                "2 per internal node (feature, threshold) + 1 per leaf".into()
            }
            Model::Mlp(m) => format!(
                "dim*h + h + h*outputs + outputs ({} head, {} outputs)",
                m.head.name(),
                m.head.outputs()
            ),
        }
    }

    /// Approximate bytes of fitted state held in memory.
    pub fn state_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        match &self.model {
            Model::Knn(m) => m.stored_vectors() * (self.dim * f + 1),
            Model::LogReg(_) => (self.dim + 1) * f,
            Model::SvmRbf(m) => m.support_count() * (self.dim + 1) * f + f,
            Model::GaussianNb(_) => (4 * self.dim + 2) * f,
            Model::DecisionTree(m) => m.node_count() * 3 * f,
            Model::Mlp(m) => m.param_count() * f,
        }
    }
}

/// Fits on a pooled training dataset.
pub fn fit(config: &TrainConfig, data: &LayerDataset<PooledVector>) -> Result<TrainedScorer> {
    fit_samples(config, &Samples::from_dataset(data)?, None)
}

/// Fits on a dense training matrix. `validation` is only consulted by the MLP,
/// whose early stopping monitors validation loss when it is present.
pub fn fit_samples(
    config: &TrainConfig,
    train: &Samples,
    validation: Option<&Samples>,
) -> Result<TrainedScorer> {
    config.hyper.validate()?;
    train.require_both_classes()?;
    let dim = train.dim();
    if let Some(v) = validation {
        if v.dim() != dim {
            return Err(Error::usage("validation dim differs from training dim"));
        }
    }
    let (model, status) = match config.hyper {
        Hyperparams::Knn { k } => (
            Model::Knn(knn::Knn::fit(train, k)?),
            FitStatus::Converged { iterations: 0 },
        ),
        Hyperparams::LogReg { c } => {
            let fit = logreg::train(train, c, &logreg::LogRegOptions::default());
            (Model::LogReg(fit.model), fit.status)
        }
        Hyperparams::SvmRbf { c, gamma } => {
            let params = svm::SvmParams {
                c,
                gamma,
                ..svm::SvmParams::default()
            };
            let out = svm::train(train, &params);
            (Model::SvmRbf(out.model), out.status)
        }
        Hyperparams::GaussianNb { var_smoothing } => (
            Model::GaussianNb(naive_bayes::GaussianNb::fit(train, var_smoothing)),
            FitStatus::Converged { iterations: 0 },
        ),
        Hyperparams::DecisionTree {
            criterion,
            max_depth,
        } => (
            Model::DecisionTree(tree::DecisionTree::fit(train, criterion, max_depth)),
            FitStatus::Converged { iterations: 0 },
        ),
        Hyperparams::Mlp {
            hidden,
            batch_size,
            schedule,
            alpha,
            head,
        } => {
            let opts = mlp::MlpOptions {
                hidden,
                batch_size,
                schedule,
                alpha,
                head,
                ..mlp::MlpOptions::default()
            };
            let out = mlp::train(train, validation, &opts, config.seed);
            (Model::Mlp(out.network), out.status)
        }
    };
    if let FitStatus::NotConverged { reason, .. } = &status {
        log::warn!(
            "{} ({}): {reason}",
            config.algorithm(),
            config.hyper.canonical()
        );
    }
    Ok(TrainedScorer {
        config: *config,
        model,
        status,
        dim,
    })
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let cells = [
            Hyperparams::Knn { k: 5 },
            Hyperparams::LogReg { c: 0.2 },
            Hyperparams::SvmRbf {
                c: 1.0,
                gamma: None,
            },
            Hyperparams::SvmRbf {
                c: 0.1,
                gamma: Some(0.0013),
            },
            Hyperparams::GaussianNb {
                var_smoothing: 1e-9,
            },
            Hyperparams::DecisionTree {
                criterion: Criterion::Entropy,
                max_depth: 150,
            },
            Hyperparams::Mlp {
                hidden: 100,
                batch_size: 64,
                schedule: LrSchedule::InvScaling,
                alpha: 1e-4,
                head: OutputHead::SoftmaxPair,
            },
        ];
        for hp in cells {
            let s = hp.canonical();
            assert_eq!(Hyperparams::parse(hp.algorithm(), &s).unwrap(), hp, "{s}");
        }
    }

    #[test]
    fn schema_is_enforced() {
        assert!(Hyperparams::parse(Algorithm::Knn, "k=3;p=2").is_err());
        assert!(Hyperparams::parse(Algorithm::LogReg, "").is_err());
        assert!(Hyperparams::parse(Algorithm::LogReg, "C=-1").is_err());
        assert!("forest".parse::<Algorithm>().is_err());
    }

    #[test]
    fn single_class_training_is_usage_error() {
        let s =
            Samples::from_rows(&[vec![0.0], vec![1.0]], vec![Label::Spoof, Label::Spoof]).unwrap();
        for hp in [Hyperparams::LogReg { c: 1.0 }, Hyperparams::Knn { k: 1 }] {
            assert!(matches!(
                fit_samples(&TrainConfig::new(hp, 1), &s, None),
                Err(Error::Usage(_))
            ));
        }
    }

    #[test]
    fn score_dim_mismatch() {
        let s = Samples::from_rows(
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![Label::Spoof, Label::Bonafide],
        )
        .unwrap();
        let m = fit_samples(&TrainConfig::new(Hyperparams::Knn { k: 1 }, 0), &s, None).unwrap();
        assert!(matches!(m.score(&[1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn stable_helpers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
    }
}
