//! CPU-only audio deepfake detection on top of frozen self-supervised speech
//! embeddings.
//!
//! The pipeline is deliberately small:
//!
//! 1. [`store`] reads per-layer frame embeddings (GAIE files) and protocol
//!    files, and joins them into labelled datasets.
//! 2. [`features`] averages frames into one fixed-size vector per utterance.
//! 3. [`classifiers`] fits one of six classical back-ends (kNN, logistic
//!    regression, RBF SVM, Gaussian naive Bayes, decision tree, one-hidden-layer
//!    MLP) and exposes a real-valued score where higher means more bonafide.
//! 4. [`metrics`] turns scores into EER, F1 and DET points with bonafide as the
//!    positive class.
//! 5. [`selection`] runs the brute-force grid search on the dev set and the
//!    layer sweep, and renders reports.
//! 6. [`budget`] counts frozen parameters and MACs of a truncated encoder and
//!    assembles the `E x D x H` cost report.
//!
//! The `greenspoof` binary in this crate wires these together; see [`cli`].

pub mod budget;
pub mod classifiers;
pub mod cli;
pub mod error;
pub mod features;
pub mod metrics;
pub mod selection;
pub mod store;
pub mod synthetic;

pub use error::{Error, Result};
pub use store::Label;
