//! Gaussian naive Bayes.
//!
//! Per class and dimension a mean and a population variance are estimated; every
//! variance is widened by `var_smoothing * max_j Var(x_j)` over the whole
//! training set. The score is the log posterior odds of bonafide.

use std::f64::consts::PI;

use super::{sigmoid, Samples};
use crate::store::Label;

const SPOOF: usize = 0;
const BONA: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// Indexed `[spoof, bonafide]`.
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
    pub log_prior: [f64; 2],
    pub epsilon: f64,
}

impl GaussianNb {
    pub fn fit(s: &Samples, var_smoothing: f64) -> GaussianNb {
        let dim = s.dim();
        let n = s.len() as f64;

        let mut max_var: f64 = 0.0;
        for col in s.x.columns() {
            let m = col.sum() / n;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            max_var = max_var.max(v);
        }
        let epsilon = var_smoothing * max_var;

        let mut mean = [vec![0.0; dim], vec![0.0; dim]];
        let mut var = [vec![0.0; dim], vec![0.0; dim]];
        let mut count = [0usize; 2];
        for (i, &l) in s.y.iter().enumerate() {
            let c = class_index(l);
            count[c] += 1;
            for (m, x) in mean[c].iter_mut().zip(s.row(i)) {
                *m += x;
            }
        }
        for c in 0..2 {
            mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
        }
        for (i, &l) in s.y.iter().enumerate() {
            let c = class_index(l);
            for ((v, x), m) in var[c].iter_mut().zip(s.row(i)).zip(&mean[c]) {
                *v += (x - m) * (x - m);
            }
        }
        for c in 0..2 {
            var[c]
                .iter_mut()
                .for_each(|v| *v = *v / count[c] as f64 + epsilon);
        }
        let log_prior = [
            (count[SPOOF] as f64 / n).ln(),
            (count[BONA] as f64 / n).ln(),
        ];
        GaussianNb {
            mean,
            var,
            log_prior,
            epsilon,
        }
    }

    /// `log p(x | class)` under the diagonal Gaussian.
    pub fn log_likelihood(&self, class: Label, x: &[f64]) -> f64 {
        let c = class_index(class);
        x.iter()
            .zip(&self.mean[c])
            .zip(&self.var[c])
            .map(|((x, m), v)| -0.5 * (2.0 * PI * v).ln() - (x - m) * (x - m) / (2.0 * v))
            .sum()
    }

    /// Log posterior odds of bonafide versus spoof.
    pub fn score(&self, x: &[f64]) -> f64 {
        (self.log_likelihood(Label::Bonafide, x) - self.log_likelihood(Label::Spoof, x))
            + (self.log_prior[BONA] - self.log_prior[SPOOF])
    }

    pub fn posterior_bonafide(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }

    pub fn param_count(&self) -> usize {
        2 * 2 * self.mean[0].len() + 2
    }
}

fn class_index(l: Label) -> usize {
    if l == Label::Bonafide {
        BONA
    } else {
        SPOOF
    }
}
