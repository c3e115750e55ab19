//! k-nearest neighbours with Euclidean distance.

use ndarray::Array2;

use super::{sq_dist, Samples};
use crate::error::{Error, Result};
use crate::store::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    pub x: Array2<f64>,
    pub bonafide: Vec<bool>,
}

impl Knn {
    pub fn fit(train: &Samples, k: usize) -> Result<Knn> {
        if k > train.len() {
            return Err(Error::usage(format!(
                "knn: k = {k} exceeds training size {}",
                train.len()
            )));
        }
        Ok(Knn {
            k,
            x: train.x.clone(),
            bonafide: train.y.iter().map(|&l| l == Label::Bonafide).collect(),
        })
    }

    pub fn stored_vectors(&self) -> usize {
        self.bonafide.len()
    }

    /// Indices of the `k` nearest training points. Equal distances go to the
    /// lower training index.
    pub fn neighbours(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (sq_dist(row.as_slice().expect("standard layout"), q), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Fraction of the `k` nearest neighbours labelled bonafide.
    pub fn score(&self, q: &[f64]) -> f64 {
        let nn = self.neighbours(q);
        nn.iter().filter(|&&i| self.bonafide[i]).count() as f64 / self.k as f64
    }
}
