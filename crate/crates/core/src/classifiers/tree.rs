//! CART-style binary decision tree.
//!
//! Splits are greedy on weighted child impurity; thresholds sit halfway between
//! consecutive distinct feature values and samples with `x[f] <= threshold`
//! go left. Among equally good splits the lower feature index wins, then the
//! lower threshold. A node becomes a leaf when it is pure, when `max_depth` is
//! reached, or when no feature takes two distinct values in it.

use super::{Criterion, Samples};
use crate::store::Label;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        bonafide: usize,
        total: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    /// Node arena; index 0 is the root.
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    s: &'a Samples,
    bona: Vec<bool>,
    criterion: Criterion,
    max_depth: usize,
    nodes: Vec<Node>,
}

/// Impurity of a node multiplied by its size.
fn weighted_impurity(criterion: Criterion, bona: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let b = bona as f64;
    let s = n - b;
    match criterion {
        Criterion::Gini => n - (b * b + s * s) / n,
        Criterion::Entropy => {
            let term = |k: f64| if k > 0.0 { -k * (k / n).log2() } else { 0.0 };
            term(b) + term(s)
        }
    }
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let bonafide = idx.iter().filter(|&&i| self.bona[i]).count();
        self.nodes.push(Node::Leaf {
            bonafide,
            total: idx.len(),
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let total = idx.len();
        let bona_total = idx.iter().filter(|&&i| self.bona[i]).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(total);
        for f in 0..self.s.dim() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.s.x[[i, f]], self.bona[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_bona = 0;
            for k in 0..total - 1 {
                if pairs[k].1 {
                    left_bona += 1;
                }
                let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
                if lo == hi {
                    continue;
                }
                let nl = k + 1;
                let cost = weighted_impurity(self.criterion, left_bona, nl)
                    + weighted_impurity(self.criterion, bona_total - left_bona, total - nl);
                if best.is_none_or(|(c, _, _)| cost < c) {
                    let mut t = lo + (hi - lo) / 2.0;
                    if t >= hi {
                        t = lo;
                    }
                    best = Some((cost, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let bona = idx.iter().filter(|&&i| self.bona[i]).count();
        let pure = bona == 0 || bona == idx.len();
        if pure || depth >= self.max_depth || idx.len() < 2 {
            return self.leaf(&idx);
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return self.leaf(&idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.s.x[[i, feature]] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            bonafide: 0,
            total: 0,
        });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

impl DecisionTree {
    pub fn fit(s: &Samples, criterion: Criterion, max_depth: usize) -> DecisionTree {
        let mut b = Builder {
            s,
            bona: s.y.iter().map(|&l| l == Label::Bonafide).collect(),
            criterion,
            max_depth,
            nodes: Vec::new(),
        };
        b.build((0..s.len()).collect(), 0);
        DecisionTree { nodes: b.nodes }
    }

    fn leaf_for(&self, x: &[f64]) -> (usize, usize) {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { bonafide, total } => return (bonafide, total),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Bonafide fraction of the training samples in the reached leaf.
    pub fn score(&self, x: &[f64]) -> f64 {
        let (b, t) = self.leaf_for(x);
        b as f64 / t as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Two per internal node (feature, threshold) plus one per leaf.
    pub fn param_count(&self) -> usize {
        let leaves = self.leaf_count();
        2 * (self.nodes.len() - leaves) + leaves
    }
}
