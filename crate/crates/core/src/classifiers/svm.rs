//! Soft-margin RBF support vector machine trained with SMO.
//!
//! The solver works on the dual in minimization form
//!
//! ```text
//! min_a  f(a) = 1/2 a'Qa - e'a,   Q_ij = y_i y_j K(x_i, x_j)
//! s.t.   0 <= a_i <= C,  y'a = 0
//! ```
//!
//! and keeps the gradient `G = Qa - e` up to date. Each iteration picks the
//! maximal violating pair
//!
//! ```text
//! i = argmax { -y_t G_t : t in I_up },   j = argmin { -y_t G_t : t in I_low }
//! ```
//!
//! and solves the two-variable subproblem exactly, clipping to the box. It stops
//! once `m(a) - M(a) < tol`. The bias is the average of `-y_t G_t` over free
//! vectors, or the midpoint of the feasible interval when none is free.

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::Array2;

use super::{sq_dist, FitStatus, Samples};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Memory budget for cached kernel rows.
    pub cache_bytes: usize,
    /// Keep the dual objective after every iteration.
    pub record_objective: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 10_000_000,
            cache_bytes: 256 << 20,
            record_objective: false,
        }
    }
}

/// `1 / (dim * mean per-dimension population variance)`, or 1 when the data
/// has no variance at all.
pub fn scale_gamma(s: &Samples) -> f64 {
    let n = s.len() as f64;
    let dim = s.dim();
    let mut total = 0.0;
    for col in s.x.columns() {
        let mean = col.sum() / n;
        total += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    }
    let mean_var = total / dim as f64;
    if mean_var > 0.0 {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub gamma: f64,
    /// Support vectors, one per row.
    pub support: Array2<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    /// Signed decision value `sum_i alpha_i y_i K(x_i, x) + b`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (row, c) in self.support.rows().into_iter().zip(&self.coef) {
            s += c * rbf(self.gamma, row.as_slice().expect("standard layout"), x);
        }
        s + self.bias
    }

    pub fn support_count(&self) -> usize {
        self.coef.len()
    }

    /// Dual coefficients plus bias.
    pub fn param_count(&self) -> usize {
        self.coef.len() + 1
    }
}

#[derive(Debug, Clone)]
pub struct SmoOutcome {
    pub model: SvmModel,
    pub status: FitStatus,
    /// Dual variables for every training point.
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// `m(a) - M(a)` at exit.
    pub violation: f64,
    /// Dual objective `e'a - 1/2 a'Qa` at exit.
    pub dual_objective: f64,
    /// Dual objective after each iteration, when requested.
    pub objective_trace: Vec<f64>,
}

/// Row cache for the kernel matrix, evicting the least recently used row once
/// the memory budget is exhausted.
struct KernelRows<'a> {
    x: &'a Array2<f64>,
    gamma: f64,
    capacity: usize,
    rows: HashMap<usize, (Rc<Vec<f64>>, u64)>,
    clock: u64,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a Array2<f64>, gamma: f64, budget: usize) -> Self {
        let row_bytes = x.nrows().max(1) * std::mem::size_of::<f64>();
        KernelRows {
            x,
            gamma,
            capacity: (budget / row_bytes).max(2),
            rows: HashMap::new(),
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        self.clock += 1;
        if let Some(entry) = self.rows.get_mut(&i) {
            entry.1 = self.clock;
            return entry.0.clone();
        }
        if self.rows.len() >= self.capacity {
            let oldest = *self
                .rows
                .iter()
                .min_by_key(|(_, (_, used))| *used)
                .map(|(k, _)| k)
                .expect("cache not empty");
            self.rows.remove(&oldest);
        }
        let xi = self.x.row(i);
        let xi = xi.as_slice().expect("standard layout");
        let row: Vec<f64> = self
            .x
            .rows()
            .into_iter()
            .map(|xj| rbf(self.gamma, xi, xj.as_slice().expect("standard layout")))
            .collect();
        let row = Rc::new(row);
        self.rows.insert(i, (row.clone(), self.clock));
        row
    }
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    // e'a - 1/2 a'Qa with Qa = G + e
    alpha
        .iter()
        .zip(grad)
        .map(|(a, g)| 0.5 * a - 0.5 * a * g)
        .sum()
}

pub fn train(s: &Samples, p: &SvmParams) -> SmoOutcome {
    let n = s.len();
    let y = s.signs();
    let c = p.c;
    let gamma = p.gamma.unwrap_or_else(|| scale_gamma(s));
    let mut kernel = KernelRows::new(&s.x, gamma, p.cache_bytes);

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let violation = loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < p.tol || iterations >= p.max_iter {
            break if gap.is_finite() { gap } else { 0.0 };
        }
        iterations += 1;

        let ki = kernel.row(i);
        let kj = kernel.row(j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        // K(x, x) = 1 for the RBF kernel
        let quad = {
            let q = 2.0 - 2.0 * ki[j];
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let dai = (alpha[i] - old_ai) * y[i];
        let daj = (alpha[j] - old_aj) * y[j];
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * dai + kj[t] * daj);
        }
        if p.record_objective {
            trace.push(dual_objective(&alpha, &grad));
        }
    };

    let bias = -rho(&alpha, &grad, &y, c);
    let support_idx: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let dim = s.dim();
    let mut support = Array2::zeros((support_idx.len(), dim));
    for (r, &t) in support_idx.iter().enumerate() {
        support.row_mut(r).assign(&s.x.row(t));
    }
    let coef = support_idx.iter().map(|&t| alpha[t] * y[t]).collect();

    let status = if violation < p.tol {
        FitStatus::Converged { iterations }
    } else {
        FitStatus::NotConverged {
            iterations,
            reason: format!("iteration cap reached with KKT gap {violation:.3e}"),
        }
    };
    SmoOutcome {
        model: SvmModel {
            gamma,
            support,
            coef,
            bias,
        },
        status,
        dual_objective: dual_objective(&alpha, &grad),
        alpha,
        bias,
        gamma,
        violation,
        objective_trace: trace,
    }
}

/// Offset `rho` such that the decision value is `sum a_i y_i K - rho`.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut sum_free = 0.0;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
