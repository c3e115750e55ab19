//! L2-regularized logistic regression fitted by full-batch gradient descent.
//!
//! Objective (labels `y = +1` bonafide, `-1` spoof):
//!
//! ```text
//! J(w, b) = sum_i log(1 + exp(-y_i (w.x_i + b))) + |w|^2 / (2C)
//! ```
//!
//! The bias is not penalized. Each step starts from a Barzilai-Borwein trial
//! length and backtracks until the Armijo condition holds, so `J` decreases
//! monotonically from `J(0) = n log 2`.

use ndarray::{Array1, ArrayView1};

use super::{dot, sigmoid, softplus, FitStatus, Samples};

#[derive(Debug, Clone, PartialEq)]
pub struct LogReg {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogReg {
    /// Probability of bonafide.
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegOptions {
    /// Stop when the Euclidean norm of the full gradient drops to this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        LogRegOptions {
            grad_tol: 1e-6,
            max_iter: 10_000,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegFit {
    pub model: LogReg,
    pub status: FitStatus,
    pub objective: f64,
    pub objective_at_zero: f64,
    pub grad_norm: f64,
}

/// Training objective at `(w, b)`.
pub fn objective(s: &Samples, signs: &[f64], c: f64, w: &[f64], b: f64) -> f64 {
    let z = s.x.dot(&ArrayView1::from(w));
    let loss: f64 = z
        .iter()
        .zip(signs)
        .map(|(&zi, &yi)| softplus(-yi * (zi + b)))
        .sum();
    loss + dot(w, w) / (2.0 * c)
}

/// Gradient of the objective, weights first and bias last.
pub fn gradient(s: &Samples, signs: &[f64], c: f64, w: &[f64], b: f64) -> Vec<f64> {
    let z = s.x.dot(&ArrayView1::from(w));
    // dJ/dz_i = -y_i * sigmoid(-y_i z_i)
    let r: Array1<f64> = z
        .iter()
        .zip(signs)
        .map(|(&zi, &yi)| -yi * sigmoid(-yi * (zi + b)))
        .collect();
    let gw = s.x.t().dot(&r);
    let mut g: Vec<f64> = gw.iter().zip(w).map(|(g, wi)| g + wi / c).collect();
    g.push(r.sum());
    g
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn train(s: &Samples, c: f64, opts: &LogRegOptions) -> LogRegFit {
    let dim = s.dim();
    let signs = s.signs();
    let mut theta = vec![0.0; dim + 1];
    let eval = |t: &[f64]| objective(s, &signs, c, &t[..dim], t[dim]);
    let grad = |t: &[f64]| gradient(s, &signs, c, &t[..dim], t[dim]);

    let objective_at_zero = eval(&theta);
    let mut f = objective_at_zero;
    let mut g = grad(&theta);
    let mut step = 1.0 / norm(&g).max(1.0);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut stalled = false;

    while iterations < opts.max_iter {
        let gnorm = norm(&g);
        if gnorm <= opts.grad_tol {
            break;
        }
        if let Some((tp, gp)) = &prev {
            let sv: Vec<f64> = theta.iter().zip(tp).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
            let sy = dot(&sv, &yv);
            if sy > 0.0 {
                step = (dot(&sv, &sv) / sy).clamp(1e-12, 1e12);
            }
        }
        let g2 = gnorm * gnorm;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(x, gi)| x - t * gi).collect();
            let fc = eval(&cand);
            if fc <= f - opts.armijo * t * g2 {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((cand, fc)) = accepted else {
            stalled = true;
            break;
        };
        let gc = grad(&cand);
        prev = Some((
            std::mem::replace(&mut theta, cand),
            std::mem::replace(&mut g, gc),
        ));
        f = fc;
        step = t;
    }

    let grad_norm = norm(&g);
    let status = if grad_norm <= opts.grad_tol {
        FitStatus::Converged { iterations }
    } else if stalled {
        FitStatus::NotConverged {
            iterations,
            reason: format!("line search stalled at gradient norm {grad_norm:.3e}"),
        }
    } else {
        FitStatus::NotConverged {
            iterations,
            reason: format!("iteration cap reached at gradient norm {grad_norm:.3e}"),
        }
    };
    let bias = theta.pop().unwrap();
    LogRegFit {
        model: LogReg {
            weights: theta,
            bias,
        },
        status,
        objective: f,
        objective_at_zero,
        grad_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Label::{Bonafide as B, Spoof as S};

    #[test]
    fn symmetric_pair_puts_boundary_at_origin() {
        let s = Samples::from_rows(&[vec![-1.0], vec![1.0]], vec![S, B]).unwrap();
        let fit = train(&s, 10.0, &LogRegOptions::default());
        assert!(fit.status.is_converged(), "{:?}", fit.status);
        assert!(fit.grad_norm <= 1e-6);
        assert!(fit.model.bias.abs() < 1e-9, "bias {}", fit.model.bias);
        assert!((fit.model.score(&[0.0]) - 0.5).abs() < 1e-9);
        assert!(fit.model.score(&[1.0]) > 0.5);
        assert!(fit.objective <= fit.objective_at_zero);
        assert!((fit.objective_at_zero - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = Samples::from_rows(
            &[
                vec![0.3, -1.2],
                vec![1.5, 0.4],
                vec![-0.7, 0.9],
                vec![2.0, 2.0],
            ],
            vec![S, B, S, B],
        )
        .unwrap();
        let signs = s.signs();
        let (w, b, c) = ([0.4, -0.3], 0.2, 0.7);
        let g = gradient(&s, &signs, c, &w, b);
        let h = 1e-6;
        for k in 0..3 {
            let mut p = vec![w[0], w[1], b];
            let mut m = p.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (objective(&s, &signs, c, &p[..2], p[2])
                - objective(&s, &signs, c, &m[..2], m[2]))
                / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "{k}: {fd} vs {}", g[k]);
        }
    }
}
