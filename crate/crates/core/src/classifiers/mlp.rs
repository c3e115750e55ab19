//! One-hidden-layer perceptron: ReLU hidden units, sigmoid (or two-way softmax)
//! output, trained with plain mini-batch SGD.
//!
//! Batch loss is mean cross-entropy plus `alpha / (2B) * (|W1|^2 + |W2|^2)`;
//! biases are not penalized. Early stopping watches the validation loss when a
//! validation set is given, otherwise the mean training loss of the epoch, and
//! stops after `patience` epochs without an improvement larger than `tol`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, softplus, FitStatus, LrSchedule, OutputHead, Samples};
use crate::store::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpOptions {
    pub hidden: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub alpha: f64,
    pub head: OutputHead,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub tol: f64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        MlpOptions {
            hidden: 100,
            batch_size: 32,
            schedule: LrSchedule::Constant,
            alpha: 1e-4,
            head: OutputHead::Sigmoid,
            learning_rate: 1e-3,
            max_epochs: 200,
            patience: 10,
            tol: 1e-4,
        }
    }
}

/// Weights and biases. Matrices are row-major: `w1` is `hidden x input`,
/// `w2` is `outputs x hidden`. The same shape doubles as a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input: usize,
    pub hidden: usize,
    pub head: OutputHead,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Network {
    /// Glorot-uniform initialization, `U(-sqrt(6/(fan_in+fan_out)), +...)`
    /// for weights and biases alike.
    pub fn init(input: usize, hidden: usize, head: OutputHead, rng: &mut impl Rng) -> Network {
        let out = head.outputs();
        let mut uniform = |n: usize, fan_in: usize, fan_out: usize| -> Vec<f64> {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        Network {
            input,
            hidden,
            head,
            w1: uniform(hidden * input, input, hidden),
            b1: uniform(hidden, input, hidden),
            w2: uniform(out * hidden, hidden, out),
            b2: uniform(out, hidden, out),
        }
    }

    fn zeros_like(&self) -> Network {
        Network {
            input: self.input,
            hidden: self.hidden,
            head: self.head,
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Every parameter block, in a fixed order.
    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn blocks(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn hidden_layer(&self, x: &[f64], out: &mut [f64]) {
        for (h, o) in out.iter_mut().enumerate() {
            let row = &self.w1[h * self.input..(h + 1) * self.input];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[h];
            *o = z.max(0.0);
        }
    }

    fn logits(&self, a: &[f64]) -> [f64; 2] {
        let mut z = [0.0; 2];
        for (k, zk) in z.iter_mut().enumerate().take(self.head.outputs()) {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            *zk = row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>() + self.b2[k];
        }
        z
    }

    /// Probability of bonafide.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut a = vec![0.0; self.hidden];
        self.hidden_layer(x, &mut a);
        let z = self.logits(&a);
        match self.head {
            OutputHead::Sigmoid => sigmoid(z[0]),
            // softmax over (spoof, bonafide)
            OutputHead::SoftmaxPair => sigmoid(z[1] - z[0]),
        }
    }

    /// Cross-entropy of one example and `dLoss/dlogits`.
    fn example_loss(&self, z: [f64; 2], bona: bool) -> (f64, [f64; 2]) {
        let t = if bona { 1.0 } else { 0.0 };
        match self.head {
            OutputHead::Sigmoid => (softplus(z[0]) - t * z[0], [sigmoid(z[0]) - t, 0.0]),
            OutputHead::SoftmaxPair => {
                let m = z[0].max(z[1]);
                let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
                let p = [(z[0] - lse).exp(), (z[1] - lse).exp()];
                let target = if bona { 1 } else { 0 };
                (lse - z[target], [p[0] - (1.0 - t), p[1] - t])
            }
        }
    }

    fn penalty(&self, alpha: f64, batch: usize) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|w| w * w).sum::<f64>();
        alpha / (2.0 * batch as f64) * (sq(&self.w1) + sq(&self.w2))
    }

    /// Regularized batch loss without gradients.
    pub fn loss(&self, s: &Samples, batch: &[usize], alpha: f64) -> f64 {
        let mut a = vec![0.0; self.hidden];
        let mut total = 0.0;
        for &i in batch {
            self.hidden_layer(s.row(i), &mut a);
            total += self
                .example_loss(self.logits(&a), s.y[i] == Label::Bonafide)
                .0;
        }
        total / batch.len() as f64 + self.penalty(alpha, batch.len())
    }

    /// Regularized batch loss and its gradient by backpropagation.
    pub fn loss_and_grad(&self, s: &Samples, batch: &[usize], alpha: f64) -> (f64, Network) {
        let bn = batch.len() as f64;
        let out = self.head.outputs();
        let mut g = self.zeros_like();
        let mut a = vec![0.0; self.hidden];
        let mut da = vec![0.0; self.hidden];
        let mut total = 0.0;
        for &i in batch {
            let x = s.row(i);
            self.hidden_layer(x, &mut a);
            let (l, dz) = self.example_loss(self.logits(&a), s.y[i] == Label::Bonafide);
            total += l;
            da.iter_mut().for_each(|v| *v = 0.0);
            for (k, &dzk) in dz.iter().enumerate().take(out) {
                g.b2[k] += dzk;
                let row = k * self.hidden;
                for h in 0..self.hidden {
                    g.w2[row + h] += dzk * a[h];
                    da[h] += dzk * self.w2[row + h];
                }
            }
            for h in 0..self.hidden {
                if a[h] <= 0.0 {
                    continue;
                }
                let d = da[h];
                g.b1[h] += d;
                let row = &mut g.w1[h * self.input..(h + 1) * self.input];
                for (gw, xv) in row.iter_mut().zip(x) {
                    *gw += d * xv;
                }
            }
        }
        let reg = alpha / bn;
        for (gw, w) in g.w1.iter_mut().zip(&self.w1) {
            *gw = *gw / bn + reg * w;
        }
        for (gw, w) in g.w2.iter_mut().zip(&self.w2) {
            *gw = *gw / bn + reg * w;
        }
        g.b1.iter_mut().for_each(|v| *v /= bn);
        g.b2.iter_mut().for_each(|v| *v /= bn);
        (total / bn + self.penalty(alpha, batch.len()), g)
    }

    fn step(&mut self, g: &Network, lr: f64) {
        for (p, d) in self.blocks_mut().into_iter().zip(g.blocks()) {
            for (w, dw) in p.iter_mut().zip(d) {
                *w -= lr * dw;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpOutcome {
    pub network: Network,
    pub status: FitStatus,
    pub epochs: usize,
    /// Monitored loss per epoch.
    pub loss_curve: Vec<f64>,
}

pub fn train(
    train: &Samples,
    validation: Option<&Samples>,
    opts: &MlpOptions,
    seed: u64,
) -> MlpOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(train.dim(), opts.hidden, opts.head, &mut rng);
    let n = train.len();
    let batch = opts.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let val_idx: Vec<usize> = validation
        .map(|v| (0..v.len()).collect())
        .unwrap_or_default();

    let mut best = f64::INFINITY;
    let mut best_net = net.clone();
    let mut stale = 0;
    let mut curve = Vec::new();
    let mut converged = false;
    let mut epochs = 0;

    for epoch in 1..=opts.max_epochs {
        epochs = epoch;
        let lr = match opts.schedule {
            LrSchedule::Constant => opts.learning_rate,
            LrSchedule::InvScaling => opts.learning_rate / (epoch as f64).sqrt(),
        };
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (l, g) = net.loss_and_grad(train, chunk, opts.alpha);
            epoch_loss += l * chunk.len() as f64;
            net.step(&g, lr);
        }
        let monitored = match validation {
            Some(v) => net.loss(v, &val_idx, 0.0),
            None => epoch_loss / n as f64,
        };
        curve.push(monitored);
        if monitored < best - opts.tol {
            stale = 0;
        } else {
            stale += 1;
        }
        if monitored < best {
            best = monitored;
            best_net = net.clone();
        }
        if stale >= opts.patience {
            converged = true;
            break;
        }
    }

    let network = if validation.is_some() { best_net } else { net };
    let status = if converged {
        FitStatus::Converged { iterations: epochs }
    } else {
        FitStatus::NotConverged {
            iterations: epochs,
            reason: format!("{} epochs without a loss plateau", opts.max_epochs),
        }
    };
    MlpOutcome {
        network,
        status,
        epochs,
        loss_curve: curve,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = Network::init(768, 100, OutputHead::Sigmoid, &mut rng);
        assert_eq!(one.param_count(), 77_001);
        let two = Network::init(768, 100, OutputHead::SoftmaxPair, &mut rng);
        assert_eq!(two.param_count(), 77_102);
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Network::init(5, 3, OutputHead::Sigmoid, &mut ChaCha8Rng::seed_from_u64(9));
        let b = Network::init(5, 3, OutputHead::Sigmoid, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(a.w1.iter().all(|w| w.abs() <= bound));
    }
}
