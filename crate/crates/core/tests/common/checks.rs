//! Numeric oracle checks for the classifiers. Each returns a short detail on
//! success and the reason on failure, so the acceptance gate can print them.

use greenspoof::classifiers::logreg::{self, LogRegOptions};
use greenspoof::classifiers::mlp::Network;
use greenspoof::classifiers::naive_bayes::GaussianNb;
use greenspoof::classifiers::svm::{self, SvmParams};
use greenspoof::classifiers::{OutputHead, Samples};
use greenspoof::Label;

use super::{gnb_oracle, rng, small_problem};

pub type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn samples(rows: &[Vec<f64>], labels: &[Label]) -> Samples {
    Samples::from_rows(rows, labels.to_vec()).expect("valid samples")
}

pub fn gnb_closed_form() -> Check {
    let (rows, labels) = small_problem(5, 50, 8, 0.7);
    let nb = GaussianNb::fit(&samples(&rows, &labels), 1e-9);
    let (probe, _) = small_problem(6, 40, 8, 0.0);
    let mut worst: f64 = 0.0;
    for x in &probe {
        worst = worst.max((nb.score(x) - gnb_oracle(&rows, &labels, 1e-9, x)).abs());
    }
    ensure(worst <= 1e-9, || format!("max |diff| {worst:.3e} > 1e-9"))?;
    Ok(format!("max |diff| {worst:.1e}"))
}

fn kernel_sum(
    rows: &[Vec<f64>],
    labels: &[Label],
    alpha: &[f64],
    gamma: f64,
    b: f64,
    x: &[f64],
) -> f64 {
    let mut s = b;
    for ((r, l), a) in rows.iter().zip(labels).zip(alpha) {
        let y = if *l == Label::Bonafide { 1.0 } else { -1.0 };
        let d2: f64 = r.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum();
        s += a * y * (-gamma * d2).exp();
    }
    s
}

/// Decision values equal the kernel expansion over all training points, and
/// the solution satisfies the KKT conditions up to the solver tolerance.
pub fn svm_kernel_sum_and_kkt() -> Check {
    let (rows, labels) = small_problem(7, 50, 5, 0.6);
    let c = 1.0;
    let out = svm::train(
        &samples(&rows, &labels),
        &SvmParams {
            c,
            ..SvmParams::default()
        },
    );
    ensure(out.status.is_converged(), || {
        format!("solver did not converge: {:?}", out.status)
    })?;

    let (probe, _) = small_problem(8, 50, 5, 0.0);
    let mut worst: f64 = 0.0;
    for x in probe.iter().chain(&rows) {
        let want = kernel_sum(&rows, &labels, &out.alpha, out.gamma, out.bias, x);
        worst = worst.max((out.model.score(x) - want).abs());
    }
    ensure(worst <= 1e-9, || {
        format!("kernel sum |diff| {worst:.3e} > 1e-9")
    })?;

    let mut kkt: f64 = 0.0;
    let mut balance = 0.0;
    for ((x, l), &a) in rows.iter().zip(&labels).zip(&out.alpha) {
        let y = if *l == Label::Bonafide { 1.0 } else { -1.0 };
        balance += a * y;
        let m = y * kernel_sum(&rows, &labels, &out.alpha, out.gamma, out.bias, x);
        let v = if a <= 1e-12 {
            (1.0 - m).max(0.0)
        } else if a >= c - 1e-12 {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        kkt = kkt.max(v);
        ensure((-1e-12..=c + 1e-12).contains(&a), || {
            format!("alpha {a} outside [0, C]")
        })?;
    }
    ensure(kkt <= 1e-3, || format!("KKT violation {kkt:.3e} > 1e-3"))?;
    ensure(balance.abs() <= 1e-9, || format!("y'a = {balance:.3e}"))?;
    Ok(format!("kernel |diff| {worst:.1e}, KKT {kkt:.1e}"))
}

pub fn svm_dual_non_decreasing() -> Check {
    let (rows, labels) = small_problem(9, 50, 4, 0.4);
    let out = svm::train(
        &samples(&rows, &labels),
        &SvmParams {
            c: 0.5,
            record_objective: true,
            ..SvmParams::default()
        },
    );
    let t = &out.objective_trace;
    ensure(!t.is_empty(), || "empty objective trace".into())?;
    for (k, w) in t.windows(2).enumerate() {
        ensure(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), || {
            format!(
                "dual objective fell at iteration {}: {} -> {}",
                k + 1,
                w[0],
                w[1]
            )
        })?;
    }
    Ok(format!("{} iterations", t.len()))
}

/// Gradient of the regularized logistic objective, from raw rows.
pub fn logreg_gradient_oracle(
    rows: &[Vec<f64>],
    labels: &[Label],
    c: f64,
    w: &[f64],
    b: f64,
) -> Vec<f64> {
    let mut g: Vec<f64> = w.iter().map(|wi| wi / c).collect();
    g.push(0.0);
    for (x, l) in rows.iter().zip(labels) {
        let y = if *l == Label::Bonafide { 1.0 } else { -1.0 };
        let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let r = -y / (1.0 + (y * z).exp());
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += r * xj;
        }
        g[w.len()] += r;
    }
    g
}

pub fn logreg_stationary() -> Check {
    let (rows, labels) = small_problem(11, 50, 6, 0.5);
    let fit = logreg::train(&samples(&rows, &labels), 1.0, &LogRegOptions::default());
    ensure(fit.status.is_converged(), || {
        format!("not converged: {:?}", fit.status)
    })?;
    let g = logreg_gradient_oracle(&rows, &labels, 1.0, &fit.model.weights, fit.model.bias);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    ensure(norm <= 1e-6, || format!("|grad| {norm:.3e} > 1e-6"))?;
    ensure(fit.objective <= fit.objective_at_zero, || {
        "objective above J(0)".into()
    })?;
    Ok(format!("|grad| {norm:.1e}"))
}

/// Mean cross-entropy plus L2 penalty, written out from the weight layout.
fn mlp_loss_oracle(net: &Network, rows: &[Vec<f64>], labels: &[Label], alpha: f64) -> f64 {
    let n = rows.len() as f64;
    let mut total = 0.0;
    for (x, l) in rows.iter().zip(labels) {
        let a: Vec<f64> = (0..net.hidden)
            .map(|h| {
                let z: f64 = (0..net.input)
                    .map(|j| net.w1[h * net.input + j] * x[j])
                    .sum::<f64>()
                    + net.b1[h];
                z.max(0.0)
            })
            .collect();
        let logit = |k: usize| {
            (0..net.hidden)
                .map(|h| net.w2[k * net.hidden + h] * a[h])
                .sum::<f64>()
                + net.b2[k]
        };
        let bona = *l == Label::Bonafide;
        total += match net.head {
            OutputHead::Sigmoid => {
                let p = 1.0 / (1.0 + (-logit(0)).exp());
                -(if bona { p.ln() } else { (1.0 - p).ln() })
            }
            OutputHead::SoftmaxPair => {
                let (z0, z1) = (logit(0), logit(1));
                let lse = (z0.exp() + z1.exp()).ln();
                lse - if bona { z1 } else { z0 }
            }
        };
    }
    let sq: f64 = net.w1.iter().chain(&net.w2).map(|w| w * w).sum();
    total / n + alpha / (2.0 * n) * sq
}

pub fn mlp_gradient(head: OutputHead) -> Check {
    let (rows, labels) = small_problem(13, 12, 5, 0.5);
    let s = samples(&rows, &labels);
    let net = Network::init(5, 7, head, &mut rng(14));
    let batch: Vec<usize> = (0..rows.len()).collect();
    let alpha = 0.3;
    let (loss, grad) = net.loss_and_grad(&s, &batch, alpha);
    let want = mlp_loss_oracle(&net, &rows, &labels, alpha);
    ensure((loss - want).abs() <= 1e-10, || {
        format!("loss {loss} vs oracle {want}")
    })?;

    // norm-wise relative error over every parameter
    let h = 1e-6;
    let (mut diff, mut fd_sq, mut g_sq) = (0.0, 0.0, 0.0);
    for block in 0..4 {
        for k in 0..net.blocks()[block].len() {
            let mut up = net.clone();
            up.blocks_mut()[block][k] += h;
            let mut dn = net.clone();
            dn.blocks_mut()[block][k] -= h;
            let fd = (mlp_loss_oracle(&up, &rows, &labels, alpha)
                - mlp_loss_oracle(&dn, &rows, &labels, alpha))
                / (2.0 * h);
            let g = grad.blocks()[block][k];
            diff += (fd - g) * (fd - g);
            fd_sq += fd * fd;
            g_sq += g * g;
        }
    }
    let rel = diff.sqrt() / fd_sq.sqrt().max(g_sq.sqrt()).max(f64::MIN_POSITIVE);
    ensure(rel <= 1e-5, || {
        format!("{} head: relative error {rel:.3e} > 1e-5", head.name())
    })?;
    Ok(format!("{} head relative error {rel:.1e}", head.name()))
}
