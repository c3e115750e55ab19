//! Independent oracles shared by the integration tests and the acceptance gate.
#![allow(dead_code)]

pub mod checks;

use greenspoof::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores and labels with at least one of each class. Scores are drawn from a
/// small grid so ties and duplicates are common.
pub fn random_trials(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<Label>) {
    assert!(n >= 2);
    let levels = rng.random_range(1..=n.max(2) * 2);
    let mut labels: Vec<Label> = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                Label::Bonafide
            } else {
                Label::Spoof
            }
        })
        .collect();
    labels[0] = Label::Bonafide;
    labels[1] = Label::Spoof;
    let scores = labels
        .iter()
        .map(|&l| {
            let shift = if l == Label::Bonafide {
                levels as f64 * 0.15
            } else {
                0.0
            };
            let raw = rng.random_range(0..levels) as f64 + shift;
            (raw.round() / 8.0) - 4.0
        })
        .collect();
    (scores, labels)
}

/// (fpr, fnr) at threshold `t` by direct counting; `score >= t` is bonafide.
pub fn rates_at(scores: &[f64], labels: &[Label], t: f64) -> (f64, f64) {
    let (mut fp, mut fneg, mut nb, mut ns) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        if l == Label::Bonafide {
            nb += 1;
            if s < t {
                fneg += 1;
            }
        } else {
            ns += 1;
            if s >= t {
                fp += 1;
            }
        }
    }
    (fp as f64 / ns as f64, fneg as f64 / nb as f64)
}

/// EER by sweeping thresholds below all scores, at every midpoint between
/// distinct scores and above all scores, then intersecting the segment on
/// which `fnr - fpr` changes sign.
pub fn eer_oracle(scores: &[f64], labels: &[Label]) -> f64 {
    let mut distinct = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut thresholds = vec![distinct[0] - 1.0];
    thresholds.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    thresholds.push(distinct[distinct.len() - 1] + 1.0);

    let pts: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| rates_at(scores, labels, t))
        .collect();
    for k in 0..pts.len() {
        let (fpr, fnr) = pts[k];
        if fnr == fpr {
            return fpr;
        }
        if fnr > fpr {
            let (a_fpr, a_fnr) = pts[k - 1];
            // point where the segment meets fpr == fnr
            let num = a_fnr - a_fpr;
            let den = (a_fnr - a_fpr) - (fnr - fpr);
            let t = num / den;
            return a_fpr + t * (fpr - a_fpr);
        }
    }
    unreachable!("the top threshold always has fnr = 1, fpr = 0")
}

/// Confusion counts `(tp, fp, tn, fn)` by direct counting.
pub fn confusion_oracle(scores: &[f64], labels: &[Label], t: f64) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= t, l == Label::Bonafide) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    c
}

pub fn f1_oracle(scores: &[f64], labels: &[Label], t: f64) -> f64 {
    let (tp, fp, _, fneg) = confusion_oracle(scores, labels, t);
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fneg) as f64;
    2.0 * p * r / (p + r)
}

/// log N(x; m, v) summed over dimensions.
pub fn diag_gaussian_logpdf(x: &[f64], m: &[f64], v: &[f64]) -> f64 {
    x.iter()
        .zip(m)
        .zip(v)
        .map(|((x, m), v)| {
            -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v)
        })
        .sum()
}

/// Closed-form Gaussian naive Bayes log posterior odds, computed from raw rows.
pub fn gnb_oracle(rows: &[Vec<f64>], labels: &[Label], smoothing: f64, x: &[f64]) -> f64 {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let col_var = |j: usize, idx: &[usize]| {
        let k = idx.len() as f64;
        let m = idx.iter().map(|&i| rows[i][j]).sum::<f64>() / k;
        (
            m,
            idx.iter().map(|&i| (rows[i][j] - m).powi(2)).sum::<f64>() / k,
        )
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    let eps = smoothing * (0..d).map(|j| col_var(j, &all).1).fold(0.0, f64::max);
    let class = |want: Label| -> (f64, Vec<f64>, Vec<f64>) {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == want).collect();
        let (m, v): (Vec<f64>, Vec<f64>) = (0..d).map(|j| col_var(j, &idx)).unzip();
        let v = v.into_iter().map(|v| v + eps).collect();
        ((idx.len() as f64 / n).ln(), m, v)
    };
    let (pb, mb, vb) = class(Label::Bonafide);
    let (ps, ms, vs) = class(Label::Spoof);
    diag_gaussian_logpdf(x, &mb, &vb) + pb - diag_gaussian_logpdf(x, &ms, &vs) - ps
}

/// Small random two-class problem: `n` rows, `d` dims, class means `+-shift`.
pub fn small_problem(seed: u64, n: usize, d: usize, shift: f64) -> (Vec<Vec<f64>>, Vec<Label>) {
    use rand_distr::StandardNormal;
    let mut r = rng(seed);
    let labels: Vec<Label> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                Label::Bonafide
            } else {
                Label::Spoof
            }
        })
        .collect();
    let rows = labels
        .iter()
        .map(|&l| {
            let s = if l == Label::Bonafide { shift } else { -shift };
            (0..d)
                .map(|_| s + r.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    (rows, labels)
}

/// Ascending ranks of scores (ties broken by index).
pub fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}
