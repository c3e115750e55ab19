//! Detection metrics with bonafide as the positive class.
//!
//! One decision rule is used throughout: a trial is called bonafide iff its
//! score is `>= threshold`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::Label;

/// Scores paired with known labels; at least one trial of each class.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
    bonafide: usize,
    spoof: usize,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<ScoredSet> {
        if scores.len() != labels.len() {
            return Err(Error::usage(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::usage(format!("non-finite score at index {i}")));
        }
        if labels.iter().any(|l| !l.is_known()) {
            return Err(Error::usage("scored set contains unknown labels"));
        }
        let bonafide = labels.iter().filter(|&&l| l == Label::Bonafide).count();
        let spoof = labels.len() - bonafide;
        if bonafide == 0 || spoof == 0 {
            return Err(Error::usage(format!(
                "need both classes, got {bonafide} bonafide and {spoof} spoof"
            )));
        }
        Ok(ScoredSet {
            scores,
            labels,
            bonafide,
            spoof,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn bonafide_count(&self) -> usize {
        self.bonafide
    }

    pub fn spoof_count(&self) -> usize {
        self.spoof
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// Operating points in increasing threshold order: `-inf`, every distinct
/// score, `+inf`.
pub fn det_curve(s: &ScoredSet) -> Vec<DetPoint> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.scores[a].total_cmp(&s.scores[b]));

    let nb = s.bonafide as f64;
    let ns = s.spoof as f64;
    let mut points = Vec::with_capacity(s.len() + 2);
    points.push(DetPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        fnr: 0.0,
    });

    // Counts of trials strictly below the current threshold.
    let mut bona_below = 0usize;
    let mut spoof_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let t = s.scores[order[i]];
        points.push(DetPoint {
            threshold: t,
            fpr: (s.spoof - spoof_below) as f64 / ns,
            fnr: bona_below as f64 / nb,
        });
        while i < order.len() && s.scores[order[i]] == t {
            match s.labels[order[i]] {
                Label::Bonafide => bona_below += 1,
                _ => spoof_below += 1,
            }
            i += 1;
        }
    }
    points.push(DetPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        fnr: 1.0,
    });
    points
}

/// Equal error rate as a fraction.
///
/// Walks the DET points until `fnr - fpr` turns non-negative. An exact tie
/// returns that rate; otherwise the two straight segments between the
/// bracketing operating points are intersected.
pub fn eer(s: &ScoredSet) -> f64 {
    eer_from_points(&det_curve(s))
}

pub fn eer_from_points(points: &[DetPoint]) -> f64 {
    let mut prev = points[0];
    for &p in points {
        let d = p.fnr - p.fpr;
        if d == 0.0 {
            return p.fpr;
        }
        if d > 0.0 {
            let d0 = prev.fnr - prev.fpr;
            let t = -d0 / (d - d0);
            return prev.fpr + t * (p.fpr - prev.fpr);
        }
        prev = p;
    }
    // unreachable for a valid curve: the +inf sentinel has fnr - fpr = 1
    0.5
}

pub fn eer_percent(s: &ScoredSet) -> f64 {
    100.0 * eer(s)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn f1(&self) -> f64 {
        if self.tp + self.fp == 0 {
            return 0.0;
        }
        let p = self.tp as f64 / (self.tp + self.fp) as f64;
        let r = self.tp as f64 / (self.tp + self.fn_) as f64;
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

pub fn confusion(s: &ScoredSet, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&score, &label) in s.scores.iter().zip(&s.labels) {
        match (score >= threshold, label == Label::Bonafide) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn f1(s: &ScoredSet, threshold: f64) -> f64 {
    confusion(s, threshold).f1()
}

/// One row of a score dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub utt_id: String,
    pub score: f64,
    pub label: Label,
}

/// CSV with header `utt_id,score,label`. Scores use the shortest
/// representation that parses back to the same `f64`.
pub fn write_scores<W: Write>(rows: &[ScoreRow], mut w: W) -> Result<()> {
    writeln!(w, "utt_id,score,label")?;
    for r in rows {
        if r.utt_id.contains([',', '\n', '"']) {
            return Err(Error::usage(format!(
                "utt_id {:?} is not CSV-safe",
                r.utt_id
            )));
        }
        writeln!(w, "{},{},{}", r.utt_id, r.score, r.label)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores<R: BufRead>(r: R) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line.trim() != "utt_id,score,label" {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 fields, found {}",
                fields.len()
            )));
        }
        let score = fields[1]
            .parse::<f64>()
            .map_err(|e| parse_err(format!("score: {e}")))?;
        let label = fields[2]
            .parse::<Label>()
            .map_err(|e| parse_err(e.to_string()))?;
        rows.push(ScoreRow {
            utt_id: fields[0].to_string(),
            score,
            label,
        });
    }
    Ok(rows)
}

/// Builds a scored set from score rows, or `None` when any label is unknown.
pub fn scored_set_from_rows(rows: &[ScoreRow]) -> Option<Result<ScoredSet>> {
    if rows.iter().any(|r| !r.label.is_known()) {
        return None;
    }
    Some(ScoredSet::new(
        rows.iter().map(|r| r.score).collect(),
        rows.iter().map(|r| r.label).collect(),
    ))
}
