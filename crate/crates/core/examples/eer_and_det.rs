//! EER, DET points and F1 on a handful of scores, plus the score CSV round trip.

use greenspoof::metrics::{
    confusion, det_curve, eer, read_scores, scored_set_from_rows, write_scores, ScoreRow, ScoredSet,
};
use greenspoof::Label::{Bonafide as B, Spoof as S};

fn main() -> greenspoof::Result<()> {
    let scores = vec![0.95, 0.9, 0.7, 0.7, 0.55, 0.4, 0.3, 0.2, 0.1, 0.05];
    let labels = vec![B, B, S, B, B, S, S, B, S, S];
    let set = ScoredSet::new(scores.clone(), labels.clone())?;

    println!("{:>10} {:>6} {:>6}", "threshold", "fpr", "fnr");
    for p in det_curve(&set) {
        println!("{:>10} {:>6.3} {:>6.3}", p.threshold, p.fpr, p.fnr);
    }
    println!("EER = {:.4} (fraction)", eer(&set));

    let c = confusion(&set, 0.5);
    println!(
        "threshold 0.5: TP {} FP {} TN {} FN {} -> F1 {:.4}",
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        c.f1()
    );

    // Only ranks matter: a strictly increasing transform leaves the EER alone.
    let logit: Vec<f64> = scores.iter().map(|p| (p / (1.0 - p)).ln()).collect();
    assert_eq!(eer(&ScoredSet::new(logit, labels.clone())?), eer(&set));

    let rows: Vec<ScoreRow> = scores
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (&score, &label))| ScoreRow {
            utt_id: format!("utt_{i:02}"),
            score,
            label,
        })
        .collect();
    let mut csv = Vec::new();
    write_scores(&rows, &mut csv)?;
    print!("\n{}", String::from_utf8_lossy(&csv));
    let back = read_scores(csv.as_slice())?;
    let again = scored_set_from_rows(&back).expect("labelled")?;
    assert_eq!(eer(&again), eer(&set));
    Ok(())
}
