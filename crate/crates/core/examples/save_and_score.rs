//! Pick the best SVM cell, save the winner with its standardizer, reload it and
//! score eval utterances into a score CSV.

use greenspoof::classifiers::{read_model_file, write_model_file, Algorithm};
use greenspoof::metrics::{eer_percent, write_scores, ScoreRow, ScoredSet};
use greenspoof::selection::{run_grid, GridSpec};
use greenspoof::synthetic::{blobs, BlobSpec};

fn main() -> greenspoof::Result<()> {
    let data = blobs(&BlobSpec::small(64, 2.5, 400), 2, 21);
    let spec = GridSpec::table1(Algorithm::SvmRbf).with_standardize(true);
    let out = run_grid(&spec, &data.train, &data.dev, &data.eval, 2)?;

    let dir = std::env::temp_dir().join(format!("greenspoof-model-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("svm.gaim");
    write_model_file(&out.model, &path)?;
    let model = read_model_file(&path)?;
    assert_eq!(model, out.model);

    let rows: Vec<ScoreRow> = data
        .eval
        .items
        .iter()
        .map(|i| {
            Ok(ScoreRow {
                utt_id: i.utt_id.clone(),
                score: model.score(&i.features.values)?,
                label: i.label,
            })
        })
        .collect::<greenspoof::Result<_>>()?;
    let set = ScoredSet::new(
        rows.iter().map(|r| r.score).collect(),
        rows.iter().map(|r| r.label).collect(),
    )?;
    println!(
        "{} saved to {} ({} bytes); {} support vectors -> {} params ({})",
        out.result.chosen_cell().hyper.canonical(),
        path.display(),
        std::fs::metadata(&path)?.len(),
        model.scorer.param_count() - 1,
        model.scorer.param_count(),
        model.scorer.param_count_convention()
    );
    println!("reloaded model eval EER {:.2}%", eer_percent(&set));
    let mut csv = Vec::new();
    write_scores(&rows[..5], &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
