//! Fit each of the six back-ends with one grid cell on a small synthetic layer
//! and compare dev EER, parameter counts and fit status.

use greenspoof::classifiers::{fit_samples, Algorithm, FitStatus, Samples, TrainConfig};
use greenspoof::metrics::{eer_percent, f1, ScoredSet};
use greenspoof::selection::GridSpec;
use greenspoof::synthetic::{blobs, BlobSpec};

fn main() -> greenspoof::Result<()> {
    let data = blobs(&BlobSpec::small(32, 2.5, 300), 5, 3);
    let train = Samples::from_dataset(&data.train)?;
    let dev = Samples::from_dataset(&data.dev)?;

    println!(
        "{:<14} {:<70} {:>6} {:>7} {:>8}  status",
        "algorithm", "cell", "EER %", "F1", "#params"
    );
    for alg in Algorithm::ALL {
        // the first cell of each published grid
        let hyper = GridSpec::table1(alg).cells[0];
        let model = fit_samples(&TrainConfig::new(hyper, 1919), &train, Some(&dev))?;
        let set = ScoredSet::new(model.score_samples(&dev)?, dev.y.clone())?;
        println!(
            "{:<14} {:<70} {:>6.2} {:>7.4} {:>8}  {}",
            alg.name(),
            hyper.canonical(),
            eer_percent(&set),
            f1(&set, alg.default_threshold()),
            model.param_count(),
            match &model.status {
                FitStatus::Converged { .. } => "converged".to_string(),
                FitStatus::NotConverged { reason, .. } => format!("not converged: {reason}"),
            }
        );
    }
    Ok(())
}
