//! Grid search on desk-scale synthetic embeddings: two 768-dim Gaussian
//! classes at 1% Bayes error, 2000/500/2000 split.
//!
//! cargo run --release --example grid_search -- [algorithm ...]

use std::time::Instant;

use greenspoof::classifiers::Algorithm;
use greenspoof::selection::{grid_csv, run_grid, GridSpec, ReportOptions};
use greenspoof::synthetic::{bayes_error, blobs, BlobSpec};

fn main() -> greenspoof::Result<()> {
    let algorithms: Vec<Algorithm> = match std::env::args().skip(1).collect::<Vec<_>>() {
        names if names.is_empty() => vec![Algorithm::LogReg, Algorithm::SvmRbf],
        names => names
            .iter()
            .map(|n| n.parse())
            .collect::<greenspoof::Result<_>>()?,
    };
    let spec = BlobSpec::desk_scale();
    let data = blobs(&spec, 2, 1919);
    println!(
        "synthetic layer: dim {}, |mu| = {:.4}, Bayes error {:.2}%\n",
        spec.dim,
        spec.separation,
        100.0 * bayes_error(spec.separation)
    );
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    for alg in algorithms {
        let start = Instant::now();
        let out = run_grid(
            &GridSpec::table1(alg),
            &data.train,
            &data.dev,
            &data.eval,
            jobs,
        )?;
        let r = &out.result;
        print!("{}", grid_csv(r, &ReportOptions::default()));
        let eval = r.eval.expect("synthetic eval is labelled");
        println!(
            "=> {} chosen {}: eval EER {:.2}%, eval F1 {:.4}, {} params ({:.1}s)\n",
            alg,
            r.chosen_cell().hyper.canonical(),
            100.0 * eval.eer,
            eval.f1,
            r.param_count(),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
