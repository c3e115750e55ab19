//! Sweep several algorithms over a synthetic 13-layer corpus in which only
//! layers 2 and 3 carry class signal, then write the sweep report.
//!
//! cargo run --release --example layer_sweep -- [report_dir]

use greenspoof::classifiers::Algorithm;
use greenspoof::selection::{
    run_sweep, sweep_markdown, write_sweep_report, GridSpec, ReportOptions,
};
use greenspoof::synthetic::{planted_corpus, BlobSpec};

fn main() -> greenspoof::Result<()> {
    let layers: Vec<u16> = (0..=12).collect();
    let spec = BlobSpec {
        dim: 64,
        separation: 3.0,
        train: 300,
        dev: 150,
        eval: 300,
        bonafide_fraction: 0.5,
    };
    let corpus = planted_corpus(&spec, &layers, &[2, 3], 1919);
    let grids: Vec<GridSpec> = [
        Algorithm::Knn,
        Algorithm::LogReg,
        Algorithm::GaussianNb,
        Algorithm::DecisionTree,
    ]
    .into_iter()
    .map(GridSpec::table1)
    .collect();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let sweep = run_sweep(&grids, &layers, &corpus, jobs)?;

    let opts = ReportOptions {
        front_end: "synthetic Gaussian layers".into(),
        ..ReportOptions::default()
    };
    print!("{}", sweep_markdown(&sweep, &opts));
    if let Some(dir) = std::env::args().nth(1) {
        for p in write_sweep_report(&sweep, dir.as_ref(), &opts)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
