//! 2-D PCA projection of a pooled layer, written as CSV for plotting.
//!
//! cargo run --example pca_scatter -- [out.csv]

use greenspoof::selection::{pca_scatter, scatter_csv};
use greenspoof::synthetic::{blobs, BlobSpec};
use greenspoof::Label;

fn main() -> greenspoof::Result<()> {
    let data = blobs(&BlobSpec::small(768, 3.0, 400), 2, 5);
    let points = pca_scatter(&data.eval)?;

    // The class means differ along one direction, so PC1 should split them.
    let mean_x = |l: Label| {
        let xs: Vec<f64> = points
            .iter()
            .filter(|p| p.label == l)
            .map(|p| p.x)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    println!(
        "mean PC1: bonafide {:+.3}, spoof {:+.3}",
        mean_x(Label::Bonafide),
        mean_x(Label::Spoof)
    );

    let csv = scatter_csv(&points);
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, csv)?;
            println!("wrote {} points to {path}", points.len());
        }
        None => println!(
            "{}\n...",
            csv.lines().take(6).collect::<Vec<_>>().join("\n")
        ),
    }
    Ok(())
}
