//! Frame-average pooling, then an optional per-dimension standardizer fitted on
//! train and applied to dev.

use greenspoof::features::{fit_standardizer, pool, pool_dataset};
use greenspoof::store::{assemble, Partition};
use greenspoof::synthetic::{blobs, frame_records, BlobSpec};

fn main() -> greenspoof::Result<()> {
    let data = blobs(&BlobSpec::small(16, 2.0, 200), 3, 11);
    let records = frame_records(&data.train, (5, 60), 0.8, 11)?;

    let first = &records[0];
    let v = pool(first);
    println!(
        "{}: {} frames x {} dims -> pooled[0..4] = {:.4?}",
        first.utt_id,
        first.frames,
        first.dim,
        &v.values[..4]
    );

    // Labels come from the protocol entries, never from the file.
    let entries = greenspoof::store::parse_protocol(
        greenspoof::synthetic::protocol_text(&data.train).as_bytes(),
    )?;
    let train = pool_dataset(assemble(records, &entries, Partition::Train, false)?);
    let std = fit_standardizer(&train)?;
    let z = std.transform_dataset(&train)?;

    let n = z.len() as f64;
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for j in 0..16 {
        let m = z.items.iter().map(|i| i.features.values[j]).sum::<f64>() / n;
        let var = z
            .items
            .iter()
            .map(|i| (i.features.values[j] - m).powi(2))
            .sum::<f64>()
            / n;
        worst_mean = worst_mean.max(m.abs());
        worst_var = worst_var.max((var - 1.0).abs());
    }
    println!(
        "after standardizing train: max |mean| {worst_mean:.2e}, max |var - 1| {worst_var:.2e}"
    );

    let dev = std.transform_dataset(&data.dev)?;
    println!(
        "dev[0] before {:.3?}\n       after  {:.3?}",
        &data.dev.items[0].features.values[..4],
        &dev.items[0].features.values[..4]
    );
    Ok(())
}
