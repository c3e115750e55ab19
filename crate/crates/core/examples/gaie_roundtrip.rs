//! Write frame-level embeddings to a GAIE file, read them back and check the
//! round trip is bit-exact.

use greenspoof::store::{
    read_embeddings_file, write_embeddings_file, GAIE_HEADER_LEN, GAIE_RECORD_OVERHEAD,
};
use greenspoof::synthetic::{blobs, frame_records, BlobSpec};

fn main() -> greenspoof::Result<()> {
    let dir = std::env::temp_dir().join(format!("greenspoof-gaie-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("dev_4.gaie");

    let data = blobs(&BlobSpec::small(768, 2.0, 20), 4, 7);
    let records = frame_records(&data.dev, (40, 200), 1.0, 7)?;
    write_embeddings_file(&records, &path)?;

    let back = read_embeddings_file(&path)?;
    assert_eq!(back.records, records);
    let frames: u64 = records.iter().map(|r| u64::from(r.frames)).sum();
    let expected = GAIE_HEADER_LEN as u64
        + records
            .iter()
            .map(|r| (GAIE_RECORD_OVERHEAD + r.utt_id.len()) as u64 + 4 * u64::from(r.frames) * 768)
            .sum::<u64>();
    println!(
        "{} records, {} frames, layer {}, dim {}",
        back.records.len(),
        frames,
        back.header.layer,
        back.header.dim
    );
    println!(
        "file size {} bytes (expected {expected}); round trip bit-exact",
        std::fs::metadata(&path)?.len()
    );
    for r in back.records.iter().take(3) {
        println!(
            "  {} {} frames, label in file: {}",
            r.utt_id, r.frames, r.label
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
