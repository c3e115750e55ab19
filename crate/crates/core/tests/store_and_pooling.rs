use std::collections::BTreeMap;
use std::io::Cursor;

use greenspoof::features::{pool, Standardizer, SCALE_FLOOR};
use greenspoof::store::{
    assemble, parse_protocol, read_gaie, write_gaie, EmbeddingRecord, Partition, ProtocolEntry,
    GAIE_HEADER_LEN, GAIE_RECORD_OVERHEAD,
};
use greenspoof::{Error, Label};
use proptest::prelude::*;

fn record_strategy(dim: u32, layer: u16) -> impl Strategy<Value = EmbeddingRecord> {
    (
        "[a-z0-9_]{1,12}",
        1u32..6,
        prop_oneof![
            Just(Label::Spoof),
            Just(Label::Bonafide),
            Just(Label::Unknown)
        ],
    )
        .prop_flat_map(move |(id, frames, label)| {
            prop::collection::vec(-1e6f32..1e6, (frames * dim) as usize).prop_map(move |values| {
                EmbeddingRecord::new(id.clone(), layer, frames, dim, values)
                    .unwrap()
                    .with_label(label)
            })
        })
}

fn file_strategy() -> impl Strategy<Value = (u32, u16, Vec<EmbeddingRecord>)> {
    (1u32..5, 0u16..25).prop_flat_map(|(dim, layer)| {
        prop::collection::vec(record_strategy(dim, layer), 0..8).prop_map(move |r| (dim, layer, r))
    })
}

fn encode(dim: u32, layer: u16, records: &[EmbeddingRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_gaie(dim, layer, records, &mut buf).unwrap();
    buf
}

fn entry(id: &str, label: Label) -> ProtocolEntry {
    ProtocolEntry {
        speaker_id: "S".into(),
        utt_id: id.into(),
        attack_id: (label == Label::Spoof).then(|| "A01".into()),
        label,
    }
}

proptest! {
    #[test]
    fn gaie_round_trips_bit_exactly((dim, layer, recs) in file_strategy()) {
        let bytes = encode(dim, layer, &recs);
        let f = read_gaie(Cursor::new(&bytes)).unwrap();
        prop_assert_eq!(f.header.dim, dim);
        prop_assert_eq!(f.header.layer, layer);
        prop_assert_eq!(f.header.record_count, recs.len() as u64);
        prop_assert_eq!(f.records.len(), recs.len());
        for (a, b) in f.records.iter().zip(&recs) {
            prop_assert_eq!(&a.utt_id, &b.utt_id);
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.frames, b.frames);
            let ab: Vec<u32> = a.values.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(ab, bb);
        }
        prop_assert_eq!(encode(dim, layer, &f.records), bytes);
    }

    #[test]
    fn gaie_size_is_exact((dim, layer, recs) in file_strategy()) {
        let expected = GAIE_HEADER_LEN
            + recs
                .iter()
                .map(|r| GAIE_RECORD_OVERHEAD + r.utt_id.len() + 4 * (r.frames * dim) as usize)
                .sum::<usize>();
        prop_assert_eq!(encode(dim, layer, &recs).len(), expected);
    }

    #[test]
    fn truncation_is_a_format_error((dim, layer, recs) in file_strategy(), cut in 1usize..64) {
        let bytes = encode(dim, layer, &recs);
        let keep = bytes.len().saturating_sub(cut);
        let err = read_gaie(Cursor::new(&bytes[..keep])).unwrap_err();
        prop_assert!(matches!(err, Error::Format { .. }), "{}", err);
    }

    #[test]
    fn pooling_is_frame_order_invariant(rec in record_strategy(3, 1), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rows: Vec<Vec<f32>> = rec.rows().map(|r| r.to_vec()).collect();
        rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = EmbeddingRecord::new("x", 1, rec.frames, 3, rows.concat()).unwrap();
        let a = pool(&rec).values;
        let b = pool(&shuffled).values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn pooling_is_the_frame_mean(rec in record_strategy(4, 2)) {
        let p = pool(&rec);
        prop_assert_eq!(p.values.len(), 4);
        for j in 0..4 {
            let col: Vec<f64> = rec.rows().map(|r| f64::from(r[j])).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            prop_assert!((p.values[j] - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(p.values[j] >= lo - 1e-9 && p.values[j] <= hi + 1e-9);
        }
    }

    #[test]
    fn standardized_train_has_zero_mean_unit_sd(
        rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 2..30)
    ) {
        let vs: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, v)| greenspoof::features::PooledVector { utt_id: format!("u{i}"), layer: 0, values: v.clone() })
            .collect();
        let st = Standardizer::fit(&vs).unwrap();
        let n = vs.len() as f64;
        for j in 0..3 {
            let t: Vec<f64> = vs.iter().map(|v| st.transform(v).unwrap().values[j]).collect();
            let m = t.iter().sum::<f64>() / n;
            let sd = (t.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(m.abs() < 1e-9);
            if st.scale[j] > 1e-6 {
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
            prop_assert!(st.scale[j] >= SCALE_FLOOR);
        }
    }

    #[test]
    fn assemble_ignores_input_order(n in 1usize..30, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let recs: Vec<EmbeddingRecord> = (0..n)
            .map(|i| EmbeddingRecord::new(format!("u{i:03}"), 4, 1, 1, vec![i as f32]).unwrap())
            .collect();
        let entries: Vec<ProtocolEntry> = (0..n)
            .map(|i| entry(&format!("u{i:03}"), if i % 3 == 0 { Label::Bonafide } else { Label::Spoof }))
            .collect();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut recs2 = recs.clone();
        recs2.shuffle(&mut r);
        let mut entries2 = entries.clone();
        entries2.shuffle(&mut r);
        let a = assemble(recs, &entries, Partition::Train, false).unwrap();
        let b = assemble(recs2, &entries2, Partition::Train, false).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn assemble_matches_bruteforce_join(
        ids in prop::collection::btree_set(0u16..60, 0..25),
        labelled in prop::collection::btree_map(0u16..60, any::<bool>(), 0..40),
    ) {
        let recs: Vec<EmbeddingRecord> = ids
            .iter()
            .map(|i| EmbeddingRecord::new(format!("u{i:02}"), 1, 1, 1, vec![f32::from(*i)]).unwrap().with_label(Label::Spoof))
            .collect();
        let entries: Vec<ProtocolEntry> = labelled
            .iter()
            .map(|(i, b)| entry(&format!("u{i:02}"), if *b { Label::Bonafide } else { Label::Spoof }))
            .collect();
        let ds = assemble(recs, &entries, Partition::Eval, true).unwrap();
        let want: BTreeMap<String, Label> = ids
            .iter()
            .map(|i| {
                let l = match labelled.get(i) {
                    Some(true) => Label::Bonafide,
                    Some(false) => Label::Spoof,
                    None => Label::Unknown,
                };
                (format!("u{i:02}"), l)
            })
            .collect();
        let got: BTreeMap<String, Label> = ds.items.iter().map(|i| (i.utt_id.clone(), i.label)).collect();
        prop_assert_eq!(got, want);
        // train refuses what eval tolerates
        let missing = ids.iter().any(|i| !labelled.contains_key(i));
        let recs: Vec<EmbeddingRecord> = ids
            .iter()
            .map(|i| EmbeddingRecord::new(format!("u{i:02}"), 1, 1, 1, vec![0.0]).unwrap())
            .collect();
        prop_assert_eq!(assemble(recs, &entries, Partition::Train, true).is_err(), missing);
    }
}

#[test]
fn bad_magic_and_version_are_rejected() {
    let rec = EmbeddingRecord::new("a", 0, 1, 2, vec![1.0, 2.0]).unwrap();
    let mut bytes = encode(2, 0, &[rec]);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        read_gaie(Cursor::new(&bad)),
        Err(Error::Format { .. })
    ));
    bytes[4] = 2;
    assert!(matches!(
        read_gaie(Cursor::new(&bytes)),
        Err(Error::Format { .. })
    ));
}

#[test]
fn trailing_bytes_are_rejected() {
    let rec = EmbeddingRecord::new("a", 0, 1, 2, vec![1.0, 2.0]).unwrap();
    let mut bytes = encode(2, 0, &[rec]);
    bytes.push(0);
    assert!(matches!(
        read_gaie(Cursor::new(&bytes)),
        Err(Error::Format { .. })
    ));
}

#[test]
fn protocol_errors_carry_line_numbers() {
    let text = "S1 u1 - - bonafide\nS1 u2 - A01 spoof\nS1 u3 - A02 fake\n";
    match parse_protocol(Cursor::new(text)) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let text = "S1 u1 - bonafide\n";
    assert!(matches!(
        parse_protocol(Cursor::new(text)),
        Err(Error::Parse { line: 1, .. })
    ));
    let text = "S1 u1 - A01 bonafide\n";
    assert!(matches!(
        parse_protocol(Cursor::new(text)),
        Err(Error::Parse { line: 1, .. })
    ));
}

#[test]
fn duplicates_are_assembly_errors() {
    let r = |id: &str| EmbeddingRecord::new(id, 0, 1, 1, vec![0.0]).unwrap();
    let e = [entry("a", Label::Spoof), entry("b", Label::Bonafide)];
    match assemble(vec![r("a"), r("b"), r("a")], &e, Partition::Dev, false) {
        Err(Error::Assembly { offenders, .. }) => assert_eq!(offenders, vec!["a".to_string()]),
        other => panic!("{other:?}"),
    }
    let e2 = [entry("a", Label::Spoof), entry("a", Label::Spoof)];
    assert!(matches!(
        assemble(vec![r("a")], &e2, Partition::Dev, false),
        Err(Error::Assembly { .. })
    ));
}

#[test]
fn stored_labels_never_reach_the_dataset() {
    let rec = EmbeddingRecord::new("a", 0, 1, 1, vec![0.0])
        .unwrap()
        .with_label(Label::Bonafide);
    let ds = assemble(
        vec![rec],
        &[entry("a", Label::Spoof)],
        Partition::Train,
        false,
    )
    .unwrap();
    assert_eq!(ds.items[0].label, Label::Spoof);
}
