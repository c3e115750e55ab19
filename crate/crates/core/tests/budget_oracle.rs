use greenspoof::budget::{
    conv_frames, cost_report, mac_breakdown, slice_macs, slice_params, EncoderConfig, SliceSpec,
};
use greenspoof::classifiers::Algorithm;
use greenspoof::selection::GridSpec;

/// (out channels, in channels, kernel, stride) of the seven conv stages.
const CONV: [(u64, u64, u64, u64); 7] = [
    (512, 1, 10, 5),
    (512, 512, 3, 2),
    (512, 512, 3, 2),
    (512, 512, 3, 2),
    (512, 512, 3, 2),
    (512, 512, 2, 2),
    (512, 512, 2, 2),
];
const D: u64 = 768;
const FFN: u64 = 3072;

/// Parameter count written out term by term.
fn params_oracle(k: u64) -> u64 {
    let conv: u64 = CONV.iter().map(|&(o, i, kk, _)| o * i * kk).sum::<u64>() + 2 * 512; // group norm after stage 1
    let projection = 2 * 512 + 512 * D + D; // layer norm + linear
    let pos = D * (D / 16) * 128 + D + 128; // grouped conv, bias, weight-norm gain
    let enc_norm = 2 * D;
    let attn = 4 * (D * D + D);
    let ffn = D * FFN + FFN + FFN * D + D;
    let layer = attn + ffn + 4 * D;
    conv + projection + pos + enc_norm + k * layer
}

fn frames_oracle(samples: u64) -> u64 {
    CONV.iter()
        .fold(samples, |n, &(_, _, k, s)| (n - k) / s + 1)
}

fn macs_oracle(k: u64, secs: f64) -> f64 {
    let mut n = (secs * 16_000.0).round() as u64;
    let mut total = 0u64;
    for &(o, i, kk, s) in &CONV {
        n = (n - kk) / s + 1;
        total += n * o * i * kk;
    }
    let t = n;
    total += t * 512 * D; // projection
    total += t * D * (D / 16) * 128; // positional conv
    let per_layer = 4 * t * D * D + 2 * t * t * D + 2 * t * D * FFN;
    (total + k * per_layer) as f64
}

fn keep(k: usize) -> SliceSpec {
    SliceSpec::new(k, &EncoderConfig::base()).unwrap()
}

#[test]
fn parameters_match_the_written_out_count() {
    let cfg = EncoderConfig::base();
    for k in 0..=12 {
        assert_eq!(
            slice_params(&cfg, keep(k)),
            params_oracle(k as u64),
            "k = {k}"
        );
    }
}

#[test]
fn frames_follow_the_stride_chain() {
    let cfg = EncoderConfig::base();
    for samples in [400usize, 1_000, 16_000, 56_000, 123_457] {
        assert_eq!(
            *conv_frames(&cfg, samples).last().unwrap() as u64,
            frames_oracle(samples as u64)
        );
    }
}

#[test]
fn macs_match_the_written_out_count() {
    let cfg = EncoderConfig::base();
    for k in 0..=12 {
        for secs in [1.0, 3.5, 7.25] {
            let got = mac_breakdown(&cfg, keep(k), secs).unwrap().total;
            assert_eq!(got, macs_oracle(k as u64, secs), "k = {k}, {secs} s");
        }
    }
}

#[test]
fn attention_cost_grows_quadratically() {
    let cfg = EncoderConfig::base();
    let one = mac_breakdown(&cfg, keep(1), 2.0)
        .unwrap()
        .per_transformer_layer;
    let two = mac_breakdown(&cfg, keep(1), 4.0)
        .unwrap()
        .per_transformer_layer;
    let r = |a: f64, b: f64| b / a;
    // frames roughly double, so linear terms roughly double and t^2 terms quadruple
    assert!((r(one.ffn, two.ffn) - 2.0).abs() < 0.02);
    assert!((r(one.projections, two.projections) - 2.0).abs() < 0.02);
    assert!((r(one.scores, two.scores) - 4.0).abs() < 0.05);
    assert!(r(one.total(), two.total()) > 2.0);
}

#[test]
fn slicing_two_layers_roughly_halves_the_macs() {
    let cfg = EncoderConfig::base();
    let full = slice_macs(&cfg, keep(12), 3.5).unwrap();
    let two = slice_macs(&cfg, keep(2), 3.5).unwrap();
    let reduction = 1.0 - two / full;
    assert!((reduction - 0.515).abs() < 0.01, "{reduction}");
}

#[test]
fn cost_report_multiplies_e_d_h() {
    let cfg = EncoderConfig::base();
    let grid = GridSpec::table1(Algorithm::SvmRbf);
    let r = cost_report(&grid, 25_380, keep(2), &cfg, 3.5, Some(1_200)).unwrap();
    assert_eq!(r.h, 3);
    assert_eq!(r.d, 25_380);
    assert!((r.cost_proxy - r.e_proxy_gmacs * 25_380.0 * 3.0).abs() < 1e-6);
    assert_eq!(r.frozen_param_count, params_oracle(2));
    assert_eq!(r.trainable_param_count, 1_200);
    assert_eq!(r.footnotes.len(), 3);
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["keep_layers"], 2);
}

#[test]
fn invalid_slices_are_usage_errors() {
    let cfg = EncoderConfig::base();
    assert!(SliceSpec::new(13, &cfg).is_err());
    assert!(slice_macs(&cfg, keep(2), 0.0).is_err());
    assert!(slice_macs(&cfg, keep(2), f64::NAN).is_err());
}
