//! Cost accounting for a truncated speech encoder and the downstream search.
//!
//! Parameter counts follow the module structure of a wav2vec 2.0 style encoder:
//!
//! | block               | parameters                                              |
//! |---------------------|---------------------------------------------------------|
//! | conv feature encoder| `sum c_out*c_in*k` (+bias) + norm affine                |
//! | feature projection  | layer norm `2c` + linear `c*d + d`                      |
//! | positional conv     | grouped conv `d*(d/g)*k + d` + weight-norm gain `k`     |
//! | encoder norm        | `2d`                                                    |
//! | transformer layer   | attention `4(d^2+d)` + FFN `2df + f + d` + 2 norms `4d` |
//!
//! MACs count one multiply plus one add as one MAC and cover only matrix
//! products and convolutions; norms, softmax and activations are left out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvNorm {
    /// Group norm with one group per channel after the first conv only.
    FirstLayerGroup,
    /// Layer norm after every conv.
    EveryLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub sample_rate: u32,
    pub conv_layers: Vec<ConvLayer>,
    pub conv_bias: bool,
    pub conv_norm: ConvNorm,
    pub model_dim: usize,
    pub ffn_dim: usize,
    pub attention_heads: usize,
    pub num_layers: usize,
    pub pos_conv_kernel: usize,
    pub pos_conv_groups: usize,
}

impl EncoderConfig {
    /// The 12-layer, 768-dimensional BASE encoder.
    pub fn base() -> EncoderConfig {
        let mut conv_layers = vec![ConvLayer {
            channels: 512,
            kernel: 10,
            stride: 5,
        }];
        conv_layers.extend(std::iter::repeat_n(
            ConvLayer {
                channels: 512,
                kernel: 3,
                stride: 2,
            },
            4,
        ));
        conv_layers.extend(std::iter::repeat_n(
            ConvLayer {
                channels: 512,
                kernel: 2,
                stride: 2,
            },
            2,
        ));
        EncoderConfig {
            sample_rate: 16_000,
            conv_layers,
            conv_bias: false,
            conv_norm: ConvNorm::FirstLayerGroup,
            model_dim: 768,
            ffn_dim: 3072,
            attention_heads: 12,
            num_layers: 12,
            pos_conv_kernel: 128,
            pos_conv_groups: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.sample_rate > 0
            && !self.conv_layers.is_empty()
            && self
                .conv_layers
                .iter()
                .all(|c| c.channels > 0 && c.kernel > 0 && c.stride > 0)
            && self.model_dim > 0
            && self.ffn_dim > 0
            && self.attention_heads > 0
            && self.pos_conv_kernel > 0
            && self.pos_conv_groups > 0;
        if !positive {
            return Err(Error::usage("encoder config dimensions must be positive"));
        }
        if !self.model_dim.is_multiple_of(self.pos_conv_groups)
            || !self.model_dim.is_multiple_of(self.attention_heads)
        {
            return Err(Error::usage(
                "model_dim must be divisible by pos_conv_groups and attention_heads",
            ));
        }
        Ok(())
    }
}

/// Keep the feature encoder and transformer layers `1..=keep_layers`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub keep_layers: usize,
}

impl SliceSpec {
    pub fn new(keep_layers: usize, cfg: &EncoderConfig) -> Result<SliceSpec> {
        if keep_layers > cfg.num_layers {
            return Err(Error::usage(format!(
                "keep_layers {keep_layers} exceeds the encoder's {} layers",
                cfg.num_layers
            )));
        }
        Ok(SliceSpec { keep_layers })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    pub feature_encoder: u64,
    pub feature_projection: u64,
    pub positional_conv: u64,
    pub encoder_norm: u64,
    pub per_transformer_layer: u64,
    pub transformer_layers: u64,
    pub total: u64,
}

pub fn feature_encoder_params(cfg: &EncoderConfig) -> u64 {
    let mut c_in = 1;
    let mut total = 0u64;
    for (i, l) in cfg.conv_layers.iter().enumerate() {
        total += (l.channels * c_in * l.kernel) as u64;
        if cfg.conv_bias {
            total += l.channels as u64;
        }
        let normed = match cfg.conv_norm {
            ConvNorm::FirstLayerGroup => i == 0,
            ConvNorm::EveryLayer => true,
        };
        if normed {
            total += 2 * l.channels as u64;
        }
        c_in = l.channels;
    }
    total
}

pub fn transformer_layer_params(cfg: &EncoderConfig) -> u64 {
    let d = cfg.model_dim as u64;
    let f = cfg.ffn_dim as u64;
    let attention = 4 * (d * d + d);
    let ffn = d * f + f + f * d + d;
    let norms = 2 * 2 * d;
    attention + ffn + norms
}

pub fn param_breakdown(cfg: &EncoderConfig, slice: SliceSpec) -> ParamBreakdown {
    let d = cfg.model_dim as u64;
    let c = cfg.conv_layers.last().map(|l| l.channels).unwrap_or(0) as u64;
    let feature_encoder = feature_encoder_params(cfg);
    let feature_projection = 2 * c + c * d + d;
    let k = cfg.pos_conv_kernel as u64;
    let positional_conv = d * (d / cfg.pos_conv_groups as u64) * k + d + k;
    let encoder_norm = 2 * d;
    let per_transformer_layer = transformer_layer_params(cfg);
    let transformer_layers = per_transformer_layer * slice.keep_layers as u64;
    ParamBreakdown {
        feature_encoder,
        feature_projection,
        positional_conv,
        encoder_norm,
        per_transformer_layer,
        transformer_layers,
        total: feature_encoder
            + feature_projection
            + positional_conv
            + encoder_norm
            + transformer_layers,
    }
}

/// Frozen parameters of the slice: feature encoder, projection, positional
/// conv, encoder norm and the first `keep_layers` transformer layers.
pub fn slice_params(cfg: &EncoderConfig, slice: SliceSpec) -> u64 {
    param_breakdown(cfg, slice).total
}

/// Output length of each conv stage for a raw input of `samples` samples.
pub fn conv_frames(cfg: &EncoderConfig, samples: usize) -> Vec<usize> {
    let mut len = samples;
    cfg.conv_layers
        .iter()
        .map(|l| {
            len = if len >= l.kernel {
                (len - l.kernel) / l.stride + 1
            } else {
                0
            };
            len
        })
        .collect()
}

/// MACs of one conv stage producing `out_len` frames from `c_in` channels.
pub fn conv_layer_macs(layer: &ConvLayer, c_in: usize, out_len: usize) -> f64 {
    (out_len * layer.channels * c_in * layer.kernel) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerMacs {
    /// Q, K, V and output projections.
    pub projections: f64,
    /// `Q K^T`.
    pub scores: f64,
    /// Attention-weighted sum of values.
    pub context: f64,
    pub ffn: f64,
}

impl LayerMacs {
    pub fn total(&self) -> f64 {
        self.projections + self.scores + self.context + self.ffn
    }
}

pub fn transformer_layer_macs(cfg: &EncoderConfig, frames: usize) -> LayerMacs {
    let t = frames as f64;
    let d = cfg.model_dim as f64;
    let f = cfg.ffn_dim as f64;
    LayerMacs {
        projections: 4.0 * t * d * d,
        scores: t * t * d,
        context: t * t * d,
        ffn: 2.0 * t * d * f,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacBreakdown {
    pub samples: usize,
    pub frames: usize,
    pub conv: Vec<f64>,
    pub feature_projection: f64,
    pub positional_conv: f64,
    pub per_transformer_layer: LayerMacs,
    pub transformer_layers: f64,
    pub total: f64,
}

pub fn mac_breakdown(
    cfg: &EncoderConfig,
    slice: SliceSpec,
    input_seconds: f64,
) -> Result<MacBreakdown> {
    if !(input_seconds > 0.0 && input_seconds.is_finite()) {
        return Err(Error::usage(format!(
            "input_seconds must be positive, got {input_seconds}"
        )));
    }
    let samples = (input_seconds * cfg.sample_rate as f64).round() as usize;
    let lens = conv_frames(cfg, samples);
    let mut c_in = 1;
    let mut conv = Vec::with_capacity(lens.len());
    for (l, &out) in cfg.conv_layers.iter().zip(&lens) {
        conv.push(conv_layer_macs(l, c_in, out));
        c_in = l.channels;
    }
    let frames = *lens.last().unwrap_or(&0);
    let t = frames as f64;
    let d = cfg.model_dim as f64;
    let feature_projection = t * c_in as f64 * d;
    let positional_conv =
        t * d * (cfg.model_dim / cfg.pos_conv_groups) as f64 * cfg.pos_conv_kernel as f64;
    let per_transformer_layer = transformer_layer_macs(cfg, frames);
    let transformer_layers = per_transformer_layer.total() * slice.keep_layers as f64;
    let total =
        conv.iter().sum::<f64>() + feature_projection + positional_conv + transformer_layers;
    Ok(MacBreakdown {
        samples,
        frames,
        conv,
        feature_projection,
        positional_conv,
        per_transformer_layer,
        transformer_layers,
        total,
    })
}

/// MACs of the slice for one input of `input_seconds`, in GMACs.
pub fn slice_macs(cfg: &EncoderConfig, slice: SliceSpec, input_seconds: f64) -> Result<f64> {
    Ok(mac_breakdown(cfg, slice, input_seconds)?.total / 1e9)
}

pub const MAC_FOOTNOTE: &str = "1 MAC = one multiply + one add; only convolutions and matrix products are counted (norms, softmax and activations excluded).";
pub const COST_FOOTNOTE: &str = "cost_proxy = E x D x H in GMAC x examples x grid cells; a relative proxy, not an energy estimate.";
pub const PARAM_FOOTNOTE: &str = "frozen parameters: conv feature encoder, feature projection, positional conv, encoder norm and the kept transformer layers.";

/// `E`, `D` and `H` of the cost relation `Cost ~ E x D x H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub keep_layers: usize,
    pub input_seconds: f64,
    /// Front-end GMACs for one average-length example.
    pub e_proxy_gmacs: f64,
    /// What the downstream fit costs, in words.
    pub downstream: String,
    /// Training-set cardinality.
    pub d: usize,
    /// Number of grid cells.
    pub h: usize,
    pub cost_proxy: f64,
    pub frozen_param_count: u64,
    pub trainable_param_count: u64,
    pub footnotes: Vec<String>,
}

impl CostReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cost report serializes")
    }
}

/// Assembles the cost report. `trainable` is the parameter count of the chosen
/// downstream model, when one has been fitted.
pub fn cost_report(
    grid: &GridSpec,
    train_size: usize,
    slice: SliceSpec,
    cfg: &EncoderConfig,
    input_seconds: f64,
    trainable: Option<usize>,
) -> Result<CostReport> {
    cfg.validate()?;
    let e = slice_macs(cfg, slice, input_seconds)?;
    let h = grid.cells.len();
    let downstream = match trainable {
        Some(p) => format!(
            "{}: {h} grid cells, chosen model has {p} trainable parameters",
            grid.algorithm
        ),
        None => format!("{}: {h} grid cells", grid.algorithm),
    };
    Ok(CostReport {
        keep_layers: slice.keep_layers,
        input_seconds,
        e_proxy_gmacs: e,
        downstream,
        d: train_size,
        h,
        cost_proxy: e * train_size as f64 * h as f64,
        frozen_param_count: slice_params(cfg, slice),
        trainable_param_count: trainable.unwrap_or(0) as u64,
        footnotes: vec![
            MAC_FOOTNOTE.to_string(),
            PARAM_FOOTNOTE.to_string(),
            COST_FOOTNOTE.to_string(),
        ],
    })
}
