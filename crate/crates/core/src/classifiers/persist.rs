//! Versioned binary container for fitted models.
//!
//! ```text
//! "GAIM" | version u32 | algorithm tag u8 | hyperparameters (canonical string)
//! | seed u64 | status | dim u32 | layer u16 | threshold f64
//! | standardizer flag u8 [mean, scale] | algorithm payload
//! ```
//!
//! All integers little-endian; strings are `u16` length + UTF-8; float arrays
//! are `u64` length + `f64` values. Floats are stored bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::knn::Knn;
use super::logreg::LogReg;
use super::mlp::Network;
use super::naive_bayes::GaussianNb;
use super::svm::SvmModel;
use super::tree::{DecisionTree, Node};
use super::{Algorithm, FitStatus, Hyperparams, Model, OutputHead, TrainConfig, TrainedScorer};
use crate::error::{Error, Result};
use crate::features::Standardizer;

const MAGIC: [u8; 4] = *b"GAIM";
const VERSION: u32 = 1;

/// A fitted scorer plus everything needed to apply it to new embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub scorer: TrainedScorer,
    pub standardizer: Option<Standardizer>,
    pub layer: u16,
    /// F1 decision threshold chosen at training time.
    pub threshold: f64,
}

impl ModelBundle {
    /// Standardizes (when fitted with a standardizer) and scores.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match &self.standardizer {
            Some(s) => self.scorer.score(&s.transform_slice(x)?),
            None => self.scorer.score(x),
        }
    }
}

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.0.write_all(&[v])?)
    }
    fn u16(&mut self, v: u16) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn str(&mut self, s: &str) -> Result<()> {
        let len = u16::try_from(s.len()).map_err(|_| Error::usage("string too long"))?;
        self.u16(len)?;
        Ok(self.0.write_all(s.as_bytes())?)
    }
    fn floats(&mut self, v: &[f64]) -> Result<()> {
        self.usize(v.len())?;
        for &x in v {
            self.f64(x)?;
        }
        Ok(())
    }
}

struct In<R: Read>(R);

impl<R: Read> In<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format(None, "truncated model file"),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format(None, "length overflow"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn str(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let mut b = vec![0u8; len];
        self.0
            .read_exact(&mut b)
            .map_err(|_| Error::format(None, "truncated model file"))?;
        String::from_utf8(b).map_err(|_| Error::format(None, "invalid UTF-8 in model file"))
    }
    fn floats(&mut self) -> Result<Vec<f64>> {
        let len = self.usize()?;
        let mut v = Vec::with_capacity(len.min(1 << 24));
        for _ in 0..len {
            v.push(self.f64()?);
        }
        Ok(v)
    }
    fn matrix(&mut self, cols: usize) -> Result<Array2<f64>> {
        let flat = self.floats()?;
        let rows = flat.len().checked_div(cols).unwrap_or(0);
        Array2::from_shape_vec((rows, cols), flat)
            .map_err(|_| Error::format(None, "matrix shape mismatch"))
    }
}

pub fn write_model<W: Write>(bundle: &ModelBundle, w: W) -> Result<()> {
    let mut o = Out(w);
    let s = &bundle.scorer;
    o.0.write_all(&MAGIC)?;
    o.u32(VERSION)?;
    o.u8(s.algorithm().tag())?;
    o.str(&s.config.hyper.canonical())?;
    o.u64(s.config.seed)?;
    match &s.status {
        FitStatus::Converged { iterations } => {
            o.u8(0)?;
            o.usize(*iterations)?;
        }
        FitStatus::NotConverged { iterations, reason } => {
            o.u8(1)?;
            o.usize(*iterations)?;
            o.str(reason)?;
        }
    }
    o.u32(s.dim as u32)?;
    o.u16(bundle.layer)?;
    o.f64(bundle.threshold)?;
    match &bundle.standardizer {
        None => o.u8(0)?,
        Some(st) => {
            o.u8(1)?;
            o.floats(&st.mean)?;
            o.floats(&st.scale)?;
        }
    }
    match &s.model {
        Model::Knn(m) => {
            o.usize(m.k)?;
            o.floats(m.x.as_slice().expect("standard layout"))?;
            o.usize(m.bonafide.len())?;
            for &b in &m.bonafide {
                o.u8(b as u8)?;
            }
        }
        Model::LogReg(m) => {
            o.floats(&m.weights)?;
            o.f64(m.bias)?;
        }
        Model::SvmRbf(m) => {
            o.f64(m.gamma)?;
            o.floats(m.support.as_slice().expect("standard layout"))?;
            o.floats(&m.coef)?;
            o.f64(m.bias)?;
        }
        Model::GaussianNb(m) => {
            o.f64(m.epsilon)?;
            for c in 0..2 {
                o.floats(&m.mean[c])?;
                o.floats(&m.var[c])?;
                o.f64(m.log_prior[c])?;
            }
        }
        Model::DecisionTree(m) => {
            o.usize(m.nodes.len())?;
            for n in &m.nodes {
                match *n {
                    Node::Leaf { bonafide, total } => {
                        o.u8(0)?;
                        o.usize(bonafide)?;
                        o.usize(total)?;
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        o.u8(1)?;
                        o.usize(feature)?;
                        o.f64(threshold)?;
                        o.usize(left)?;
                        o.usize(right)?;
                    }
                }
            }
        }
        Model::Mlp(m) => {
            o.usize(m.input)?;
            o.usize(m.hidden)?;
            o.u8(match m.head {
                OutputHead::Sigmoid => 0,
                OutputHead::SoftmaxPair => 1,
            })?;
            for b in m.blocks() {
                o.floats(b)?;
            }
        }
    }
    o.0.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<ModelBundle> {
    let mut i = In(r);
    if i.bytes::<4>()? != MAGIC {
        return Err(Error::format(None, "not a model file (bad magic)"));
    }
    let version = i.u32()?;
    if version != VERSION {
        return Err(Error::format(
            None,
            format!("unsupported model version {version}"),
        ));
    }
    let tag = i.u8()?;
    let algorithm = Algorithm::from_tag(tag)
        .ok_or_else(|| Error::format(None, format!("unknown algorithm tag {tag}")))?;
    let hyper = Hyperparams::parse(algorithm, &i.str()?)?;
    let seed = i.u64()?;
    let status = match i.u8()? {
        0 => FitStatus::Converged {
            iterations: i.usize()?,
        },
        1 => FitStatus::NotConverged {
            iterations: i.usize()?,
            reason: i.str()?,
        },
        t => return Err(Error::format(None, format!("bad status tag {t}"))),
    };
    let dim = i.u32()? as usize;
    let layer = i.u16()?;
    let threshold = i.f64()?;
    let standardizer = match i.u8()? {
        0 => None,
        1 => Some(Standardizer {
            mean: i.floats()?,
            scale: i.floats()?,
        }),
        t => return Err(Error::format(None, format!("bad standardizer flag {t}"))),
    };
    let model = match algorithm {
        Algorithm::Knn => {
            let k = i.usize()?;
            let x = i.matrix(dim)?;
            let n = i.usize()?;
            let mut bonafide = Vec::with_capacity(n.min(1 << 24));
            for _ in 0..n {
                bonafide.push(i.u8()? != 0);
            }
            Model::Knn(Knn { k, x, bonafide })
        }
        Algorithm::LogReg => Model::LogReg(LogReg {
            weights: i.floats()?,
            bias: i.f64()?,
        }),
        Algorithm::SvmRbf => Model::SvmRbf(SvmModel {
            gamma: i.f64()?,
            support: i.matrix(dim)?,
            coef: i.floats()?,
            bias: i.f64()?,
        }),
        Algorithm::GaussianNb => {
            let epsilon = i.f64()?;
            let (m0, v0, p0) = (i.floats()?, i.floats()?, i.f64()?);
            let (m1, v1, p1) = (i.floats()?, i.floats()?, i.f64()?);
            Model::GaussianNb(GaussianNb {
                mean: [m0, m1],
                var: [v0, v1],
                log_prior: [p0, p1],
                epsilon,
            })
        }
        Algorithm::DecisionTree => {
            let count = i.usize()?;
            let mut nodes = Vec::with_capacity(count.min(1 << 24));
            for _ in 0..count {
                nodes.push(match i.u8()? {
                    0 => Node::Leaf {
                        bonafide: i.usize()?,
                        total: i.usize()?,
                    },
                    1 => Node::Split {
                        feature: i.usize()?,
                        threshold: i.f64()?,
                        left: i.usize()?,
                        right: i.usize()?,
                    },
                    t => return Err(Error::format(None, format!("bad node tag {t}"))),
                });
            }
            Model::DecisionTree(DecisionTree { nodes })
        }
        Algorithm::Mlp => {
            let input = i.usize()?;
            let hidden = i.usize()?;
            let head = match i.u8()? {
                0 => OutputHead::Sigmoid,
                1 => OutputHead::SoftmaxPair,
                t => return Err(Error::format(None, format!("bad output head tag {t}"))),
            };
            Model::Mlp(Network {
                input,
                hidden,
                head,
                w1: i.floats()?,
                b1: i.floats()?,
                w2: i.floats()?,
                b2: i.floats()?,
            })
        }
    };
    Ok(ModelBundle {
        scorer: TrainedScorer {
            config: TrainConfig { hyper, seed },
            model,
            status,
            dim,
        },
        standardizer,
        layer,
        threshold,
    })
}

pub fn write_model_file(bundle: &ModelBundle, path: &Path) -> Result<()> {
    write_model(bundle, BufWriter::new(File::create(path)?))
}

pub fn read_model_file(path: &Path) -> Result<ModelBundle> {
    let f = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput {
            path: path.to_path_buf(),
        },
        _ => Error::Io(e),
    })?;
    read_model(BufReader::new(f))
}
