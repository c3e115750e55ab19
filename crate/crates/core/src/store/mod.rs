//! Embedding files, protocol files and the labelled datasets built from them.
//!
//! Every dataset is kept in ascending `utt_id` order so that anything trained
//! downstream is independent of extraction order.

mod dataset;
mod gaie;
mod protocol;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use dataset::{assemble, DatasetItem, Keyed, LayerDataset};
pub use gaie::{
    read_embeddings, read_embeddings_file, read_gaie, write_embeddings, write_embeddings_file,
    write_gaie, EmbeddingRecord, GaieFile, GaieHeader, GAIE_HEADER_LEN, GAIE_MAGIC,
    GAIE_RECORD_OVERHEAD, GAIE_VERSION,
};
pub use protocol::{parse_protocol, parse_protocol_file, ProtocolEntry};

/// Class label. Bonafide is the positive class everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Spoof,
    Bonafide,
    /// Only valid for inference-only data; never used for training.
    Unknown,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::Spoof => 0,
            Label::Bonafide => 1,
            Label::Unknown => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Label> {
        match code {
            0 => Some(Label::Spoof),
            1 => Some(Label::Bonafide),
            255 => Some(Label::Unknown),
            _ => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != Label::Unknown
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Spoof => "spoof",
            Label::Bonafide => "bonafide",
            Label::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "spoof" => Ok(Label::Spoof),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::usage(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Partition {
    Train,
    Dev,
    Eval,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Eval => "eval",
        }
    }

    /// Train and dev items must always carry a label.
    pub fn requires_labels(self) -> bool {
        matches!(self, Partition::Train | Partition::Dev)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "eval" => Ok(Partition::Eval),
            other => Err(Error::usage(format!("unknown partition {other:?}"))),
        }
    }
}
