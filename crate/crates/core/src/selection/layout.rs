use std::borrow::Cow;
use std::path::{Path, PathBuf};

use super::sweep::{LayerData, LayerSource};
use crate::error::{Error, Result};
use crate::features::{pool, PooledVector};
use crate::store::{assemble, parse_protocol_file, read_embeddings_file, LayerDataset, Partition};

/// On-disk layout of a data root:
///
/// ```text
/// {root}/{partition}_{layer}.gaie     frame-level or pooled embeddings
/// {root}/protocol_{partition}.txt     labels
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataLayout {
    pub root: PathBuf,
    /// Accept eval utterances without a protocol entry (or no eval protocol).
    pub allow_unlabeled_eval: bool,
}

impl DataLayout {
    pub fn new(root: impl Into<PathBuf>) -> DataLayout {
        DataLayout {
            root: root.into(),
            allow_unlabeled_eval: false,
        }
    }

    pub fn gaie_path(&self, partition: Partition, layer: u16) -> PathBuf {
        self.root.join(format!("{partition}_{layer}.gaie"))
    }

    pub fn protocol_path(&self, partition: Partition) -> PathBuf {
        self.root.join(format!("protocol_{partition}.txt"))
    }

    /// Every layer with a train file, ascending.
    pub fn available_layers(&self) -> Vec<u16> {
        (0..=u16::from(u8::MAX))
            .filter(|&l| self.gaie_path(Partition::Train, l).is_file())
            .collect()
    }

    /// Reads, pools and labels one partition. `Ok(None)` when its embedding
    /// file does not exist.
    pub fn load_partition(
        &self,
        partition: Partition,
        layer: u16,
    ) -> Result<Option<LayerDataset<PooledVector>>> {
        let path = self.gaie_path(partition, layer);
        if !path.is_file() {
            return Ok(None);
        }
        let allow = partition == Partition::Eval && self.allow_unlabeled_eval;
        let protocol = self.protocol_path(partition);
        let entries = if allow && !protocol.is_file() {
            Vec::new()
        } else {
            parse_protocol_file(&protocol)?
        };
        load_pooled(&path, layer, &entries, partition, allow).map(Some)
    }
}

/// Reads one embedding file, checks its layer, pools every record and joins
/// with `entries`.
pub(crate) fn load_pooled(
    path: &Path,
    layer: u16,
    entries: &[crate::store::ProtocolEntry],
    partition: Partition,
    allow_unlabeled: bool,
) -> Result<LayerDataset<PooledVector>> {
    let file = read_embeddings_file(path)?;
    if file.header.layer != layer {
        return Err(Error::format(
            None,
            format!(
                "{} holds layer {}, expected {layer}",
                path.display(),
                file.header.layer
            ),
        ));
    }
    let pooled: Vec<PooledVector> = file.records.iter().map(pool).collect();
    assemble(pooled, entries, partition, allow_unlabeled)
}

impl LayerSource for DataLayout {
    fn load(&self, layer: u16) -> Result<Option<Cow<'_, LayerData>>> {
        let train = self.load_partition(Partition::Train, layer)?;
        let dev = self.load_partition(Partition::Dev, layer)?;
        let eval = self.load_partition(Partition::Eval, layer)?;
        Ok(match (train, dev, eval) {
            (Some(train), Some(dev), Some(eval)) => {
                Some(Cow::Owned(LayerData { train, dev, eval }))
            }
            _ => None,
        })
    }
}
