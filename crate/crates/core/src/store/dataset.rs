use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};

use super::{Label, Partition, ProtocolEntry};
use crate::error::{Error, Result};

/// Anything that belongs to one utterance of one layer.
pub trait Keyed {
    fn utt_id(&self) -> &str;
    fn layer(&self) -> u16;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem<T> {
    pub utt_id: String,
    pub features: T,
    pub label: Label,
}

/// Labelled items of one layer and partition, sorted by `utt_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDataset<T> {
    pub layer: u16,
    pub partition: Partition,
    pub items: Vec<DatasetItem<T>>,
}

impl<T> LayerDataset<T> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.items.iter().map(|i| i.label)
    }

    pub fn is_fully_labelled(&self) -> bool {
        self.items.iter().all(|i| i.label.is_known())
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> LayerDataset<U> {
        LayerDataset {
            layer: self.layer,
            partition: self.partition,
            items: self
                .items
                .into_iter()
                .map(|i| DatasetItem {
                    utt_id: i.utt_id,
                    features: f(i.features),
                    label: i.label,
                })
                .collect(),
        }
    }

    pub fn try_map<U>(self, mut f: impl FnMut(T) -> Result<U>) -> Result<LayerDataset<U>> {
        let mut items = Vec::with_capacity(self.items.len());
        for i in self.items {
            items.push(DatasetItem {
                utt_id: i.utt_id,
                features: f(i.features)?,
                label: i.label,
            });
        }
        Ok(LayerDataset {
            layer: self.layer,
            partition: self.partition,
            items,
        })
    }

    /// Same items with every label replaced by `Unknown`.
    pub fn without_labels(mut self) -> Self {
        for item in &mut self.items {
            item.label = Label::Unknown;
        }
        self
    }
}

/// Inner join of feature records with protocol entries on `utt_id`.
///
/// Records without a protocol entry are an error for train and dev. For eval
/// they become `Label::Unknown` items when `allow_unlabeled` is set. Protocol
/// entries without a record are dropped. Any label stored inside the records
/// themselves is ignored.
pub fn assemble<T: Keyed>(
    records: Vec<T>,
    entries: &[ProtocolEntry],
    partition: Partition,
    allow_unlabeled: bool,
) -> Result<LayerDataset<T>> {
    let mut by_id: HashMap<&str, &ProtocolEntry> = HashMap::with_capacity(entries.len());
    let mut dup_entries = Vec::new();
    for e in entries {
        if by_id.insert(e.utt_id.as_str(), e).is_some() {
            dup_entries.push(e.utt_id.clone());
        }
    }
    if !dup_entries.is_empty() {
        dup_entries.sort();
        dup_entries.dedup();
        return Err(Error::Assembly {
            message: "duplicate utt_id in protocol".into(),
            offenders: dup_entries,
        });
    }

    let layer = records.first().map(|r| r.layer()).unwrap_or(0);
    if let Some(r) = records.iter().find(|r| r.layer() != layer) {
        return Err(Error::Assembly {
            message: format!("mixed layers ({layer} and {})", r.layer()),
            offenders: vec![r.utt_id().to_string()],
        });
    }

    let mut sorted: BTreeMap<String, T> = BTreeMap::new();
    let mut dup_records = Vec::new();
    for r in records {
        match sorted.entry(r.utt_id().to_string()) {
            Entry::Occupied(e) => dup_records.push(e.key().clone()),
            Entry::Vacant(e) => {
                e.insert(r);
            }
        }
    }
    if !dup_records.is_empty() {
        dup_records.sort();
        dup_records.dedup();
        return Err(Error::Assembly {
            message: "duplicate utt_id in embeddings".into(),
            offenders: dup_records,
        });
    }

    let unlabeled_ok = allow_unlabeled && !partition.requires_labels();
    let missing: Vec<String> = sorted
        .keys()
        .filter(|id| !by_id.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() && !unlabeled_ok {
        return Err(Error::Assembly {
            message: format!("no protocol entry ({partition} partition)"),
            offenders: missing,
        });
    }

    let items = sorted
        .into_iter()
        .map(|(utt_id, features)| {
            let label = by_id
                .get(utt_id.as_str())
                .map(|e| e.label)
                .unwrap_or(Label::Unknown);
            DatasetItem {
                utt_id,
                features,
                label,
            }
        })
        .collect();
    Ok(LayerDataset {
        layer,
        partition,
        items,
    })
}
