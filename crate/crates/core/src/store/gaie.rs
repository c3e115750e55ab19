//! GAIE: the little-endian container for per-layer frame embeddings.
//!
//! ```text
//! header  : magic "GAIE" | version u32 (=1) | dim u32 | layer u16 | record_count u64
//! record  : utt_id_len u16 | utt_id (UTF-8) | label u8 | frames u32 | frames*dim f32
//! ```
//!
//! Values are row-major (frame by frame). Label codes are 0 spoof, 1 bonafide,
//! 255 unknown; the label byte is carried for inference dumps only and is never
//! consulted when datasets are assembled.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Keyed, Label};
use crate::error::{Error, Result};

pub const GAIE_MAGIC: [u8; 4] = *b"GAIE";
pub const GAIE_VERSION: u32 = 1;
/// Bytes before the first record.
pub const GAIE_HEADER_LEN: usize = 4 + 4 + 4 + 2 + 8;
/// Fixed bytes per record besides the id and the payload.
pub const GAIE_RECORD_OVERHEAD: usize = 2 + 1 + 4;

/// One utterance's frame embeddings for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub utt_id: String,
    pub layer: u16,
    pub frames: u32,
    pub dim: u32,
    pub label: Label,
    /// `frames * dim` values, row-major.
    pub values: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(
        utt_id: impl Into<String>,
        layer: u16,
        frames: u32,
        dim: u32,
        values: Vec<f32>,
    ) -> Result<Self> {
        let rec = EmbeddingRecord {
            utt_id: utt_id.into(),
            layer,
            frames,
            dim,
            label: Label::Unknown,
            values,
        };
        rec.validate().map_err(Error::usage)?;
        Ok(rec)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let d = self.dim as usize;
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim.max(1) as usize)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.utt_id.is_empty() {
            return Err("empty utt_id".into());
        }
        if self.utt_id.len() > u16::MAX as usize {
            return Err(format!("utt_id longer than {} bytes", u16::MAX));
        }
        if self.frames == 0 {
            return Err(format!("{}: zero frames", self.utt_id));
        }
        if self.dim == 0 {
            return Err(format!("{}: zero dim", self.utt_id));
        }
        let expected = self.frames as usize * self.dim as usize;
        if self.values.len() != expected {
            return Err(format!(
                "{}: {} values, expected frames*dim = {expected}",
                self.utt_id,
                self.values.len()
            ));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(format!("{}: non-finite value at index {pos}", self.utt_id));
        }
        Ok(())
    }
}

impl Keyed for EmbeddingRecord {
    fn utt_id(&self) -> &str {
        &self.utt_id
    }
    fn layer(&self) -> u16 {
        self.layer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaieHeader {
    pub dim: u32,
    pub layer: u16,
    pub record_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaieFile {
    pub header: GaieHeader,
    pub records: Vec<EmbeddingRecord>,
}

fn read_exact_or<R: Read>(
    r: &mut R,
    buf: &mut [u8],
    record: Option<u64>,
    what: &str,
) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::format(record, format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_header<R: Read>(r: &mut R) -> Result<GaieHeader> {
    let mut buf = [0u8; GAIE_HEADER_LEN];
    read_exact_or(r, &mut buf, None, "header")?;
    if buf[0..4] != GAIE_MAGIC {
        return Err(Error::format(None, format!("bad magic {:?}", &buf[0..4])));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != GAIE_VERSION {
        return Err(Error::format(
            None,
            format!("unsupported version {version}"),
        ));
    }
    Ok(GaieHeader {
        dim: u32::from_le_bytes(buf[8..12].try_into().unwrap()),
        layer: u16::from_le_bytes(buf[12..14].try_into().unwrap()),
        record_count: u64::from_le_bytes(buf[14..22].try_into().unwrap()),
    })
}

fn read_record<R: Read>(r: &mut R, header: &GaieHeader, index: u64) -> Result<EmbeddingRecord> {
    let at = Some(index);
    let mut len = [0u8; 2];
    read_exact_or(r, &mut len, at, "record")?;
    let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
    read_exact_or(r, &mut id, at, "utt_id")?;
    let utt_id =
        String::from_utf8(id).map_err(|_| Error::format(at, "utt_id is not valid UTF-8"))?;
    if utt_id.is_empty() {
        return Err(Error::format(at, "empty utt_id"));
    }
    let mut fixed = [0u8; 5];
    read_exact_or(r, &mut fixed, at, "record header")?;
    let label = Label::from_code(fixed[0])
        .ok_or_else(|| Error::format(at, format!("{utt_id}: invalid label code {}", fixed[0])))?;
    let frames = u32::from_le_bytes(fixed[1..5].try_into().unwrap());
    if frames == 0 {
        return Err(Error::format(at, format!("{utt_id}: zero frames")));
    }
    let count = frames as u64 * header.dim as u64;
    let nbytes = count * 4;
    // Grow the buffer as bytes arrive so a corrupt frame count cannot force a
    // huge allocation up front.
    let mut bytes = Vec::with_capacity(nbytes.min(1 << 26) as usize);
    r.by_ref().take(nbytes).read_to_end(&mut bytes)?;
    if (bytes.len() as u64) < nbytes {
        return Err(Error::format(
            at,
            format!(
                "{utt_id}: truncated payload ({} of {nbytes} bytes)",
                bytes.len()
            ),
        ));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            at,
            format!("{utt_id}: non-finite value at index {pos}"),
        ));
    }
    Ok(EmbeddingRecord {
        utt_id,
        layer: header.layer,
        frames,
        dim: header.dim,
        label,
        values,
    })
}

/// Reads a whole GAIE stream, including its header.
pub fn read_gaie<R: Read>(mut r: R) -> Result<GaieFile> {
    let header = read_header(&mut r)?;
    if header.dim == 0 && header.record_count > 0 {
        return Err(Error::format(
            None,
            "zero dim with non-empty record section",
        ));
    }
    let mut records = Vec::with_capacity(header.record_count.min(1 << 16) as usize);
    for i in 0..header.record_count {
        records.push(read_record(&mut r, &header, i)?);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::format(
            Some(header.record_count),
            "trailing bytes after the last record",
        ));
    }
    Ok(GaieFile { header, records })
}

pub fn read_embeddings<R: Read>(r: R) -> Result<Vec<EmbeddingRecord>> {
    Ok(read_gaie(r)?.records)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::MissingInput {
            path: path.to_path_buf(),
        },
        _ => Error::Io(e),
    })
}

pub fn read_embeddings_file(path: &Path) -> Result<GaieFile> {
    read_gaie(BufReader::new(open(path)?))
}

/// Writes records under an explicit header. Every record must match the
/// header's dim and layer and hold only finite values.
pub fn write_gaie<W: Write>(
    dim: u32,
    layer: u16,
    records: &[EmbeddingRecord],
    mut w: W,
) -> Result<()> {
    for rec in records {
        if rec.dim != dim || rec.layer != layer {
            return Err(Error::usage(format!(
                "{}: dim/layer ({}, {}) differs from file ({dim}, {layer})",
                rec.utt_id, rec.dim, rec.layer
            )));
        }
        rec.validate().map_err(Error::usage)?;
    }
    w.write_all(&GAIE_MAGIC)?;
    w.write_all(&GAIE_VERSION.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&layer.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for rec in records {
        w.write_all(&(rec.utt_id.len() as u16).to_le_bytes())?;
        w.write_all(rec.utt_id.as_bytes())?;
        w.write_all(&[rec.label.code()])?;
        w.write_all(&rec.frames.to_le_bytes())?;
        for v in &rec.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes records taking dim and layer from the first record (zero for an
/// empty list).
pub fn write_embeddings<W: Write>(records: &[EmbeddingRecord], w: W) -> Result<()> {
    let (dim, layer) = records.first().map(|r| (r.dim, r.layer)).unwrap_or((0, 0));
    write_gaie(dim, layer, records, w)
}

pub fn write_embeddings_file(records: &[EmbeddingRecord], path: &Path) -> Result<()> {
    let file = File::create(path)?;
    write_embeddings(records, BufWriter::new(file))
}
