use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Resolved;
use crate::error::Result;

/// Everything that determines a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Option<String>,
    pub seed: u64,
    pub options: serde_json::Value,
    /// `(path, sha256)`; the digest is `absent` for missing files.
    pub inputs: Vec<(String, String)>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's contents, or `None` if it does not exist.
pub fn file_digest(path: &Path) -> Result<Option<String>> {
    let mut f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(Some(hex(&h.finalize())))
}

impl RunManifest {
    pub(crate) fn new(
        command: &str,
        config: Option<&Path>,
        options: &Resolved,
        inputs: &[std::path::PathBuf],
    ) -> Result<RunManifest> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let d = file_digest(p)?.unwrap_or_else(|| "absent".into());
                Ok((p.display().to_string(), d))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.map(|p| p.display().to_string()),
            seed: options.seed,
            options: serde_json::to_value(options).expect("options serialize"),
            inputs,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    /// SHA-256 of the JSON rendering.
    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn footer(&self) -> String {
        format!("manifest sha256: {}", self.digest())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
