use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Record of one completed stage. Output paths are relative to the output
/// directory; inputs are keyed by logical name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub counters: BTreeMap<String, u64>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl StageManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

/// Files written under temporary names and renamed into place on commit.
/// Dropping without commit removes the temporaries.
pub struct StagedOutputs {
    dir: PathBuf,
    pending: Vec<String>,
    committed: bool,
}

impl StagedOutputs {
    pub fn new(dir: &Path) -> Self {
        StagedOutputs {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
            committed: false,
        }
    }

    fn temp_path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.partial"))
    }

    pub fn final_path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn create(&mut self, name: &str) -> io::Result<BufWriter<File>> {
        let path = self.temp_path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = File::create(&path)?;
        self.pending.push(name.to_string());
        Ok(BufWriter::with_capacity(1 << 20, file))
    }

    /// Checksums of the staged files, keyed by final name.
    pub fn checksums(&self) -> io::Result<BTreeMap<String, String>> {
        self.pending
            .iter()
            .map(|n| Ok((n.clone(), sha256_file(&self.temp_path(n))?)))
            .collect()
    }

    pub fn commit(mut self) -> io::Result<()> {
        for name in &self.pending {
            fs::rename(self.temp_path(name), self.final_path(name))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for StagedOutputs {
    fn drop(&mut self) {
        if !self.committed {
            for name in &self.pending {
                let _ = fs::remove_file(self.temp_path(name));
            }
        }
    }
}

/// Writes `contents` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("partial");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
