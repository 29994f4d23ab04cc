//! Run manifests: the command line, seed, config hash and file digests
//! needed to re-execute a run and check that it reproduces its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<FileDigest> {
        let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }

    /// Whether the file on disk still has this digest.
    pub fn matches_disk(&self) -> bool {
        FileDigest::of(&self.path).is_ok_and(|d| d.sha256 == self.sha256)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Hash of a serializable configuration through its JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("configurations serialize"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    /// Arguments after the program name, replayable as given.
    pub command: Vec<String>,
    /// Directory the relative paths in `command` are resolved against.
    pub working_dir: PathBuf,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(
        command: Vec<String>,
        seed: Option<u64>,
        config_hash: String,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> Result<Manifest> {
        Ok(Manifest {
            tool: format!("subaug {}", env!("CARGO_PKG_VERSION")),
            command,
            working_dir: std::env::current_dir().context("resolving the working directory")?,
            seed,
            config_hash,
            inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        })
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        write_if_changed(path, text.as_bytes())
    }

    /// Same configuration, same inputs, and every output still on disk unchanged.
    pub fn is_current(&self, config_hash: &str, inputs: &[PathBuf]) -> bool {
        self.config_hash == config_hash
            && self.inputs.len() == inputs.len()
            && self.inputs.iter().zip(inputs).all(|(d, p)| d.path == *p && d.matches_disk())
            && self.outputs.iter().all(FileDigest::matches_disk)
    }
}

/// Manifest location for a run whose main output is `output`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Writes `data` unless the file already holds exactly it, so reruns leave
/// unchanged artifacts untouched.
pub fn write_if_changed(path: &Path, data: &[u8]) -> Result<()> {
    if fs::read(path).is_ok_and(|old| old == data) {
        return Ok(());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, data).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("out/model.arpa")),
            PathBuf::from("out/model.arpa.manifest.json")
        );
    }

    #[test]
    fn unchanged_content_is_not_rewritten() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_if_changed(&p, b"x").unwrap();
        let before = fs::metadata(&p).unwrap().modified().unwrap();
        std::thread::sleep(std::time::Duration::from_millis(20));
        write_if_changed(&p, b"x").unwrap();
        assert_eq!(fs::metadata(&p).unwrap().modified().unwrap(), before);
        write_if_changed(&p, b"y").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"y");
    }
}
