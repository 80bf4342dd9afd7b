//! Run-directory plumbing: atomic file writes, input digests, and the
//! machine-readable metadata every command drops next to its outputs.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Write via a temporary sibling then rename, so interrupted runs never leave
/// torn files. Parent directories are created as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = parent.join(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// SHA-256 digests of the given input files, in the order given.
pub fn digest_inputs(paths: &[PathBuf]) -> io::Result<Vec<InputDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&fs::read(p)?),
            })
        })
        .collect()
}

/// Write `resolved_config.json` and `input_digests.json` into the run dir.
pub fn write_run_metadata<C: Serialize>(
    out_dir: &Path,
    resolved_config: &C,
    input_paths: &[PathBuf],
) -> io::Result<()> {
    write_json(&out_dir.join("resolved_config.json"), resolved_config)?;
    let digests = digest_inputs(input_paths)?;
    write_json(&out_dir.join("input_digests.json"), &digests)
}
