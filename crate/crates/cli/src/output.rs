//! Atomic file output with embedded configuration snapshots.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes via a sibling temp file and rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(jitdrift::Error::from)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Writes a CSV whose first line is `# <snapshot as compact JSON>`.
pub fn write_csv_with_snapshot<F>(path: &Path, snapshot: &serde_json::Value, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut Vec<u8>) -> jitdrift::Result<()>,
{
    let mut bytes = b"# ".to_vec();
    serde_json::to_writer(&mut bytes, snapshot).map_err(jitdrift::Error::from)?;
    bytes.push(b'\n');
    body(&mut bytes)?;
    write_atomic(path, &bytes)
}
