//! Output-path handling: atomic writes (temp file + rename, so an
//! interrupted run never leaves a partial file) and the output-directory
//! override.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Relative output paths resolve under this variable when it is set.
pub const OUT_DIR_ENV: &str = "CADENZA_OUT_DIR";

pub fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(base) = std::env::var(OUT_DIR_ENV) {
            if !base.is_empty() {
                return PathBuf::from(base).join(path);
            }
        }
    }
    path.to_path_buf()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let path = resolve_out_path(path);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let mut tmp = path.clone().into_os_string();
    tmp.push(".tmp~");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, &path)
        .with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(path)
}
