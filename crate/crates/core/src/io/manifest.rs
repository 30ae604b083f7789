//! Image manifests: one path per line, optionally followed by a tab and a
//! label. Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Option<String>,
}

pub fn parse_manifest(text: &str, base: &Path) -> Vec<ManifestEntry> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|line| {
            let (path, label) = match line.split_once('\t') {
                Some((p, l)) => (p.trim(), Some(l.trim().to_string()).filter(|l| !l.is_empty())),
                None => (line.trim(), None),
            };
            let path = Path::new(path);
            let path = if path.is_absolute() {
                path.to_path_buf()
            } else {
                base.join(path)
            };
            ManifestEntry { path, label }
        })
        .collect()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&text, base))
}
