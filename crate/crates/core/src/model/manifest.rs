use std::io::Write;
use std::path::{Path, PathBuf};

use super::{AssetRecord, ValidationError};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Serializes a validated record as pretty-printed JSON.
///
/// Floats are written in shortest round-trip form, so every value reads back
/// bit-identical.
pub fn manifest_to_string(record: &AssetRecord) -> Result<String, ManifestError> {
    record.validate()?;
    let mut text = serde_json::to_string_pretty(record).expect("asset records always serialize");
    text.push('\n');
    Ok(text)
}

pub fn manifest_from_str(text: &str) -> Result<AssetRecord, ManifestError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let record: AssetRecord = serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        ManifestError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })?;
    record.validate()?;
    Ok(record)
}

/// Writes the manifest atomically: a temporary sibling file is renamed over `path`.
pub fn save_manifest(record: &AssetRecord, path: &Path) -> Result<(), ManifestError> {
    let text = manifest_to_string(record)?;
    write_atomic(path, text.as_bytes()).map_err(|source| ManifestError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_manifest(path: &Path) -> Result<AssetRecord, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_owned(),
        source,
    })?;
    manifest_from_str(&text)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
