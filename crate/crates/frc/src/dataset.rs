//! JSONL dataset ingestion and emission.
//!
//! Input records carry `{id, text, label, lang}`; `label` may be null for
//! gold-less corpora and `lang` is `"en"` or `"zh"` (Chinese text is
//! expected pre-segmented with spaces).

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad record on line {line} of {path}: {source}")]
    BadRecord {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

/// One labeled (or unlabeled) input text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

/// Reads one JSON value per non-empty line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DatasetError> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|e| DatasetError::Io {
        path: path_str.clone(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::Io {
            path: path_str.clone(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| DatasetError::BadRecord {
            path: path_str.clone(),
            line: i + 1,
            source: e,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Writes one compact JSON object per line, creating parent directories.
pub fn write_jsonl<T: Serialize>(
    path: impl AsRef<Path>,
    items: impl IntoIterator<Item = T>,
) -> Result<(), DatasetError> {
    let path_str = path.as_ref().display().to_string();
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| DatasetError::Io {
                path: path_str.clone(),
                source: e,
            })?;
        }
    }
    let mut file = std::fs::File::create(path.as_ref()).map_err(|e| DatasetError::Io {
        path: path_str.clone(),
        source: e,
    })?;
    for item in items {
        let line = serde_json::to_string(&item).expect("record serializes");
        writeln!(file, "{line}").map_err(|e| DatasetError::Io {
            path: path_str.clone(),
            source: e,
        })?;
    }
    Ok(())
}
