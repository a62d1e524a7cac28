//! JSON configuration loading.
//!
//! Configs are flat objects. Unknown fields are rejected, and every parse
//! error reports the offending field path together with the line and column.

use crate::error::CliError;
use serde::de::DeserializeOwned;
use std::fs;
use std::path::Path;

/// Reads and deserializes `path`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::io(path, source))?;
    parse_json(&text).map_err(|message| CliError::Config { file: path.display().to_string(), message })
}

/// Deserializes `text`, naming the field path on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        if field == "." {
            e.inner().to_string()
        } else {
            format!("field `{field}`: {}", e.inner())
        }
    })
}
