//! Pipelines behind the `lvfeeder` command.
//!
//! `generate` writes a synthetic dataset with ground truth, `buddy` assigns
//! monitored profiles to every customer, `bounds` builds and scores
//! confidence bands, and `evaluate` fits error-versus-demand power laws.
//! Every command writes a [`manifest::RunManifest`] next to its outputs.

pub mod bounds;
pub mod buddy;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod manifest;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use error::{CliError, Result};

/// Weight as written in file names and seed labels.
pub(crate) fn fmt_w(w: f64) -> String {
    w.to_string()
}

/// Serialises rows as CSV with a header taken from the field names.
pub fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Data(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("csv: {e}")))
}

pub fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Reads a JSON config, or the defaults when no path is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}
