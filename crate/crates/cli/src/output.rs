//! File emission and the matching importers.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Validation(vec![format!("{}: line {}: {e}", path.display(), e.line())])
    })
}

/// Header row comes from the field names of `T`.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut wr = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(io(path))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rd.deserialize().enumerate() {
        let row = rec.map_err(|e: csv::Error| {
            let line = e.position().map_or(i + 2, |p| p.line() as usize);
            CliError::Validation(vec![format!("{}: line {line}: {e}", path.display())])
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub id: String,
    pub title: String,
    pub data: String,
    pub x: String,
    pub y: Vec<String>,
    pub x_label: String,
    pub y_label: String,
    #[serde(default)]
    pub x_log: bool,
}

/// Declarative description of the plots a command's data supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotManifest {
    pub command: String,
    pub plots: Vec<PlotSpec>,
}

impl PlotManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            plots: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn line(mut self, id: &str, title: &str, data: &str, x: &str, y: &[&str], x_label: &str, y_label: &str) -> Self {
        self.plots.push(PlotSpec {
            id: id.into(),
            title: title.into(),
            data: data.into(),
            x: x.into(),
            y: y.iter().map(|s| s.to_string()).collect(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_log: false,
        });
        self
    }

    pub fn file_name(&self) -> String {
        format!("{}.plots.json", self.command)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(self.file_name());
        write_json(&path, self)?;
        Ok(path)
    }
}
