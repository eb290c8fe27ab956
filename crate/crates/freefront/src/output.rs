//! File formats. Floats are written in the shortest decimal form that
//! reads back to the same bits: `Debug` for CSV, `ryu` inside JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Output directory of one run. Each file has a single writer.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| CliError::Write { path: root.clone(), source })?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        self.write(name, &text)
    }

    /// One compact JSON document per line.
    pub fn write_ndjson<T: Serialize>(&self, name: &str, records: impl IntoIterator<Item = T>) -> CliResult<PathBuf> {
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(&r).expect("records serialize"));
            text.push('\n');
        }
        self.write(name, &text)
    }
}

/// CSV text with the given header; every row must have as many columns.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:?}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

/// Reads one named column of a CSV file produced by [`csv`].
pub fn read_column(path: &Path, name: &str) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?;
    let col = header
        .split(',')
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::Config(format!("{}: no column `{name}`", path.display())))?;
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .nth(col)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad value in line {}", path.display(), i + 2)))
        })
        .collect()
}

/// Provenance appended to the echoed configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestInfo {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
}

impl ManifestInfo {
    pub fn new(command: &str) -> Self {
        Self { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), command: command.into() }
    }
}

/// Resolved configuration plus a `[manifest]` table. The text loads back
/// through `--config` and reproduces the run.
pub fn manifest_text(cfg: &RunConfig, info: &ManifestInfo) -> CliResult<String> {
    #[derive(Serialize)]
    struct Tail<'a> {
        manifest: &'a ManifestInfo,
    }
    let mut text = String::from("# resolved configuration of a freefront run\n");
    text.push_str(&cfg.to_toml()?);
    text.push('\n');
    text.push_str(&toml::to_string(&Tail { manifest: info }).map_err(|e| CliError::Config(e.to_string()))?);
    Ok(text)
}
