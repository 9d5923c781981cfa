//! Run manifests and tabular output (CSV and gnuplot-style `.dat`).
//!
//! Every output file starts with `#`-prefixed manifest lines naming the
//! tool version, RNG algorithm, seed, timestamp, command line, and the
//! fully resolved config. Number formatting uses Rust's shortest
//! round-trip representation with `.` decimals and LF endings, so
//! identical inputs produce byte-identical files (fix the timestamp via
//! the reproducible mode for golden comparisons).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{AlphaValidationRow, MaeTable, RateFit};
use crate::rng::ALGORITHM_ID;

/// Provenance block embedded into every output file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub seed: u64,
    pub timestamp: String,
    pub command: String,
    /// Resolved config, one `key = value` line each.
    pub config_lines: Vec<String>,
}

impl RunManifest {
    /// Manifest with the frozen timestamp; callers stamp a wall-clock time
    /// only outside reproducible mode.
    pub fn new(seed: u64, command: impl Into<String>) -> Self {
        RunManifest {
            tool: "seqrec".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            rng: ALGORITHM_ID.into(),
            seed,
            timestamp: Self::frozen_timestamp().into(),
            command: command.into(),
            config_lines: Vec::new(),
        }
    }

    pub fn with_config_lines(mut self, lines: Vec<String>) -> Self {
        self.config_lines = lines;
        self
    }

    pub fn with_timestamp(mut self, timestamp: impl Into<String>) -> Self {
        self.timestamp = timestamp.into();
        self
    }

    /// The timestamp used in reproducible mode.
    pub fn frozen_timestamp() -> &'static str {
        "1970-01-01T00:00:00Z"
    }

    pub fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# {} v{}", self.tool, self.version),
            format!("# rng: {}", self.rng),
            format!("# seed: {}", self.seed),
            format!("# timestamp: {}", self.timestamp),
            format!("# command: {}", self.command),
        ];
        for line in &self.config_lines {
            lines.push(format!("# config: {line}"));
        }
        lines
    }
}

/// A generic string table with a fixed column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "column count mismatch");
        self.rows.push(row);
    }
}

/// Formats a float with the shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Renders manifest + table as CSV text.
pub fn csv_string(table: &Table, manifest: &RunManifest) -> String {
    let mut out = String::new();
    for line in manifest.comment_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Renders manifest + table as gnuplot-friendly whitespace-separated data.
pub fn dat_string(table: &Table, manifest: &RunManifest) -> String {
    let mut out = String::new();
    for line in manifest.comment_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&format!("# {}\n", table.columns.join(" ")));
    for row in &table.rows {
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(content.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Writes manifest + table to a CSV file.
pub fn emit_csv(table: &Table, manifest: &RunManifest, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &csv_string(table, manifest))
}

/// Writes manifest + table to a `.dat` file.
pub fn emit_dat(table: &Table, manifest: &RunManifest, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &dat_string(table, manifest))
}

/// Error-table rows in the documented column order.
pub fn mae_table(table: &MaeTable) -> Table {
    let mut out = Table::new(&[
        "n",
        "k_n",
        "trials",
        "mae",
        "mae_stderr",
        "degenerate_fraction",
    ]);
    for row in &table.rows {
        out.push(vec![
            row.n.to_string(),
            row.k.to_string(),
            row.trials.to_string(),
            fmt_f64(row.mae),
            fmt_f64(row.mae_stderr),
            fmt_f64(row.degenerate_fraction),
        ]);
    }
    out
}

pub fn ratefit_table(fit: &RateFit) -> Table {
    let mut out = Table::new(&["slope", "intercept", "r_squared", "n_min", "n_max"]);
    out.push(vec![
        fmt_f64(fit.slope),
        fmt_f64(fit.intercept),
        fmt_f64(fit.r_squared),
        fit.n_range.0.to_string(),
        fit.n_range.1.to_string(),
    ]);
    out
}

pub fn alpha_table(rows: &[AlphaValidationRow]) -> Table {
    let mut out = Table::new(&["i", "alpha_closed_form", "alpha_mc", "stderr", "z_score"]);
    for row in rows {
        out.push(vec![
            row.i.to_string(),
            fmt_f64(row.closed_form),
            fmt_f64(row.mc),
            fmt_f64(row.stderr),
            fmt_f64(row.z_score),
        ]);
    }
    out
}
