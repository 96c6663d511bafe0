//! Run reports: manifest, pass/fail summary, and CSV emission.
//!
//! Reproducibility contract: identical `(config, seed)` produce
//! byte-identical CSV bodies; the manifest documents every CSV column with
//! the operation that defines it.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One pass/fail check line.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// "le" (value <= threshold), "ge", or "range" (|value - 2| style checks
    /// encode their window in the threshold).
    pub cmp: String,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            threshold,
            cmp: "le".to_string(),
            pass: value <= threshold,
        }
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            threshold,
            cmp: "ge".to_string(),
            pass: value >= threshold,
        }
    }

    /// value must lie in `[lo, hi]`; threshold records the half-width.
    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            threshold: hi,
            cmp: format!("in[{lo},{hi}]"),
            pass: value >= lo && value <= hi,
        }
    }
}

/// Summary of one experiment run.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub seed: u64,
    pub elapsed_seconds: f64,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Summary {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Summary {
            experiment: experiment.to_string(),
            passed: true,
            checks: Vec::new(),
            seed,
            elapsed_seconds: 0.0,
            extra: serde_json::Map::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.pass;
        self.checks.push(check);
    }

    pub fn extra_value(&mut self, key: &str, value: serde_json::Value) {
        self.extra.insert(key.to_string(), value);
    }
}

/// A CSV column with its defining operation (manifest documentation).
#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub definition: String,
}

/// Collects output files for one run and writes manifest + summary.
pub struct RunReport {
    pub out_dir: PathBuf,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    columns: serde_json::Map<String, serde_json::Value>,
}

impl RunReport {
    pub fn new(out_dir: &Path, experiment: &str, seed: u64, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output dir {}", out_dir.display()))?;
        Ok(RunReport {
            out_dir: out_dir.to_path_buf(),
            experiment: experiment.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            columns: serde_json::Map::new(),
        })
    }

    /// Write one CSV with documented columns. Rows are formatted with `{:e}`
    /// (deterministic shortest float rendering).
    pub fn write_csv(&mut self, file: &str, columns: &[Column], rows: &[Vec<f64>]) -> Result<()> {
        let mut body = String::new();
        let header: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(body, "{}", header.join(",")).unwrap();
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(body, "{}", cells.join(",")).unwrap();
        }
        std::fs::write(self.out_dir.join(file), body)?;
        self.columns.insert(
            file.to_string(),
            serde_json::to_value(columns).expect("columns serialize"),
        );
        Ok(())
    }

    /// Write CSV with string-typed first column (e.g. quantity names).
    pub fn write_csv_named(
        &mut self,
        file: &str,
        columns: &[Column],
        rows: &[(String, Vec<f64>)],
    ) -> Result<()> {
        let mut body = String::new();
        let header: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(body, "{}", header.join(",")).unwrap();
        for (name, vals) in rows {
            let cells: Vec<String> = vals.iter().map(|v| format!("{v:e}")).collect();
            writeln!(body, "{name},{}", cells.join(",")).unwrap();
        }
        std::fs::write(self.out_dir.join(file), body)?;
        self.columns.insert(
            file.to_string(),
            serde_json::to_value(columns).expect("columns serialize"),
        );
        Ok(())
    }

    pub fn write_json(&self, file: &str, value: &serde_json::Value) -> Result<()> {
        std::fs::write(self.out_dir.join(file), serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    /// Finalize: manifest.json and summary.json.
    pub fn finish(&self, summary: &Summary) -> Result<()> {
        let manifest = serde_json::json!({
            "package_version": env!("CARGO_PKG_VERSION"),
            "experiment": self.experiment,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "threads": crate::recipes::thread_count(),
            "columns": serde_json::Value::Object(self.columns.clone()),
        });
        self.write_json("manifest.json", &manifest)?;
        self.write_json("summary.json", &serde_json::to_value(summary)?)?;
        Ok(())
    }
}
