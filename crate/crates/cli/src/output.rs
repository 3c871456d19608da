//! CSV tables, gnuplot scripts and the JSON report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Finite numbers stay numbers; `inf`, `-inf` and `NaN` become strings so
/// the report stays valid JSON without losing them.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("NaN")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Shortest round-trip decimal form.
pub fn cell(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub results: Value,
    /// File names relative to the report.
    pub files: Vec<String>,
    pub seeds: Value,
    pub runtime_s: f64,
    pub version: String,
}

/// Line series for a gnuplot script: CSV column (1-based) and legend title.
pub struct Series<'a> {
    pub column: usize,
    pub title: &'a str,
    pub error_column: Option<usize>,
}

pub struct OutputSink {
    dir: PathBuf,
    slug: String,
    gnuplot: bool,
    files: Vec<String>,
}

impl OutputSink {
    pub fn new(dir: &Path, slug: &str, gnuplot: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            slug: slug.to_string(),
            gnuplot,
            files: Vec::new(),
        })
    }

    fn name(&self, stem: &str, ext: &str) -> String {
        if stem == self.slug {
            return format!("{stem}.{ext}");
        }
        format!("{}-{stem}.{ext}", self.slug)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `stem.csv` with a header row; returns the file name.
    pub fn table(&mut self, stem: &str, header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
        let name = self.name(stem, "csv");
        let mut w = csv::Writer::from_path(self.dir.join(&name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: self.dir.join(&name),
            source,
        })?;
        self.files.push(name.clone());
        Ok(name)
    }

    /// Emits a gnuplot script for a CSV written by [`Self::table`], when
    /// gnuplot output is on.
    pub fn plot(
        &mut self,
        csv_name: &str,
        stem: &str,
        xlabel: &str,
        ylabel: &str,
        series: &[Series<'_>],
    ) -> Result<(), CliError> {
        if !self.gnuplot {
            return Ok(());
        }
        let name = self.name(stem, "gp");
        let plots: Vec<String> = series
            .iter()
            .map(|s| match s.error_column {
                Some(e) => format!(
                    "'{csv_name}' using 1:{c}:{e} with yerrorlines title '{t}'",
                    c = s.column,
                    t = s.title
                ),
                None => format!("'{csv_name}' using 1:{c} with lines title '{t}'", c = s.column, t = s.title),
            })
            .collect();
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset grid\nset terminal pngcairo size 800,600\nset output '{png}'\nplot {}\n",
            plots.join(", \\\n     "),
            png = self.name(stem, "png"),
        );
        let path = self.dir.join(&name);
        fs::write(&path, script).map_err(|source| CliError::Io { path, source })?;
        self.files.push(name);
        Ok(())
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(format!("{}.json", self.slug))
    }

    pub fn write_report(&self, report: &Report) -> Result<PathBuf, CliError> {
        let path = self.report_path();
        let text = serde_json::to_string_pretty(report)?;
        fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

pub fn read_report(path: &Path) -> Result<Report, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::config("replay", format!("{}: {e}", path.display())))
}
