//! CSV and JSON emission. Floats carry 17 significant digits so doubles
//! round-trip exactly; every file starts with the configuration digest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl Csv {
    /// Creates `dir/name`, writing the digest line, any `meta` comment
    /// lines and the header row.
    pub fn create(
        dir: &Path,
        name: &str,
        digest: &str,
        meta: &[(&str, String)],
        header: &[&str],
    ) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut csv = Self {
            path,
            out: BufWriter::new(file),
            columns: header.len(),
        };
        csv.line(&format!("# config-sha256: {digest}"))?;
        for (key, value) in meta {
            csv.line(&format!("# {key}: {value}"))?;
        }
        csv.line(&header.join(","))?;
        Ok(csv)
    }

    fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.out, "{text}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        debug_assert_eq!(cells.len(), self.columns);
        self.line(&cells.join(","))
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
