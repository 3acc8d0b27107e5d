//! CSV and JSON writers with a provenance header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const TOOL: &str = "retlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    pub fn new(config_sha256: &str, seeds: &[u64]) -> Self {
        Provenance {
            tool: TOOL,
            version: VERSION,
            config_sha256: config_sha256.to_string(),
            seeds: seeds.to_vec(),
        }
    }
}

/// JSON document whose first field is the provenance block.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, provenance: &Provenance, body: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Document { provenance, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// A CSV file that starts with `# retlab <version> config=<sha> seed=<seed>`
/// (`seeds=<a,b,…>` for files that span several seeds).
pub struct CsvWriter {
    inner: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, config_sha256: &str, seeds: &[u64], columns: &[&str]) -> Result<Self, CliError> {
        let mut inner = BufWriter::new(File::create(path)?);
        let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
        let key = if seeds.len() == 1 { "seed" } else { "seeds" };
        writeln!(inner, "# {TOOL} {VERSION} config={config_sha256} {key}={}", list.join(","))?;
        writeln!(inner, "{}", columns.join(","))?;
        Ok(CsvWriter { inner })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        writeln!(self.inner, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting; locale independent.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
