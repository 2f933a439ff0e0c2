//! Dataset and mixture files: headerless CSV samples, a JSON sidecar next to
//! each CSV, and mixtures as `{"weights", "means", "variances"}` JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sphmix::{Dataset, Matrix, Mixture};

use crate::BadInput;

pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub generator_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Mixture<f64>>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn read_mixture(path: &Path) -> Result<Mixture<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| BadInput(format!("{}: {e}", path.display())))?;
    let m = serde_json::from_str(&text).map_err(|e| BadInput(format!("{}: {e}", path.display())))?;
    Ok(m)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Reads an `n × d` CSV. All rows must have the same width and finite values.
pub fn read_samples(path: &Path) -> Result<Dataset<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| BadInput(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut d = 0;
    let mut n = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| BadInput(format!("{}: {e}", path.display())))?;
        if n == 0 {
            d = record.len();
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| BadInput(format!("{} line {}: not a number: {field:?}", path.display(), line + 1)))?;
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(BadInput(format!("{}: no samples", path.display())).into());
    }
    let samples = Matrix::new(n, d, values).map_err(|e| BadInput(format!("{}: {e}", path.display())))?;
    let seed = std::fs::read_to_string(sidecar_path(path))
        .ok()
        .and_then(|s| serde_json::from_str::<Sidecar>(&s).ok())
        .map_or(0, |s| s.seed);
    Ok(Dataset::new(samples, seed, None).map_err(|e| BadInput(format!("{}: {e}", path.display())))?)
}

/// Writes samples with shortest round-trip formatting, so re-reading gives
/// bit-identical values.
pub fn write_samples(path: &Path, data: &Dataset<f64>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    let mut buf = Vec::with_capacity(data.dim());
    for i in 0..data.n() {
        buf.clear();
        buf.extend(data.row(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}
