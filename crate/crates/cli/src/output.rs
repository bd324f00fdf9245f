//! CSV formatting, content hashes and run manifests.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Column schema version written into every manifest.
pub const SCHEMA_VERSION: u32 = 1;

pub const PRICE_HEADER: [&str; 12] = [
    "product",
    "kind",
    "expiry",
    "end",
    "strike",
    "scheme",
    "mode",
    "price",
    "std_error",
    "ci95",
    "implied_vol",
    "n_paths",
];

pub const COMPARE_HEADER: [&str; 17] = [
    "product",
    "kind",
    "expiry",
    "end",
    "strike",
    "reference",
    "method",
    "reference_price",
    "price",
    "diff_price_bp",
    "se_price_bp",
    "reference_iv",
    "implied_vol",
    "diff_iv_bp",
    "se_iv_bp",
    "n_units",
    "grid",
];

pub const BENCH_HEADER: [&str; 10] = [
    "n_rates",
    "paths",
    "scheme",
    "mode",
    "status",
    "wall_seconds",
    "seconds_per_path",
    "cumulant_evals",
    "multiply_adds",
    "evals_per_path",
];

pub const DRIFT_COST_HEADER: [&str; 5] = ["mode", "tail", "status", "cumulant_evals", "multiply_adds"];

pub const FITS_HEADER: [&str; 8] = ["quantity", "scheme", "mode", "fixed", "law", "parameter", "r_squared", "points"];

/// Fixed significant-digit formatting; non-finite values print as `nan`,
/// `inf` or `-inf`.
#[derive(Debug, Clone, Copy)]
pub struct NumberFormat {
    pub digits: usize,
}

impl NumberFormat {
    pub fn new(digits: usize) -> Self {
        Self { digits }
    }

    pub fn f(&self, v: f64) -> String {
        if v.is_nan() {
            "nan".into()
        } else if v.is_infinite() {
            if v > 0.0 { "inf" } else { "-inf" }.into()
        } else {
            format!("{:.*e}", self.digits - 1, v)
        }
    }

    pub fn opt(&self, v: Option<f64>) -> String {
        v.map(|v| self.f(v)).unwrap_or_default()
    }
}

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Git-style object hash: SHA-256 of `"blob <len>\0" + content`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Writes every file into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[OutputFile]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.bytes)?;
            Ok(path)
        })
        .collect()
}
