//! On-disk formats.
//!
//! * Delimited: UTF-8, comma separated, one matrix row per line. The first
//!   line is treated as a header when any of its cells fails to parse as a
//!   number.
//! * Binary: the 8-byte magic `LAVAMAT1`, row count and column count as
//!   little-endian `u64`, then `rows * cols` little-endian `f32` values in
//!   row-major order. A 1x1 matrix is therefore 28 bytes.
//!
//! Integer matrices (locality membership) reuse the binary format; indices
//! must stay below 2^24 to be exact in `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LavaError, Result};
use crate::matrix::Matrix;

pub const BINARY_MAGIC: &[u8; 8] = b"LAVAMAT1";
pub const BINARY_HEADER_LEN: usize = 24;
const MAX_EXACT_INDEX: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Delimited,
    Binary,
}

impl MatrixFormat {
    /// `.bin` files are binary, everything else is delimited.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Delimited,
        }
    }
}

/// Latent coordinates, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(Matrix);

impl EmbeddingMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(LavaError::data("embedding matrix is empty"));
        }
        if !data.all_finite() {
            return Err(LavaError::data("embedding matrix has non-finite entries"));
        }
        Ok(EmbeddingMatrix(data))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn num_samples(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }
}

/// Original features, one row per sample, with unique column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Matrix,
    feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(data: Matrix, feature_names: Option<Vec<String>>) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(LavaError::data("feature matrix is empty"));
        }
        if !data.all_finite() {
            return Err(LavaError::data("feature matrix has non-finite entries"));
        }
        let feature_names = feature_names.unwrap_or_else(|| (0..data.cols()).map(|j| format!("f{j}")).collect());
        if feature_names.len() != data.cols() {
            return Err(LavaError::data(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                data.cols()
            )));
        }
        let mut sorted: Vec<&String> = feature_names.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(LavaError::data(format!("duplicate feature name `{}`", w[0])));
        }
        Ok(FeatureMatrix { data, feature_names })
    }

    /// Checks that this matrix pairs row-for-row with `embeddings`.
    pub fn check_paired(&self, embeddings: &EmbeddingMatrix) -> Result<()> {
        if self.num_samples() != embeddings.num_samples() {
            return Err(LavaError::data(format!(
                "feature matrix has {} rows but embeddings have {}",
                self.num_samples(),
                embeddings.num_samples()
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn num_samples(&self) -> usize {
        self.data.rows()
    }

    pub fn num_features(&self) -> usize {
        self.data.cols()
    }
}

/// One categorical label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLabels {
    pub name: String,
    pub labels: Vec<String>,
}

impl SampleLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct labels in first-seen order.
    pub fn vocabulary(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for l in &self.labels {
            if !seen.contains(&l.as_str()) {
                seen.push(l);
            }
        }
        seen
    }
}

/// Labels file: a single-column delimited file whose first line is the
/// label name.
pub fn load_labels(path: impl AsRef<Path>) -> Result<SampleLabels> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LavaError::io(path, e))?;
    let mut lines = text.lines();
    let name = lines
        .next()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| LavaError::format(path, "missing label header"))?;
    let labels: Vec<String> = lines.map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
    if labels.is_empty() {
        return Err(LavaError::data(format!("{}: no labels", path.display())));
    }
    Ok(SampleLabels { name, labels })
}

pub fn save_labels(labels: &SampleLabels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(labels.labels.len() * 4);
    out.push_str(&labels.name);
    out.push('\n');
    for l in &labels.labels {
        out.push_str(l);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| LavaError::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Matrix> {
    match format {
        MatrixFormat::Binary => load_binary(path.as_ref()),
        MatrixFormat::Delimited => load_delimited(path.as_ref()).map(|(m, _)| m),
    }
}

pub fn save_matrix(matrix: &Matrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Binary => save_binary(matrix, path.as_ref()),
        MatrixFormat::Delimited => save_delimited(matrix, None, path.as_ref()),
    }
}

/// Loads a delimited matrix and its header row, if one is present.
pub fn load_delimited(path: &Path) -> Result<(Matrix, Option<Vec<String>>)> {
    let file = File::open(path).map_err(|e| LavaError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let mut header = None;
    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| LavaError::format(path, format!("row {row_idx}: {e}")))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if row_idx == 0 && parsed.iter().any(Option::is_none) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            cols = Some(record.len());
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(LavaError::format(
                path,
                format!("row {row_idx}: {} values, expected {expected}", record.len()),
            ));
        }
        for (col, v) in parsed.into_iter().enumerate() {
            let v = v.ok_or_else(|| {
                LavaError::format(
                    path,
                    format!("row {row_idx}, column {col}: `{}` is not a number", &record[col]),
                )
            })?;
            if !v.is_finite() {
                return Err(LavaError::data(format!(
                    "{}: non-finite value at row {row_idx}, column {col}",
                    path.display()
                )));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(LavaError::data(format!("{}: empty matrix", path.display())));
    }
    let matrix = Matrix::new(rows, cols.unwrap_or(0), data)?;
    Ok((matrix, header))
}

/// Writes a delimited matrix using shortest round-trip float formatting.
pub fn save_delimited(matrix: &Matrix, header: Option<&[String]>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| LavaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| LavaError::io(path, e);
    if let Some(h) = header {
        writeln!(w, "{}", h.join(",")).map_err(io_err)?;
    }
    for row in matrix.iter_rows() {
        let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn save_binary(matrix: &Matrix, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(BINARY_HEADER_LEN + 4 * matrix.as_slice().len());
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(matrix.cols() as u64).to_le_bytes());
    for &v in matrix.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| LavaError::io(path, e))
}

/// Writes raw `f32` values with the binary header.
pub fn save_binary_f32(rows: usize, cols: usize, values: &[f32], path: &Path) -> Result<()> {
    assert_eq!(rows * cols, values.len());
    let mut buf = Vec::with_capacity(BINARY_HEADER_LEN + 4 * values.len());
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for &v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| LavaError::io(path, e))
}

/// Reads a binary matrix as raw `f32` values: `(rows, cols, values)`.
pub fn load_binary_f32(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let file = File::open(path).map_err(|e| LavaError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = [0u8; BINARY_HEADER_LEN];
    reader
        .read_exact(&mut header)
        .map_err(|_| LavaError::format(path, "truncated header"))?;
    if &header[..8] != BINARY_MAGIC {
        return Err(LavaError::format(path, "bad magic, expected LAVAMAT1"));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(LavaError::data(format!(
            "{}: empty matrix ({rows}x{cols})",
            path.display()
        )));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| LavaError::format(path, "dimensions overflow"))?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload).map_err(|e| LavaError::io(path, e))?;
    if payload.len() != count * 4 {
        return Err(LavaError::format(
            path,
            format!(
                "payload has {} bytes, header promises {rows}x{cols} f32 values",
                payload.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            let c = cols as usize;
            return Err(LavaError::data(format!(
                "{}: non-finite value at row {}, column {}",
                path.display(),
                k / c,
                k % c
            )));
        }
        values.push(v);
    }
    Ok((rows as usize, cols as usize, values))
}

pub fn load_binary(path: &Path) -> Result<Matrix> {
    let (rows, cols, values) = load_binary_f32(path)?;
    Matrix::new(rows, cols, values.into_iter().map(f64::from).collect())
}

/// Saves rows of sample indices (all rows the same length) in binary form.
pub fn save_index_matrix(rows: &[Vec<usize>], path: &Path) -> Result<()> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut values = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        if r.len() != cols {
            return Err(LavaError::param("index rows differ in length"));
        }
        for &i in r {
            if i >= MAX_EXACT_INDEX {
                return Err(LavaError::param(format!(
                    "index {i} exceeds the exactly representable range"
                )));
            }
            values.push(i as f32);
        }
    }
    save_binary_f32(rows.len(), cols, &values, path)
}

pub fn load_index_matrix(path: &Path) -> Result<Vec<Vec<usize>>> {
    let (rows, cols, values) = load_binary_f32(path)?;
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for &v in &values[r * cols..(r + 1) * cols] {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(LavaError::format(path, format!("row {r}: `{v}` is not an index")));
            }
            row.push(v as usize);
        }
        out.push(row);
    }
    Ok(out)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    EmbeddingMatrix::new(load_matrix(path, MatrixFormat::from_path(path))?)
}

/// Loads features; a delimited header supplies the feature names.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => FeatureMatrix::new(load_binary(path)?, None),
        MatrixFormat::Delimited => {
            let (m, header) = load_delimited(path)?;
            FeatureMatrix::new(m, header)
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| LavaError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| LavaError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LavaError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| LavaError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| LavaError::io(path, e))
}
