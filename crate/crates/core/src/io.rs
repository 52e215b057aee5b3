//! Embedding matrices, token corpora and score tables, plus their on-disk formats.
//!
//! Embeddings use the `EMB1` binary layout: a 16-byte header (`b"EMB1"`, `u32` count,
//! `u32` dim, 4 reserved zero bytes, all little-endian) followed by `count * dim`
//! little-endian `f32` values in row-major order.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_HEADER_LEN: usize = 16;

/// Cell text used for negative infinity in score tables and JSON reports.
pub const NEG_INF_TOKEN: &str = "-inf";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed EMB1 header: {0}")]
    MalformedHeader(String),
    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },
    #[error("payload size mismatch: expected {expected} floats, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("malformed corpus line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("corpus line {line} has no tokens")]
    EmptySample { line: usize },
    #[error("duplicate dataset id {0:?}")]
    DuplicateDatasetId(String),
    #[error("unparsable cell at row {row}, column {column:?}: {value:?}")]
    UnparsableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Row-major matrix of sample embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    count: usize,
    dim: usize,
    data: Vec<f32>,
    ids: Option<Vec<String>>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, DatasetError> {
        if dim == 0 {
            return Err(DatasetError::InvalidMatrix("dim must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(DatasetError::InvalidMatrix(format!(
                "data length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFiniteValue { row: pos / dim });
        }
        Ok(Self {
            count: data.len() / dim,
            dim,
            data,
            ids: None,
        })
    }

    pub fn empty(dim: usize) -> Result<Self, DatasetError> {
        Self::new(dim, Vec::new())
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self, DatasetError> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| DatasetError::InvalidMatrix("no rows given".into()))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(DatasetError::InvalidMatrix(format!(
                    "row {i} has length {}, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn from_rows_f64<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, DatasetError> {
        let converted: Vec<Vec<f32>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| v as f32).collect())
            .collect();
        Self::from_rows(&converted)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self, DatasetError> {
        if ids.len() != self.count {
            return Err(DatasetError::InvalidMatrix(format!(
                "{} ids for {} rows",
                ids.len(),
                self.count
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(DatasetError::DuplicateId(id.clone()));
            }
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Gathers the given rows (repetition allowed) into a new matrix.
    pub fn select(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.count {
                return Err(DatasetError::InvalidMatrix(format!(
                    "row index {i} out of range for {} rows",
                    self.count
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        let ids = self
            .ids
            .as_ref()
            .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect::<Vec<_>>());
        let mut out = Self::new(self.dim, data)?;
        // repeated rows would collide on ids
        if let Some(ids) = ids {
            if let Ok(with) = out.clone().with_ids(ids) {
                out = with;
            }
        }
        Ok(out)
    }

    /// Short content hash identifying this matrix in reports.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.count as u64).to_le_bytes());
        hasher.update((self.dim as u64).to_le_bytes());
        for v in &self.data {
            hasher.update(v.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn save_embeddings(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_embeddings(matrix, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_embeddings<W: Write>(matrix: &EmbeddingMatrix, w: &mut W) -> Result<(), DatasetError> {
    let count = u32::try_from(matrix.count)
        .map_err(|_| DatasetError::InvalidMatrix("count exceeds u32".into()))?;
    let dim = u32::try_from(matrix.dim)
        .map_err(|_| DatasetError::InvalidMatrix("dim exceeds u32".into()))?;
    w.write_all(EMB1_MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&[0u8; 4])?;
    let mut buf = Vec::with_capacity(matrix.dim * 4);
    for row in matrix.rows() {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, DatasetError> {
    let file = File::open(path)?;
    read_embeddings(&mut BufReader::new(file))
}

pub fn read_embeddings<R: Read>(r: &mut R) -> Result<EmbeddingMatrix, DatasetError> {
    let mut header = [0u8; EMB1_HEADER_LEN];
    read_full(r, &mut header).and_then(|n| {
        if n < EMB1_HEADER_LEN {
            Err(DatasetError::MalformedHeader(format!(
                "truncated header ({n} of {EMB1_HEADER_LEN} bytes)"
            )))
        } else {
            Ok(())
        }
    })?;
    if &header[0..4] != EMB1_MAGIC {
        return Err(DatasetError::MalformedHeader("bad magic".into()));
    }
    let count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if header[12..16] != [0u8; 4] {
        return Err(DatasetError::MalformedHeader("reserved bytes are not zero".into()));
    }
    if dim == 0 {
        return Err(DatasetError::MalformedHeader("dim is zero".into()));
    }
    let expected = count
        .checked_mul(dim)
        .ok_or_else(|| DatasetError::MalformedHeader("count*dim overflows".into()))?;

    let mut data = Vec::with_capacity(expected);
    let mut chunk = vec![0u8; 4 * dim.max(1024)];
    let mut pending = 0usize;
    loop {
        let n = r.read(&mut chunk[pending..])?;
        if n == 0 {
            break;
        }
        let avail = pending + n;
        let whole = avail - avail % 4;
        for b in chunk[..whole].chunks_exact(4) {
            let v = f32::from_le_bytes(b.try_into().unwrap());
            if data.len() == expected {
                return Err(DatasetError::SizeMismatch {
                    expected,
                    found: expected + 1,
                });
            }
            if !v.is_finite() {
                return Err(DatasetError::NonFiniteValue { row: data.len() / dim });
            }
            data.push(v);
        }
        chunk.copy_within(whole..avail, 0);
        pending = avail - whole;
    }
    if pending != 0 || data.len() != expected {
        return Err(DatasetError::SizeMismatch {
            expected,
            found: data.len(),
        });
    }
    EmbeddingMatrix::new(dim, data)
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, DatasetError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

/// Per-sample token sequences for the lexical metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    samples: Vec<Vec<String>>,
    ids: Option<Vec<String>>,
}

impl Corpus {
    pub fn new(samples: Vec<Vec<String>>) -> Result<Self, DatasetError> {
        if let Some(i) = samples.iter().position(|s| s.is_empty()) {
            return Err(DatasetError::EmptySample { line: i + 1 });
        }
        Ok(Self { samples, ids: None })
    }

    pub fn from_token_lists<S: AsRef<str>>(samples: &[Vec<S>]) -> Result<Self, DatasetError> {
        Self::new(
            samples
                .iter()
                .map(|s| s.iter().map(|t| t.as_ref().to_string()).collect())
                .collect(),
        )
    }

    pub fn samples(&self) -> &[Vec<String>] {
        &self.samples
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Deserialize)]
struct CorpusLine {
    tokens: Option<Vec<String>>,
    text: Option<String>,
    id: Option<String>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, DatasetError> {
    read_corpus(BufReader::new(File::open(path)?))
}

/// Reads JSONL lines carrying either `"tokens"` or `"text"` (whitespace-split).
/// Blank lines are skipped; line numbers in errors are 1-based file lines.
pub fn read_corpus<R: BufRead>(r: R) -> Result<Corpus, DatasetError> {
    let mut samples = Vec::new();
    let mut ids = Vec::new();
    let mut all_ids = true;
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine =
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
        let tokens = match (parsed.tokens, parsed.text) {
            (Some(t), _) => t,
            (None, Some(text)) => text.split_whitespace().map(str::to_string).collect(),
            (None, None) => {
                return Err(DatasetError::MalformedLine {
                    line: line_no,
                    reason: "expected a \"tokens\" or \"text\" field".into(),
                })
            }
        };
        if tokens.is_empty() {
            return Err(DatasetError::EmptySample { line: line_no });
        }
        match parsed.id {
            Some(id) => ids.push(id),
            None => all_ids = false,
        }
        samples.push(tokens);
    }
    let ids = if all_ids && !samples.is_empty() {
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(DatasetError::DuplicateId(id.clone()));
            }
        }
        Some(ids)
    } else {
        None
    };
    Ok(Corpus { samples, ids })
}

/// One dataset's metric scores and (optionally) its measured performance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub dataset_id: String,
    pub scores: Vec<f64>,
    pub performance: Option<f64>,
}

/// Metric-vs-performance table. `scores` in each row align with `metric_names`.
/// Negative infinity is a legal score (e.g. log-determinant of a duplicated set).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    id_column: String,
    metric_names: Vec<String>,
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(metric_names: Vec<String>, rows: Vec<ScoreRow>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for row in &rows {
            if !seen.insert(row.dataset_id.clone()) {
                return Err(DatasetError::DuplicateDatasetId(row.dataset_id.clone()));
            }
            if row.scores.len() != metric_names.len() {
                return Err(DatasetError::InvalidMatrix(format!(
                    "row {:?} has {} scores for {} metrics",
                    row.dataset_id,
                    row.scores.len(),
                    metric_names.len()
                )));
            }
            let bad = row
                .scores
                .iter()
                .chain(row.performance.iter())
                .any(|v| v.is_nan() || *v == f64::INFINITY);
            if bad {
                return Err(DatasetError::InvalidMatrix(format!(
                    "row {:?} holds a value other than a finite float or -inf",
                    row.dataset_id
                )));
            }
        }
        Ok(Self {
            id_column: "dataset_id".into(),
            metric_names,
            rows,
        })
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_performance(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.performance.is_some())
    }

    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metric_names.iter().position(|m| m == name)
    }

    pub fn metric_column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.metric_index(name)?;
        Some(self.rows.iter().map(|r| r.scores[idx]).collect())
    }

    /// Replaces the performance column with `values` and drops the named metric columns.
    pub fn with_performance(mut self, values: Vec<f64>, consumed: &[&str]) -> Result<Self, DatasetError> {
        if values.len() != self.rows.len() {
            return Err(DatasetError::InvalidMatrix(format!(
                "{} performance values for {} rows",
                values.len(),
                self.rows.len()
            )));
        }
        let keep: Vec<usize> = (0..self.metric_names.len())
            .filter(|&i| !consumed.contains(&self.metric_names[i].as_str()))
            .collect();
        self.metric_names = keep.iter().map(|&i| self.metric_names[i].clone()).collect();
        for (row, p) in self.rows.iter_mut().zip(values) {
            row.scores = keep.iter().map(|&i| row.scores[i]).collect();
            row.performance = Some(p);
        }
        Ok(self)
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.eq_ignore_ascii_case(NEG_INF_TOKEN) {
        return Some(f64::NEG_INFINITY);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

pub fn format_score(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        NEG_INF_TOKEN.to_string()
    } else {
        format!("{v}")
    }
}

pub fn load_score_table(path: impl AsRef<Path>) -> Result<ScoreTable, DatasetError> {
    read_score_table(File::open(path)?)
}

pub fn read_score_table<R: Read>(r: R) -> Result<ScoreTable, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(DatasetError::InvalidMatrix("score table has no columns".into()));
    }
    let id_column = headers[0].to_string();
    let perf_col = headers.iter().position(|h| h == "performance");
    let metric_cols: Vec<usize> = (1..headers.len()).filter(|&c| Some(c) != perf_col).collect();
    let metric_names = metric_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row_no = i + 1;
        let dataset_id = rec[0].to_string();
        if !seen.insert(dataset_id.clone()) {
            return Err(DatasetError::DuplicateDatasetId(dataset_id));
        }
        let cell = |c: usize| -> Result<f64, DatasetError> {
            parse_cell(&rec[c]).ok_or_else(|| DatasetError::UnparsableCell {
                row: row_no,
                column: headers[c].to_string(),
                value: rec[c].to_string(),
            })
        };
        let scores = metric_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>, _>>()?;
        let performance = perf_col.map(cell).transpose()?;
        rows.push(ScoreRow {
            dataset_id,
            scores,
            performance,
        });
    }
    let mut table = ScoreTable::new(metric_names, rows)?;
    table.id_column = id_column;
    Ok(table)
}

pub fn write_score_table<W: Write>(table: &ScoreTable, w: W) -> Result<(), DatasetError> {
    let mut writer = csv::Writer::from_writer(w);
    let mut header = vec![table.id_column.clone()];
    header.extend(table.metric_names.iter().cloned());
    let with_perf = table.has_performance();
    if with_perf {
        header.push("performance".into());
    }
    writer.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![row.dataset_id.clone()];
        rec.extend(row.scores.iter().map(|&v| format_score(v)));
        if with_perf {
            rec.push(format_score(row.performance.unwrap()));
        }
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}
