//! CSV ingestion into columnar relations, and query loading.

use std::fs;
use std::path::Path;

use pq_core::model::{ModelError, PackageQuery, Relation};
use pq_core::partition::storage::{self, StorageError};

use crate::paql::{parse_paql, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: line {line}, column `{column}`: cannot parse `{value}` as a number")]
    Number {
        path: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{path}: line {line}: expected {expected} fields, found {found}")]
    Width {
        path: String,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}: no header row")]
    NoHeader { path: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// Comma-delimited, header required, every cell a 64-bit float.
pub fn ingest_csv(path: &Path) -> Result<Relation, IngestError> {
    let shown = path.display().to_string();
    let csv_err = |source| IngestError::Csv {
        path: shown.clone(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let names: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(IngestError::NoHeader { path: shown });
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(csv_err)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(IngestError::Width {
                path: shown,
                line,
                expected: names.len(),
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| IngestError::Number {
                path: shown.clone(),
                line,
                column: names[j].clone(),
                value: cell.to_string(),
            })?;
            columns[j].push(v);
        }
    }
    Ok(Relation::new(names, columns)?)
}

/// Columnar cache in the partition value-file format.
pub fn write_cache(path: &Path, rel: &Relation) -> Result<(), IngestError> {
    Ok(storage::write_values(path, rel.names(), rel.columns())?)
}

pub fn read_cache(path: &Path) -> Result<Relation, IngestError> {
    let (names, columns) = storage::read_values(path)?;
    Ok(Relation::new(names, columns)?)
}

/// A `.csv` file is parsed as text; anything else is read as a value file.
pub fn load_relation(path: &Path) -> Result<Relation, IngestError> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        ingest_csv(path)
    } else {
        read_cache(path)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("PaQL {0}")]
    Parse(#[from] ParseError),
    #[error("JSON query: {0}")]
    Json(#[from] serde_json::Error),
}

/// JSON when the text starts with `{`, PaQL otherwise.
pub fn parse_query(text: &str) -> Result<PackageQuery, QueryError> {
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(parse_paql(text)?)
    }
}

pub fn load_query(path: &Path) -> Result<PackageQuery, QueryError> {
    parse_query(&fs::read_to_string(path)?)
}
