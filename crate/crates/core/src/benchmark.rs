//! Benchmark instances and the on-disk benchmark format.
//!
//! The file is UTF-8 JSON: `{"instances": [...]}` with each instance carrying
//! id, description, split, popularity, source page, column specs, and rows as
//! arrays in column order. Serialization is canonical (fixed field order,
//! schema-ordered columns) so save -> load -> save is byte-stable.

use crate::table::{ColumnSpec, RelationalTable, Row, TableError};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{path} is not a valid benchmark file: {source}")]
    Format { path: String, source: serde_json::Error },
    #[error("duplicate instance id {0:?}")]
    DuplicateInstanceId(String),
    #[error("instance {instance_id:?}: {reason}")]
    Invalid { instance_id: String, reason: String },
}

/// Which split an instance belongs to. Generation runs cover the eval split;
/// dev is held out for prompt iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Eval,
    Dev,
}

/// One benchmark entry: a description, its gold table, and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInstance {
    pub id: String,
    pub description: String,
    pub table: RelationalTable,
    /// Average monthly pageviews of the source page.
    pub popularity: f64,
    pub source_page: Option<String>,
    pub split: Split,
}

impl BenchmarkInstance {
    /// Validates the instance-level invariants: non-empty description and a
    /// table satisfying the gold invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.description.trim().is_empty() {
            return Err("description is empty".to_string());
        }
        if self.popularity < 0.0 || !self.popularity.is_finite() {
            return Err(format!("popularity {} is not a non-negative number", self.popularity));
        }
        self.table.validate_gold().map_err(|e| e.to_string())
    }
}

/// An ordered collection of benchmark instances.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Benchmark {
    pub instances: Vec<BenchmarkInstance>,
}

impl Benchmark {
    pub fn get(&self, id: &str) -> Option<&BenchmarkInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn eval_instances(&self) -> impl Iterator<Item = &BenchmarkInstance> {
        self.instances.iter().filter(|i| i.split == Split::Eval)
    }
}

#[derive(Serialize, Deserialize)]
struct BenchmarkFile {
    instances: Vec<InstanceRecord>,
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    description: String,
    split: Split,
    popularity: f64,
    source_page: Option<String>,
    columns: Vec<ColumnSpec>,
    rows: Vec<Row>,
}

/// Loads and validates a benchmark file. Every instance must satisfy the gold
/// invariants; failures are reported with the instance id and reason.
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Benchmark, BenchmarkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| BenchmarkError::Read { path: path.display().to_string(), source })?;
    parse_benchmark(&text, &path.display().to_string())
}

/// Parses benchmark JSON from a string; `origin` names the source in errors.
pub fn parse_benchmark(text: &str, origin: &str) -> Result<Benchmark, BenchmarkError> {
    let file: BenchmarkFile = serde_json::from_str(text)
        .map_err(|source| BenchmarkError::Format { path: origin.to_string(), source })?;
    let mut seen = HashSet::new();
    let mut instances = Vec::with_capacity(file.instances.len());
    for rec in file.instances {
        if !seen.insert(rec.id.clone()) {
            return Err(BenchmarkError::DuplicateInstanceId(rec.id));
        }
        let table = RelationalTable::new(rec.columns, rec.rows).map_err(|e: TableError| {
            BenchmarkError::Invalid { instance_id: rec.id.clone(), reason: e.to_string() }
        })?;
        let instance = BenchmarkInstance {
            id: rec.id,
            description: rec.description,
            table,
            popularity: rec.popularity,
            source_page: rec.source_page,
            split: rec.split,
        };
        instance.validate().map_err(|reason| BenchmarkError::Invalid {
            instance_id: instance.id.clone(),
            reason,
        })?;
        instances.push(instance);
    }
    Ok(Benchmark { instances })
}

/// Serializes a benchmark to its canonical JSON text.
pub fn benchmark_to_string(benchmark: &Benchmark) -> String {
    let file = BenchmarkFile {
        instances: benchmark
            .instances
            .iter()
            .map(|i| InstanceRecord {
                id: i.id.clone(),
                description: i.description.clone(),
                split: i.split,
                popularity: i.popularity,
                source_page: i.source_page.clone(),
                columns: i.table.columns().to_vec(),
                rows: i.table.rows().to_vec(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("benchmark serializes");
    text.push('\n');
    text
}

/// Writes a benchmark in canonical form; `load_benchmark` of the result
/// reproduces the input exactly.
pub fn save_benchmark(benchmark: &Benchmark, path: impl AsRef<Path>) -> Result<(), BenchmarkError> {
    let path = path.as_ref();
    std::fs::write(path, benchmark_to_string(benchmark))
        .map_err(|source| BenchmarkError::Write { path: path.display().to_string(), source })
}

/// Aggregate statistics recorded alongside a fixture set for self-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub num_instances: usize,
    pub avg_rows: f64,
    pub avg_cols: f64,
    pub avg_cells: f64,
    /// Measured with the local token counter; recorded, not asserted against
    /// any external figure.
    pub avg_token_estimate: f64,
    pub total_non_key_cells: usize,
}

/// Recomputes the aggregate stats a fixture manifest records.
pub fn compute_manifest(benchmark: &Benchmark) -> FixtureManifest {
    let n = benchmark.instances.len();
    let mut rows = 0usize;
    let mut cols = 0usize;
    let mut cells = 0usize;
    let mut tokens = 0usize;
    let mut non_key_cells = 0usize;
    for inst in &benchmark.instances {
        let stats = crate::table::table_stats(&inst.table, &inst.description);
        rows += stats.num_rows;
        cols += stats.num_cols;
        cells += stats.num_cells;
        tokens += stats.token_estimate;
        non_key_cells += inst.table.num_rows() * inst.table.non_key_indices().len();
    }
    let denom = n.max(1) as f64;
    FixtureManifest {
        num_instances: n,
        avg_rows: rows as f64 / denom,
        avg_cols: cols as f64 / denom,
        avg_cells: cells as f64 / denom,
        avg_token_estimate: tokens as f64 / denom,
        total_non_key_cells: non_key_cells,
    }
}
