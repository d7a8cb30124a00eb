//! Benchmark construction: structural filters, column pruning, popularity
//! scoring via a pageviews client, and instance packaging with
//! human-supplied descriptions.
//!
//! The module consumes candidate tables already extracted into the benchmark
//! row format plus upstream structural flags; scraping wikitext or HTML is
//! out of scope. Structural flags are trusted as given, never re-detected.

pub mod pageviews;

pub use pageviews::{FixturePageviews, LivePageviews, MonthRange, PageviewsClient, YearMonth};

use crate::benchmark::{BenchmarkInstance, Split};
use crate::gateway::count_tokens;
use crate::table::{RelationalTable, Row};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Minimum rows and columns a curated table must keep.
pub const MIN_ROWS: usize = 10;
pub const MIN_COLS: usize = 2;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path} is not a valid candidates file: {source}")]
    Format { path: String, source: serde_json::Error },
    #[error("page {0:?} not found")]
    PageNotFound(String),
    #[error("no pageview data for {page} in {start}..{end}")]
    AllMonthsMissing { page: String, start: String, end: String },
    #[error("pageviews endpoint: {0}")]
    Endpoint(String),
    #[error("description is empty")]
    EmptyDescription,
    #[error("instance {id:?} failed validation: {reason}")]
    Validation { id: String, reason: String },
}

/// Upstream structural classification of a raw table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralFlags {
    #[serde(default)]
    pub composite_header: bool,
    #[serde(default)]
    pub nested: bool,
    #[serde(default)]
    pub inverted: bool,
}

impl StructuralFlags {
    pub fn any(&self) -> bool {
        self.composite_header || self.nested || self.inverted
    }
}

/// A raw table under consideration, with per-column fill rates and median
/// token lengths computed at construction.
#[derive(Debug, Clone)]
pub struct CandidateTable {
    pub id: String,
    pub table: RelationalTable,
    pub flags: StructuralFlags,
    pub source_page: String,
    pub split: Split,
    pub column_fill_rates: Vec<f64>,
    pub column_median_token_len: Vec<f64>,
}

impl CandidateTable {
    pub fn new(
        id: String,
        table: RelationalTable,
        flags: StructuralFlags,
        source_page: String,
        split: Split,
    ) -> Self {
        let column_fill_rates = fill_rates(&table);
        let column_median_token_len = median_token_lengths(&table);
        Self { id, table, flags, source_page, split, column_fill_rates, column_median_token_len }
    }
}

fn fill_rates(table: &RelationalTable) -> Vec<f64> {
    let rows = table.num_rows();
    (0..table.num_cols())
        .map(|c| {
            if rows == 0 {
                return 1.0; // vacuously full; the row-count filter rejects it
            }
            let filled = table.rows().iter().filter(|r| r[c].is_some()).count();
            filled as f64 / rows as f64
        })
        .collect()
}

fn median_token_lengths(table: &RelationalTable) -> Vec<f64> {
    (0..table.num_cols())
        .map(|c| {
            let mut lengths: Vec<usize> = table
                .rows()
                .iter()
                .filter_map(|r| r[c].as_deref())
                .map(count_tokens)
                .collect();
            if lengths.is_empty() {
                return 0.0;
            }
            lengths.sort_unstable();
            let mid = lengths.len() / 2;
            if lengths.len() % 2 == 1 {
                lengths[mid] as f64
            } else {
                (lengths[mid - 1] + lengths[mid]) as f64 / 2.0
            }
        })
        .collect()
}

/// Why a candidate was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionCode {
    NonRelational,
    TooSmall,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionReason {
    pub code: RejectionCode,
    pub detail: String,
}

impl RejectionReason {
    fn new(code: RejectionCode, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }
}

/// Pruning thresholds. "Partial entries" defaults to strict: any missing
/// cell drops the column. "Long texts" is operationalized as a median token
/// length above `max_median_tokens`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurationConfig {
    pub fill_threshold: f64,
    pub max_median_tokens: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self { fill_threshold: 1.0, max_median_tokens: 10.0 }
    }
}

/// Drops non-key columns with partial entries (fill rate below the
/// threshold) or long text (median token length above the cap). Key columns
/// are never dropped: a key column failing the fill test rejects the whole
/// table instead.
pub fn prune_columns(
    candidate: &CandidateTable,
    fill_threshold: f64,
    max_median_tokens: f64,
) -> Result<RelationalTable, RejectionReason> {
    let table = &candidate.table;
    let mut keep = Vec::new();
    for (c, col) in table.columns().iter().enumerate() {
        let fill = candidate.column_fill_rates[c];
        let median = candidate.column_median_token_len[c];
        if col.is_key {
            if fill < fill_threshold {
                return Err(RejectionReason::new(
                    RejectionCode::Other,
                    format!("key column {:?} has missing entries (fill rate {fill:.3})", col.name),
                ));
            }
            keep.push(c);
        } else if fill >= fill_threshold && median <= max_median_tokens {
            keep.push(c);
        }
    }
    if keep.len() < MIN_COLS {
        return Err(RejectionReason::new(
            RejectionCode::TooSmall,
            format!("pruning leaves {} column(s), fewer than {MIN_COLS}", keep.len()),
        ));
    }
    let columns = keep.iter().map(|&c| table.columns()[c].clone()).collect();
    let rows: Vec<Row> = table
        .rows()
        .iter()
        .map(|row| keep.iter().map(|&c| row[c].clone()).collect())
        .collect();
    Ok(RelationalTable::new(columns, rows).expect("pruned table keeps row widths"))
}

/// Applies the construction rules to one candidate: structural flags first,
/// then column pruning, then the size thresholds. Returns the pruned table
/// on acceptance.
pub fn filter_candidate(
    candidate: &CandidateTable,
    config: &CurationConfig,
) -> Result<RelationalTable, RejectionReason> {
    if candidate.flags.any() {
        let mut kinds = Vec::new();
        if candidate.flags.composite_header {
            kinds.push("composite header");
        }
        if candidate.flags.nested {
            kinds.push("nested table");
        }
        if candidate.flags.inverted {
            kinds.push("inverted table");
        }
        return Err(RejectionReason::new(RejectionCode::NonRelational, kinds.join(", ")));
    }
    let pruned = prune_columns(candidate, config.fill_threshold, config.max_median_tokens)?;
    if pruned.num_rows() < MIN_ROWS {
        return Err(RejectionReason::new(
            RejectionCode::TooSmall,
            format!("{} rows, fewer than {MIN_ROWS}", pruned.num_rows()),
        ));
    }
    if pruned.num_cols() < MIN_COLS {
        return Err(RejectionReason::new(
            RejectionCode::TooSmall,
            format!("{} columns, fewer than {MIN_COLS}", pruned.num_cols()),
        ));
    }
    Ok(pruned)
}

/// Mean monthly pageviews over the window; months without data are excluded
/// from the mean rather than counted as zero.
pub fn popularity(
    source_page: &str,
    client: &dyn PageviewsClient,
    window: &MonthRange,
) -> Result<f64, CurationError> {
    let views = client.monthly_views(source_page, window)?;
    let in_window: Vec<u64> = window
        .months()
        .filter_map(|m| views.get(&m).copied())
        .collect();
    if in_window.is_empty() {
        return Err(CurationError::AllMonthsMissing {
            page: source_page.to_string(),
            start: window.start.to_string(),
            end: window.end.to_string(),
        });
    }
    Ok(in_window.iter().sum::<u64>() as f64 / in_window.len() as f64)
}

/// Packages an accepted, pruned table into a validated benchmark instance.
/// Descriptions are human-written and pass through verbatim, time-bounded
/// phrasing included.
pub fn package_instance(
    table: RelationalTable,
    description: &str,
    popularity: f64,
    id: &str,
    split: Split,
    source_page: Option<String>,
) -> Result<BenchmarkInstance, CurationError> {
    if description.trim().is_empty() {
        return Err(CurationError::EmptyDescription);
    }
    let instance = BenchmarkInstance {
        id: id.to_string(),
        description: description.to_string(),
        table,
        popularity,
        source_page,
        split,
    };
    instance
        .validate()
        .map_err(|reason| CurationError::Validation { id: id.to_string(), reason })?;
    Ok(instance)
}

#[derive(Deserialize)]
struct CandidatesFile {
    candidates: Vec<CandidateRecord>,
}

#[derive(Deserialize)]
struct CandidateRecord {
    id: String,
    source_page: String,
    #[serde(default)]
    split: Option<Split>,
    #[serde(default)]
    composite_header: bool,
    #[serde(default)]
    nested: bool,
    #[serde(default)]
    inverted: bool,
    columns: Vec<crate::table::ColumnSpec>,
    rows: Vec<Row>,
}

/// Loads candidate tables from JSON: benchmark row format plus structural
/// flags and a source page per entry.
pub fn load_candidates(path: impl AsRef<Path>) -> Result<Vec<CandidateTable>, CurationError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CurationError::Read { path: path.display().to_string(), source })?;
    let file: CandidatesFile = serde_json::from_str(&text)
        .map_err(|source| CurationError::Format { path: path.display().to_string(), source })?;
    file.candidates
        .into_iter()
        .map(|rec| {
            let table = RelationalTable::new(rec.columns, rec.rows).map_err(|e| {
                CurationError::Validation { id: rec.id.clone(), reason: e.to_string() }
            })?;
            Ok(CandidateTable::new(
                rec.id,
                table,
                StructuralFlags {
                    composite_header: rec.composite_header,
                    nested: rec.nested,
                    inverted: rec.inverted,
                },
                rec.source_page,
                rec.split.unwrap_or(Split::Eval),
            ))
        })
        .collect()
}

/// Loads the `(id, description)` CSV that carries the human-written
/// descriptions.
pub fn load_descriptions(path: impl AsRef<Path>) -> Result<std::collections::BTreeMap<String, String>, CurationError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| CurationError::Read {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    let mut out = std::collections::BTreeMap::new();
    for result in reader.records() {
        let record = result.map_err(|e| CurationError::Read {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
        if record.len() >= 2 {
            out.insert(record[0].to_string(), record[1].to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::ColumnSpec;

    fn cell(s: &str) -> Option<String> {
        Some(s.to_string())
    }

    fn candidate(rows: usize, with_null_col: bool) -> CandidateTable {
        let columns = vec![
            ColumnSpec::key("name", false),
            ColumnSpec::non_key("value", true),
            ColumnSpec::non_key("extra", false),
        ];
        let rows: Vec<Row> = (0..rows)
            .map(|i| {
                let extra = if with_null_col && i % 5 == 0 { None } else { Some(format!("e{i}")) };
                vec![cell(&format!("n{i}")), cell(&i.to_string()), extra]
            })
            .collect();
        CandidateTable::new(
            "cand".to_string(),
            RelationalTable::new(columns, rows).unwrap(),
            StructuralFlags::default(),
            "Some Page".to_string(),
            Split::Eval,
        )
    }

    #[test]
    fn nine_rows_rejected_ten_accepted() {
        let config = CurationConfig::default();
        let nine = candidate(9, false);
        let err = filter_candidate(&nine, &config).unwrap_err();
        assert_eq!(err.code, RejectionCode::TooSmall);

        let ten = candidate(10, false);
        let accepted = filter_candidate(&ten, &config).unwrap();
        assert_eq!(accepted.num_rows(), 10);
        assert_eq!(accepted.num_cols(), 3);
    }

    #[test]
    fn structural_flags_reject_regardless_of_size() {
        let mut big = candidate(50, false);
        big.flags.nested = true;
        let err = filter_candidate(&big, &CurationConfig::default()).unwrap_err();
        assert_eq!(err.code, RejectionCode::NonRelational);
        assert!(err.detail.contains("nested"));
    }

    #[test]
    fn partial_column_pruned_at_default_threshold() {
        let c = candidate(20, true); // "extra" has 20% nulls
        let pruned = prune_columns(&c, 1.0, 10.0).unwrap();
        assert_eq!(pruned.num_cols(), 2);
        assert!(pruned.column_index("extra").is_none());
    }

    #[test]
    fn fully_filled_table_is_unchanged() {
        let c = candidate(15, false);
        let pruned = prune_columns(&c, 1.0, 10.0).unwrap();
        assert_eq!(pruned.num_cols(), 3);
        assert_eq!(pruned, c.table);
    }

    #[test]
    fn long_text_column_pruned() {
        let columns = vec![
            ColumnSpec::key("name", false),
            ColumnSpec::non_key("value", true),
            ColumnSpec::non_key("blurb", false),
        ];
        let rows: Vec<Row> = (0..12)
            .map(|i| {
                vec![
                    cell(&format!("n{i}")),
                    cell("1"),
                    cell("this descriptive sentence runs well past ten tokens in every single row"),
                ]
            })
            .collect();
        let c = CandidateTable::new(
            "long".to_string(),
            RelationalTable::new(columns, rows).unwrap(),
            StructuralFlags::default(),
            "P".to_string(),
            Split::Eval,
        );
        let pruned = prune_columns(&c, 1.0, 10.0).unwrap();
        assert!(pruned.column_index("blurb").is_none());
    }

    #[test]
    fn null_key_cell_rejects_table_naming_column() {
        let columns = vec![ColumnSpec::key("name", false), ColumnSpec::non_key("v", false), ColumnSpec::non_key("w", false)];
        let mut rows: Vec<Row> = (0..12).map(|i| vec![cell(&format!("n{i}")), cell("x"), cell("y")]).collect();
        rows[3][0] = None;
        let c = CandidateTable::new(
            "nullkey".to_string(),
            RelationalTable::new(columns, rows).unwrap(),
            StructuralFlags::default(),
            "P".to_string(),
            Split::Eval,
        );
        let err = prune_columns(&c, 1.0, 10.0).unwrap_err();
        assert_eq!(err.code, RejectionCode::Other);
        assert!(err.detail.contains("name"));
    }

    #[test]
    fn pruning_is_idempotent() {
        let c = candidate(20, true);
        let once = prune_columns(&c, 1.0, 10.0).unwrap();
        let again = CandidateTable::new(
            "again".to_string(),
            once.clone(),
            StructuralFlags::default(),
            "P".to_string(),
            Split::Eval,
        );
        let twice = prune_columns(&again, 1.0, 10.0).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn row_removal_never_flips_to_non_relational() {
        let config = CurationConfig::default();
        let full = candidate(30, false);
        assert!(filter_candidate(&full, &config).is_ok());
        for keep in (0..30).rev() {
            let truncated = CandidateTable::new(
                "trunc".to_string(),
                RelationalTable::new(
                    full.table.columns().to_vec(),
                    full.table.rows()[..keep].to_vec(),
                )
                .unwrap(),
                StructuralFlags::default(),
                "P".to_string(),
                Split::Eval,
            );
            match filter_candidate(&truncated, &config) {
                Ok(_) => assert!(keep >= MIN_ROWS),
                Err(reason) => assert_eq!(reason.code, RejectionCode::TooSmall),
            }
        }
    }

    #[test]
    fn packaging_requires_description() {
        let c = candidate(12, false);
        let table = filter_candidate(&c, &CurationConfig::default()).unwrap();
        assert!(matches!(
            package_instance(table.clone(), "  ", 10.0, "x", Split::Eval, None),
            Err(CurationError::EmptyDescription)
        ));
        let inst =
            package_instance(table, "twelve sample rows", 10.0, "x", Split::Eval, None).unwrap();
        assert_eq!(inst.split, Split::Eval);
    }
}
