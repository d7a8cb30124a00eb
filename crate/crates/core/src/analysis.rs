//! Post-run analysis: property-bucketed F1 curves (table size, numeric
//! ratio, popularity) and per-method token-cost reports, emitted as
//! plot-ready CSV/JSON. Rendering the plots themselves is out of scope.

use crate::metrics::TableEvaluation;
use crate::pipeline::{GenerationRecord, Method, RunManifest};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("bucket edges must be strictly ascending")]
    EdgesNotAscending,
    #[error("at least two bucket edges are needed")]
    TooFewEdges,
    #[error("instance {0:?} has no recorded table properties")]
    MissingProperties(String),
    #[error("instance {id:?} has {property} = {value}, outside the bucket range")]
    ValueOutOfRange { id: String, property: BucketProperty, value: f64 },
    #[error("unknown property {0:?} (expected num_cells, numeric_ratio, or popularity)")]
    UnknownProperty(String),
    #[error("cost report mixes records from different benchmarks: {0} vs {1}")]
    MixedBenchmarks(String, String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Which table property a bucket series is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketProperty {
    NumCells,
    NumericRatio,
    Popularity,
}

impl std::fmt::Display for BucketProperty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BucketProperty::NumCells => "num_cells",
            BucketProperty::NumericRatio => "numeric_ratio",
            BucketProperty::Popularity => "popularity",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BucketProperty {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "num_cells" => Ok(BucketProperty::NumCells),
            "numeric_ratio" => Ok(BucketProperty::NumericRatio),
            "popularity" => Ok(BucketProperty::Popularity),
            other => Err(AnalysisError::UnknownProperty(other.to_string())),
        }
    }
}

/// The property values one evaluated instance contributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceProperties {
    pub num_cells: f64,
    pub numeric_ratio: f64,
    pub popularity: f64,
}

impl InstanceProperties {
    pub fn value_of(&self, property: BucketProperty) -> f64 {
        match property {
            BucketProperty::NumCells => self.num_cells,
            BucketProperty::NumericRatio => self.numeric_ratio,
            BucketProperty::Popularity => self.popularity,
        }
    }
}

/// Default edges per property. The boundaries are declared here, not claimed
/// to match any published plot. Open-ended ranges end at infinity, rendered
/// as `inf` in reports.
pub fn default_edges(property: BucketProperty) -> Vec<f64> {
    match property {
        BucketProperty::NumCells => vec![0.0, 100.0, 250.0, 500.0, 1000.0, f64::INFINITY],
        BucketProperty::NumericRatio => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        BucketProperty::Popularity => {
            vec![0.0, 10.0, 100.0, 1_000.0, 10_000.0, 100_000.0, f64::INFINITY]
        }
    }
}

/// One bucket: `[lo, hi)` (the final bucket also includes its right edge),
/// mean F1 values over the tables that fell in it, and how many did. Empty
/// buckets carry no means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketPoint {
    pub bucket_lo: String,
    pub bucket_hi: String,
    pub keys_f1: Option<f64>,
    pub nonkeys_f1: Option<f64>,
    pub overall_f1: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSeries {
    pub property: BucketProperty,
    pub points: Vec<BucketPoint>,
}

fn format_edge(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Assigns each evaluated table to its half-open bucket and averages the
/// three F1 metrics per bucket (unweighted, like the macro average).
pub fn bucket_metrics(
    evaluations: &BTreeMap<String, TableEvaluation>,
    properties: &BTreeMap<String, InstanceProperties>,
    property: BucketProperty,
    edges: &[f64],
) -> Result<BucketSeries, AnalysisError> {
    if edges.len() < 2 {
        return Err(AnalysisError::TooFewEdges);
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::EdgesNotAscending);
    }
    let buckets = edges.len() - 1;
    let mut sums = vec![(0.0f64, 0.0f64, 0.0f64, 0usize); buckets];
    for (id, ev) in evaluations {
        let props = properties
            .get(id)
            .ok_or_else(|| AnalysisError::MissingProperties(id.clone()))?;
        let value = props.value_of(property);
        let idx = bucket_index(value, edges).ok_or(AnalysisError::ValueOutOfRange {
            id: id.clone(),
            property,
            value,
        })?;
        let slot = &mut sums[idx];
        slot.0 += ev.keys.f1;
        slot.1 += ev.non_keys.f1;
        slot.2 += ev.overall.f1;
        slot.3 += 1;
    }
    let points = sums
        .iter()
        .enumerate()
        .map(|(i, (keys, non_keys, overall, n))| BucketPoint {
            bucket_lo: format_edge(edges[i]),
            bucket_hi: format_edge(edges[i + 1]),
            keys_f1: (*n > 0).then(|| keys / *n as f64),
            nonkeys_f1: (*n > 0).then(|| non_keys / *n as f64),
            overall_f1: (*n > 0).then(|| overall / *n as f64),
            n: *n,
        })
        .collect();
    Ok(BucketSeries { property, points })
}

/// Index of the half-open bucket `[e_i, e_{i+1})` containing `value`; the
/// last bucket is closed on the right so the top edge belongs to it.
fn bucket_index(value: f64, edges: &[f64]) -> Option<usize> {
    let last = edges.len() - 2;
    (0..=last).find(|&i| {
        value >= edges[i] && (value < edges[i + 1] || (i == last && value == edges[i + 1]))
    })
}

/// Token totals for one method across a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCost {
    pub method: Method,
    pub request_count: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// True only when every underlying count came from the provider.
    pub provider_reported: bool,
}

/// Per-instance cost line for the breakdown section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCost {
    pub instance_id: String,
    pub method: Method,
    pub prompts: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub per_method: Vec<MethodCost>,
    pub per_instance: Vec<InstanceCost>,
}

/// Aggregates per-method token totals over one or more runs of the same
/// benchmark. Runs over different benchmarks cannot be merged into one
/// report.
pub fn cost_report(runs: &[(&RunManifest, &[GenerationRecord])]) -> Result<CostReport, AnalysisError> {
    if let Some(((first, _), rest)) = runs.split_first() {
        for (manifest, _) in rest {
            if manifest.benchmark_hash != first.benchmark_hash {
                return Err(AnalysisError::MixedBenchmarks(
                    first.benchmark_hash.clone(),
                    manifest.benchmark_hash.clone(),
                ));
            }
        }
    }
    let mut totals: BTreeMap<String, MethodCost> = BTreeMap::new();
    let mut per_instance = Vec::new();
    for (manifest, records) in runs {
        let entry = totals.entry(manifest.method.to_string()).or_insert(MethodCost {
            method: manifest.method,
            request_count: 0,
            input_tokens: 0,
            output_tokens: 0,
            provider_reported: true,
        });
        for record in records.iter() {
            entry.request_count += record.responses.len() as u64;
            entry.input_tokens += record.total_input_tokens;
            entry.output_tokens += record.total_output_tokens;
            if record.responses.iter().any(|r| !r.provider_reported) {
                entry.provider_reported = false;
            }
            per_instance.push(InstanceCost {
                instance_id: record.instance_id.clone(),
                method: record.method,
                prompts: record.prompts.len() as u64,
                input_tokens: record.total_input_tokens,
                output_tokens: record.total_output_tokens,
            });
        }
    }
    let order = |m: Method| match m {
        Method::FullTable => 0,
        Method::RowByRow => 1,
        Method::CellByCell => 2,
    };
    let mut per_method: Vec<MethodCost> = totals.into_values().collect();
    per_method.sort_by_key(|c| order(c.method));
    Ok(CostReport { per_method, per_instance })
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Writes a bucket series with a deterministic column order. CSV empty
/// buckets leave the F1 cells blank; JSON uses null.
pub fn emit_bucket_series(
    series: &BucketSeries,
    path: &Path,
    format: ReportFormat,
) -> Result<(), AnalysisError> {
    let io_err = |source: std::io::Error| AnalysisError::Io { path: path.display().to_string(), source };
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(series).expect("series serializes");
            text.push('\n');
            std::fs::write(path, text).map_err(io_err)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)
                .map_err(|e| AnalysisError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })?;
            w.write_record(["bucket_lo", "bucket_hi", "keys_f1", "nonkeys_f1", "overall_f1", "n"])
                .map_err(|e| AnalysisError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })?;
            for p in &series.points {
                let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                w.write_record([
                    p.bucket_lo.clone(),
                    p.bucket_hi.clone(),
                    fmt(p.keys_f1),
                    fmt(p.nonkeys_f1),
                    fmt(p.overall_f1),
                    p.n.to_string(),
                ])
                .map_err(|e| AnalysisError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })?;
            }
            w.flush().map_err(io_err)
        }
    }
}

/// Reads back a bucket series emitted as JSON.
pub fn read_bucket_series(path: &Path) -> Result<BucketSeries, AnalysisError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| AnalysisError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text)
        .map_err(|e| AnalysisError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })
}

/// Writes a cost report: per-method rows in CSV, the full structure in JSON.
pub fn emit_cost_report(
    report: &CostReport,
    path: &Path,
    format: ReportFormat,
) -> Result<(), AnalysisError> {
    let io_err = |source: std::io::Error| AnalysisError::Io { path: path.display().to_string(), source };
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            std::fs::write(path, text).map_err(io_err)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)
                .map_err(|e| AnalysisError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })?;
            w.write_record(["method", "request_count", "input_tokens", "output_tokens", "provider_reported"])
                .map_err(|e| AnalysisError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })?;
            for m in &report.per_method {
                w.write_record([
                    m.method.to_string(),
                    m.request_count.to_string(),
                    m.input_tokens.to_string(),
                    m.output_tokens.to_string(),
                    m.provider_reported.to_string(),
                ])
                .map_err(|e| AnalysisError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })?;
            }
            w.flush().map_err(io_err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{MetricTriple, TableEvaluation};

    fn eval_with_f1(f1: f64) -> TableEvaluation {
        let triple = MetricTriple { precision: f1, recall: f1, f1 };
        TableEvaluation {
            keys: triple,
            non_keys: triple,
            overall: triple,
            phi: 0,
            psi: 0,
            tau: 0,
            pred_rows: 0,
            gold_rows: 0,
            pred_non_key_cells: 0,
            gold_non_key_cells: 0,
            pred_cells: 0,
            gold_cells: 0,
        }
    }

    fn props(num_cells: f64) -> InstanceProperties {
        InstanceProperties { num_cells, numeric_ratio: 0.5, popularity: 100.0 }
    }

    #[test]
    fn buckets_split_by_value() {
        let mut evals = BTreeMap::new();
        let mut properties = BTreeMap::new();
        evals.insert("small".to_string(), eval_with_f1(1.0));
        properties.insert("small".to_string(), props(20.0));
        evals.insert("large".to_string(), eval_with_f1(0.0));
        properties.insert("large".to_string(), props(900.0));
        let series = bucket_metrics(
            &evals,
            &properties,
            BucketProperty::NumCells,
            &[0.0, 500.0, 1000.0],
        )
        .unwrap();
        assert_eq!(series.points.len(), 2);
        assert_eq!(series.points[0].overall_f1, Some(1.0));
        assert_eq!(series.points[0].n, 1);
        assert_eq!(series.points[1].overall_f1, Some(0.0));
        assert_eq!(series.points[1].n, 1);
    }

    #[test]
    fn single_bucket_mean_equals_macro_mean() {
        let mut evals = BTreeMap::new();
        let mut properties = BTreeMap::new();
        for (i, f1) in [1.0, 0.5, 0.25].iter().enumerate() {
            evals.insert(format!("t{i}"), eval_with_f1(*f1));
            properties.insert(format!("t{i}"), props(10.0 * (i as f64 + 1.0)));
        }
        let series = bucket_metrics(
            &evals,
            &properties,
            BucketProperty::NumCells,
            &[0.0, f64::INFINITY],
        )
        .unwrap();
        let macro_avg = crate::metrics::aggregate(evals).unwrap();
        assert_eq!(series.points.len(), 1);
        assert_eq!(series.points[0].overall_f1, Some(macro_avg.macro_overall.f1));
        assert_eq!(series.points[0].keys_f1, Some(macro_avg.macro_keys.f1));
        assert_eq!(series.points[0].n, 3);
    }

    #[test]
    fn partition_covers_every_table() {
        let mut evals = BTreeMap::new();
        let mut properties = BTreeMap::new();
        for i in 0..10 {
            evals.insert(format!("t{i}"), eval_with_f1(0.5));
            properties.insert(format!("t{i}"), props(i as f64 * 120.0));
        }
        let edges = default_edges(BucketProperty::NumCells);
        let series = bucket_metrics(&evals, &properties, BucketProperty::NumCells, &edges).unwrap();
        let total: usize = series.points.iter().map(|p| p.n).sum();
        assert_eq!(total, 10);
    }

    #[test]
    fn ratio_top_edge_is_inclusive() {
        let mut evals = BTreeMap::new();
        let mut properties = BTreeMap::new();
        evals.insert("all_numeric".to_string(), eval_with_f1(1.0));
        properties.insert(
            "all_numeric".to_string(),
            InstanceProperties { num_cells: 10.0, numeric_ratio: 1.0, popularity: 1.0 },
        );
        let edges = default_edges(BucketProperty::NumericRatio);
        let series =
            bucket_metrics(&evals, &properties, BucketProperty::NumericRatio, &edges).unwrap();
        assert_eq!(series.points.last().unwrap().n, 1);
    }

    #[test]
    fn bad_edges_are_rejected() {
        let evals = BTreeMap::new();
        let properties = BTreeMap::new();
        assert!(matches!(
            bucket_metrics(&evals, &properties, BucketProperty::NumCells, &[1.0, 1.0]),
            Err(AnalysisError::EdgesNotAscending)
        ));
        assert!(matches!(
            bucket_metrics(&evals, &properties, BucketProperty::NumCells, &[1.0]),
            Err(AnalysisError::TooFewEdges)
        ));
    }

    #[test]
    fn emitted_series_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut evals = BTreeMap::new();
        let mut properties = BTreeMap::new();
        evals.insert("t".to_string(), eval_with_f1(0.75));
        properties.insert("t".to_string(), props(42.0));
        let edges = default_edges(BucketProperty::NumCells);
        let series = bucket_metrics(&evals, &properties, BucketProperty::NumCells, &edges).unwrap();

        let json_path = dir.path().join("s.json");
        emit_bucket_series(&series, &json_path, ReportFormat::Json).unwrap();
        assert_eq!(read_bucket_series(&json_path).unwrap(), series);

        let csv_path = dir.path().join("s.csv");
        emit_bucket_series(&series, &csv_path, ReportFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("bucket_lo,bucket_hi,keys_f1,nonkeys_f1,overall_f1,n\n"));
        assert!(text.contains("1000,inf"));
    }

    #[test]
    fn empty_series_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let series = BucketSeries { property: BucketProperty::Popularity, points: vec![] };
        let path = dir.path().join("empty.csv");
        emit_bucket_series(&series, &path, ReportFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "bucket_lo,bucket_hi,keys_f1,nonkeys_f1,overall_f1,n\n");
    }
}
