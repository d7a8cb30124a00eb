//! Evaluation report files: JSON for downstream tooling and CSV with one row
//! per instance plus a trailing macro row. Metric columns follow the
//! recall / precision / F1 grouping for keys, non-keys, and overall.

use crate::metrics::BenchmarkEvaluation;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} is not a valid evaluation report: {source}")]
    Format { path: String, source: serde_json::Error },
}

pub const CSV_HEADER: [&str; 19] = [
    "id",
    "keys_recall",
    "keys_precision",
    "keys_f1",
    "nonkeys_recall",
    "nonkeys_precision",
    "nonkeys_f1",
    "overall_recall",
    "overall_precision",
    "overall_f1",
    "phi",
    "psi",
    "tau",
    "pred_rows",
    "gold_rows",
    "pred_nonkey_cells",
    "gold_nonkey_cells",
    "pred_cells",
    "gold_cells",
];

/// Serializable wrapper for a full evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub evaluation: BenchmarkEvaluation,
}

pub fn write_report_json(report: &EvaluationReport, path: &Path) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

pub fn read_report_json(path: &Path) -> Result<EvaluationReport, ReportError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text)
        .map_err(|source| ReportError::Format { path: path.display().to_string(), source })
}

pub fn write_report_csv(report: &EvaluationReport, path: &Path) -> Result<(), ReportError> {
    let as_io = |e: csv::Error| ReportError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(as_io)?;
    w.write_record(CSV_HEADER).map_err(as_io)?;
    let ev = &report.evaluation;
    for (id, t) in &ev.per_table {
        w.write_record([
            id.clone(),
            t.keys.recall.to_string(),
            t.keys.precision.to_string(),
            t.keys.f1.to_string(),
            t.non_keys.recall.to_string(),
            t.non_keys.precision.to_string(),
            t.non_keys.f1.to_string(),
            t.overall.recall.to_string(),
            t.overall.precision.to_string(),
            t.overall.f1.to_string(),
            t.phi.to_string(),
            t.psi.to_string(),
            t.tau.to_string(),
            t.pred_rows.to_string(),
            t.gold_rows.to_string(),
            t.pred_non_key_cells.to_string(),
            t.gold_non_key_cells.to_string(),
            t.pred_cells.to_string(),
            t.gold_cells.to_string(),
        ])
        .map_err(as_io)?;
    }
    w.write_record([
        "macro".to_string(),
        ev.macro_keys.recall.to_string(),
        ev.macro_keys.precision.to_string(),
        ev.macro_keys.f1.to_string(),
        ev.macro_non_keys.recall.to_string(),
        ev.macro_non_keys.precision.to_string(),
        ev.macro_non_keys.f1.to_string(),
        ev.macro_overall.recall.to_string(),
        ev.macro_overall.precision.to_string(),
        ev.macro_overall.f1.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ])
    .map_err(as_io)?;
    w.flush()
        .map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{aggregate, MetricTriple, TableEvaluation};
    use std::collections::BTreeMap;

    fn evaluation() -> BenchmarkEvaluation {
        let triple = MetricTriple { precision: 1.0, recall: 0.5, f1: 2.0 / 3.0 };
        let table = TableEvaluation {
            keys: triple,
            non_keys: triple,
            overall: triple,
            phi: 2,
            psi: 4,
            tau: 6,
            pred_rows: 2,
            gold_rows: 4,
            pred_non_key_cells: 4,
            gold_non_key_cells: 8,
            pred_cells: 6,
            gold_cells: 12,
        };
        let mut per_table = BTreeMap::new();
        per_table.insert("inst".to_string(), table);
        aggregate(per_table).unwrap()
    }

    #[test]
    fn json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = EvaluationReport { evaluation: evaluation() };
        write_report_json(&report, &path).unwrap();
        assert_eq!(read_report_json(&path).unwrap(), report);
    }

    #[test]
    fn csv_has_instance_and_macro_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report_csv(&EvaluationReport { evaluation: evaluation() }, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[1].starts_with("inst,0.5,1,"));
        assert!(lines[2].starts_with("macro,0.5,1,"));
    }
}
