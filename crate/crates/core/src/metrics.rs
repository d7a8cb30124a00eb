//! Key-aligned table evaluation.
//!
//! Generated rows are aligned to gold rows by normalized key tuples, then
//! three count families are taken: phi (aligned key rows), psi (correct
//! non-key cells), and tau (correct cells overall). Each yields a
//! precision/recall/F1 triple; benchmark-level numbers are unweighted means
//! over tables.
//!
//! Precision denominators deliberately cover ALL generated rows and cells,
//! aligned or not; recall denominators cover all gold rows and cells.

use crate::benchmark::BenchmarkInstance;
use crate::matching::{cells_match, MatchRule};
use crate::table::{KeyTuple, RelationalTable};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("generated and gold tables have different column schemas")]
    SchemaMismatch,
    #[error("gold table violates key uniqueness: {0}")]
    GoldKeysNotUnique(String),
    #[error("cannot aggregate an empty evaluation set")]
    EmptyAggregate,
}

/// Injective mapping from generated-row index to gold-row index, plus the
/// leftovers on both sides. A pair exists iff the full normalized key tuples
/// are equal; among generated rows sharing a tuple only the first aligns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gold: Vec<usize>,
}

/// Evaluation knobs beyond the cell-matching rule itself.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub rule: MatchRule,
    /// When true (the default), key cells of aligned rows are re-checked with
    /// `cells_match` before counting toward tau; when false they count as
    /// correct by virtue of alignment.
    pub tau_fuzzy_keys: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { rule: MatchRule::default(), tau_fuzzy_keys: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricTriple {
    pub const ZERO: MetricTriple = MetricTriple { precision: 0.0, recall: 0.0, f1: 0.0 };

    /// Builds the triple from a hit count and the two denominators. A zero
    /// denominator yields 0 for that component, and F1 is 0 when P + R = 0,
    /// keeping every metric total for aggregation.
    pub fn from_counts(hits: u64, pred_denom: u64, gold_denom: u64) -> Self {
        let precision = if pred_denom == 0 { 0.0 } else { hits as f64 / pred_denom as f64 };
        let recall = if gold_denom == 0 { 0.0 } else { hits as f64 / gold_denom as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

/// Full evaluation of one generated table against its gold table: the three
/// metric triples, the raw counts behind them, and every denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEvaluation {
    pub keys: MetricTriple,
    pub non_keys: MetricTriple,
    pub overall: MetricTriple,
    pub phi: u64,
    pub psi: u64,
    pub tau: u64,
    pub pred_rows: u64,
    pub gold_rows: u64,
    pub pred_non_key_cells: u64,
    pub gold_non_key_cells: u64,
    pub pred_cells: u64,
    pub gold_cells: u64,
}

/// Per-instance evaluations plus macro (unweighted mean) triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEvaluation {
    pub per_table: BTreeMap<String, TableEvaluation>,
    pub macro_keys: MetricTriple,
    pub macro_non_keys: MetricTriple,
    pub macro_overall: MetricTriple,
}

/// Aligns generated rows to gold rows by normalized key tuple.
///
/// Gold key uniqueness is a precondition and is re-checked here; generated
/// rows with any null key cell never align.
pub fn align_rows(pred: &RelationalTable, gold: &RelationalTable) -> Result<Alignment, MetricsError> {
    if !pred.same_schema(gold) {
        return Err(MetricsError::SchemaMismatch);
    }
    let mut gold_by_key: HashMap<Vec<String>, usize> = HashMap::new();
    for g in 0..gold.num_rows() {
        match gold.key_tuple(g) {
            KeyTuple::Key(k) => {
                if gold_by_key.insert(k.clone(), g).is_some() {
                    return Err(MetricsError::GoldKeysNotUnique(format!("{k:?}")));
                }
            }
            KeyTuple::Unmatchable => {
                return Err(MetricsError::GoldKeysNotUnique("gold row has a null key cell".to_string()))
            }
        }
    }

    let mut pairs = Vec::new();
    let mut used_gold = vec![false; gold.num_rows()];
    let mut unmatched_pred = Vec::new();
    for p in 0..pred.num_rows() {
        let aligned = match pred.key_tuple(p) {
            KeyTuple::Key(k) => match gold_by_key.get(&k) {
                Some(&g) if !used_gold[g] => {
                    used_gold[g] = true;
                    pairs.push((p, g));
                    true
                }
                _ => false,
            },
            KeyTuple::Unmatchable => false,
        };
        if !aligned {
            unmatched_pred.push(p);
        }
    }
    let unmatched_gold = (0..gold.num_rows()).filter(|&g| !used_gold[g]).collect();
    Ok(Alignment { pairs, unmatched_pred, unmatched_gold })
}

/// Keys metrics: phi aligned rows over generated and gold row counts. A row
/// with a composite key counts once, not per key cell.
pub fn evaluate_keys(
    alignment: &Alignment,
    pred: &RelationalTable,
    gold: &RelationalTable,
) -> (MetricTriple, u64) {
    let phi = alignment.pairs.len() as u64;
    (MetricTriple::from_counts(phi, pred.num_rows() as u64, gold.num_rows() as u64), phi)
}

/// Non-keys metrics: psi counts matching non-key cells of aligned rows; the
/// precision denominator is every non-key cell of every generated row.
pub fn evaluate_non_keys(
    alignment: &Alignment,
    pred: &RelationalTable,
    gold: &RelationalTable,
    rule: &MatchRule,
) -> (MetricTriple, u64) {
    let non_key = pred.non_key_indices();
    let mut psi = 0u64;
    for &(p, g) in &alignment.pairs {
        for &c in &non_key {
            if cells_match(pred.cell(p, c), gold.cell(g, c), rule) {
                psi += 1;
            }
        }
    }
    let pred_denom = (pred.num_rows() * non_key.len()) as u64;
    let gold_denom = (gold.num_rows() * non_key.len()) as u64;
    (MetricTriple::from_counts(psi, pred_denom, gold_denom), psi)
}

/// Overall metrics: tau counts matching cells of aligned rows across ALL
/// columns, key cells included individually.
pub fn evaluate_table(
    alignment: &Alignment,
    pred: &RelationalTable,
    gold: &RelationalTable,
    options: &EvalOptions,
) -> (MetricTriple, u64) {
    let key_indices = pred.key_indices();
    let mut tau = 0u64;
    for &(p, g) in &alignment.pairs {
        for c in 0..pred.num_cols() {
            let is_key = key_indices.contains(&c);
            let correct = if is_key && !options.tau_fuzzy_keys {
                true // alignment already certified key equality
            } else {
                cells_match(pred.cell(p, c), gold.cell(g, c), &options.rule)
            };
            if correct {
                tau += 1;
            }
        }
    }
    let pred_denom = (pred.num_rows() * pred.num_cols()) as u64;
    let gold_denom = (gold.num_rows() * gold.num_cols()) as u64;
    (MetricTriple::from_counts(tau, pred_denom, gold_denom), tau)
}

/// Evaluates one generated table against a benchmark instance.
///
/// When `exclude_example_row` is set (the example-row scenario), the gold row
/// with that key tuple and any generated row with it are dropped from both
/// sides before anything is counted. An unparseable generation arrives here
/// as an empty table and scores 0 across the board.
pub fn evaluate_instance(
    pred: &RelationalTable,
    instance: &BenchmarkInstance,
    options: &EvalOptions,
    exclude_example_row: Option<&[String]>,
) -> Result<TableEvaluation, MetricsError> {
    let (pred_t, gold_t) = match exclude_example_row {
        Some(key) => (pred.without_key(key), instance.table.without_key(key)),
        None => (pred.clone(), instance.table.clone()),
    };
    let alignment = align_rows(&pred_t, &gold_t)?;
    let (keys, phi) = evaluate_keys(&alignment, &pred_t, &gold_t);
    let (non_keys, psi) = evaluate_non_keys(&alignment, &pred_t, &gold_t, &options.rule);
    let (overall, tau) = evaluate_table(&alignment, &pred_t, &gold_t, options);
    let non_key_count = pred_t.non_key_indices().len() as u64;
    Ok(TableEvaluation {
        keys,
        non_keys,
        overall,
        phi,
        psi,
        tau,
        pred_rows: pred_t.num_rows() as u64,
        gold_rows: gold_t.num_rows() as u64,
        pred_non_key_cells: pred_t.num_rows() as u64 * non_key_count,
        gold_non_key_cells: gold_t.num_rows() as u64 * non_key_count,
        pred_cells: (pred_t.num_rows() * pred_t.num_cols()) as u64,
        gold_cells: (gold_t.num_rows() * gold_t.num_cols()) as u64,
    })
}

/// Macro-averages per-table evaluations: the unweighted mean of each of the
/// nine metrics across tables.
pub fn aggregate(
    per_table: BTreeMap<String, TableEvaluation>,
) -> Result<BenchmarkEvaluation, MetricsError> {
    if per_table.is_empty() {
        return Err(MetricsError::EmptyAggregate);
    }
    let n = per_table.len() as f64;
    let mut sums = [0.0f64; 9];
    for ev in per_table.values() {
        for (i, t) in [&ev.keys, &ev.non_keys, &ev.overall].into_iter().enumerate() {
            sums[i * 3] += t.precision;
            sums[i * 3 + 1] += t.recall;
            sums[i * 3 + 2] += t.f1;
        }
    }
    let triple = |base: usize| MetricTriple {
        precision: sums[base] / n,
        recall: sums[base + 1] / n,
        f1: sums[base + 2] / n,
    };
    Ok(BenchmarkEvaluation {
        macro_keys: triple(0),
        macro_non_keys: triple(3),
        macro_overall: triple(6),
        per_table,
    })
}
