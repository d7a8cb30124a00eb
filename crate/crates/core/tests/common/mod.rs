//! Shared test support: an independent brute-force metrics reference and a
//! seeded random table-pair generator.
#![allow(dead_code)] // each test target compiles its own copy of this module
//!
//! The reference enumerates key matches by direct scanning and computes every
//! metric straight from the count definitions. It shares only the cell-match
//! predicate with the implementation; alignment, counting, normalization,
//! and the formulas are re-derived here.

use rand::prelude::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabgen::matching::{cells_match, MatchRule};
use tabgen::table::{CellValue, ColumnSpec, RelationalTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefEvaluation {
    pub phi: u64,
    pub psi: u64,
    pub tau: u64,
    pub keys: RefTriple,
    pub non_keys: RefTriple,
    pub overall: RefTriple,
}

fn ref_normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn ref_key_tuple(row: &[CellValue], key_cols: &[usize]) -> Option<Vec<String>> {
    let mut out = Vec::new();
    for &c in key_cols {
        let Some(v) = &row[c] else { return None };
        out.push(ref_normalize(v));
    }
    Some(out)
}

fn ref_triple(hits: u64, pred_denom: u64, gold_denom: u64) -> RefTriple {
    let precision = if pred_denom == 0 { 0.0 } else { hits as f64 / pred_denom as f64 };
    let recall = if gold_denom == 0 { 0.0 } else { hits as f64 / gold_denom as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RefTriple { precision, recall, f1 }
}

/// Brute-force evaluation: for each generated row, scan every gold row for a
/// normalized key-tuple match (first generated occurrence claims the gold
/// row), then count matching cells directly.
pub fn reference_evaluate(
    pred: &RelationalTable,
    gold: &RelationalTable,
    rule: &MatchRule,
    tau_fuzzy_keys: bool,
) -> RefEvaluation {
    let key_cols: Vec<usize> = gold
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_key)
        .map(|(i, _)| i)
        .collect();
    let non_key_cols: Vec<usize> = gold
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_key)
        .map(|(i, _)| i)
        .collect();

    let mut gold_taken = vec![false; gold.num_rows()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for p in 0..pred.num_rows() {
        let Some(pred_key) = ref_key_tuple(&pred.rows()[p], &key_cols) else {
            continue;
        };
        for (g, taken) in gold_taken.iter_mut().enumerate() {
            if *taken {
                continue;
            }
            let gold_key = ref_key_tuple(&gold.rows()[g], &key_cols).expect("gold keys non-null");
            if gold_key == pred_key {
                *taken = true;
                pairs.push((p, g));
                break;
            }
        }
    }

    let phi = pairs.len() as u64;
    let mut psi = 0u64;
    let mut tau = 0u64;
    for &(p, g) in &pairs {
        for &c in &non_key_cols {
            if cells_match(pred.cell(p, c), gold.cell(g, c), rule) {
                psi += 1;
                tau += 1;
            }
        }
        for &c in &key_cols {
            let hit = if tau_fuzzy_keys {
                cells_match(pred.cell(p, c), gold.cell(g, c), rule)
            } else {
                true
            };
            if hit {
                tau += 1;
            }
        }
    }

    let pred_rows = pred.num_rows() as u64;
    let gold_rows = gold.num_rows() as u64;
    let nk = non_key_cols.len() as u64;
    let cols = gold.num_cols() as u64;
    RefEvaluation {
        phi,
        psi,
        tau,
        keys: ref_triple(phi, pred_rows, gold_rows),
        non_keys: ref_triple(psi, pred_rows * nk, gold_rows * nk),
        overall: ref_triple(tau, pred_rows * cols, gold_rows * cols),
    }
}

const KEY_POOL: [&str; 10] =
    ["k1", "K1!", "a2", "b-3", "c4", "delta", "Echo 5", "1987", "2000", "zz"];

const VALUE_POOL: [Option<&str>; 14] = [
    Some("Birmingham"),
    Some("birmingham "),
    Some("100"),
    Some("100.05"),
    Some("100.2"),
    Some("N/A"),
    Some(""),
    None,
    Some("2014-05-16"),
    Some("16th, May, 2014"),
    Some("3rd"),
    Some("x"),
    Some("0"),
    Some("1,234.5"),
];

/// A random (generated, gold) table pair sharing one schema: at most 6 rows,
/// 4 columns, 2 key columns. Gold satisfies the gold invariants; the
/// generated side may carry duplicate keys, null keys, and near-miss values.
pub fn random_table_pair(rng: &mut ChaCha8Rng) -> (RelationalTable, RelationalTable) {
    let num_cols = rng.random_range(2..=4usize);
    let num_keys = rng.random_range(1..=2usize.min(num_cols));
    let columns: Vec<ColumnSpec> = (0..num_cols)
        .map(|c| ColumnSpec {
            name: format!("c{c}"),
            is_key: c < num_keys,
            is_numeric: rng.random_bool(0.4),
        })
        .collect();

    let gold_rows_target = rng.random_range(0..=6usize);
    let mut gold_rows: Vec<Vec<CellValue>> = Vec::new();
    let mut seen_keys: Vec<Vec<String>> = Vec::new();
    let mut attempts = 0;
    while gold_rows.len() < gold_rows_target && attempts < 64 {
        attempts += 1;
        let mut row: Vec<CellValue> = Vec::with_capacity(num_cols);
        for c in 0..num_cols {
            if c < num_keys {
                row.push(Some(KEY_POOL.choose(rng).unwrap().to_string()));
            } else {
                row.push(VALUE_POOL.choose(rng).unwrap().map(|s| s.to_string()));
            }
        }
        let key: Vec<String> = (0..num_keys)
            .map(|c| ref_normalize(row[c].as_deref().unwrap()))
            .collect();
        if seen_keys.contains(&key) {
            continue;
        }
        seen_keys.push(key);
        gold_rows.push(row);
    }
    let gold = RelationalTable::new(columns.clone(), gold_rows).unwrap();

    let pred_rows_target = rng.random_range(0..=6usize);
    let mut pred_rows: Vec<Vec<CellValue>> = Vec::new();
    for _ in 0..pred_rows_target {
        let mut row: Vec<CellValue> = Vec::with_capacity(num_cols);
        // bias toward reusing gold keys so alignments actually happen
        let copy_from = if gold.num_rows() > 0 && rng.random_bool(0.6) {
            Some(rng.random_range(0..gold.num_rows()))
        } else {
            None
        };
        for c in 0..num_cols {
            if c < num_keys {
                let v: CellValue = match copy_from {
                    Some(g) if rng.random_bool(0.9) => gold.rows()[g][c].clone(),
                    _ => {
                        if rng.random_bool(0.1) {
                            None // null key cell: unmatchable
                        } else {
                            Some(KEY_POOL.choose(rng).unwrap().to_string())
                        }
                    }
                };
                row.push(v);
            } else {
                let v: CellValue = match copy_from {
                    Some(g) if rng.random_bool(0.5) => gold.rows()[g][c].clone(),
                    _ => VALUE_POOL.choose(rng).unwrap().map(|s| s.to_string()),
                };
                row.push(v);
            }
        }
        pred_rows.push(row);
    }
    let pred = RelationalTable::new(columns, pred_rows).unwrap();
    (pred, gold)
}

/// Seeded RNG for reproducible randomized tests.
pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
