//! Relational table model: ordered columns with key/numeric flags and rows of
//! nullable text cells.
//!
//! Cells are stored as raw text exactly as read; all typing (number/date) is
//! inferred at match time by the matching module, never at load time. Row
//! order carries no semantics anywhere in the system: alignment is key-based.

use crate::matching::normalize_for_key;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A nullable cell value. `None` is the explicit null marker.
pub type CellValue = Option<String>;

/// One table row, cell per column in schema order.
pub type Row = Vec<CellValue>;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table has no columns")]
    NoColumns,
    #[error("column name is empty")]
    EmptyColumnName,
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("table declares no key columns")]
    NoKeyColumns,
    #[error("row {row} has {got} cells, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("row {row} has a null key cell in column {column:?}")]
    NullKeyCell { row: usize, column: String },
    #[error("rows {first} and {second} share the key tuple {key:?} after normalization")]
    DuplicateKeyTuple { first: usize, second: usize, key: Vec<String> },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
}

/// A column declaration: name plus key and numeric flags.
///
/// `is_numeric` marks columns holding numbers or dates; it feeds the
/// numeric-ratio statistic only and has no effect on matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub is_key: bool,
    pub is_numeric: bool,
}

impl ColumnSpec {
    pub fn key(name: &str, is_numeric: bool) -> Self {
        Self { name: name.to_string(), is_key: true, is_numeric }
    }

    pub fn non_key(name: &str, is_numeric: bool) -> Self {
        Self { name: name.to_string(), is_key: false, is_numeric }
    }
}

/// The normalized key-cell values of a row, ordered by key-column schema
/// order. A generated row with any null key cell is `Unmatchable` and never
/// aligns with anything.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum KeyTuple {
    Key(Vec<String>),
    Unmatchable,
}

impl KeyTuple {
    pub fn as_key(&self) -> Option<&[String]> {
        match self {
            KeyTuple::Key(k) => Some(k),
            KeyTuple::Unmatchable => None,
        }
    }
}

/// A relational table: ordered columns and rows of nullable text cells.
///
/// Every row has exactly one (possibly null) cell per column. Gold-table
/// invariants (non-null keys, unique key tuples) are checked separately by
/// [`RelationalTable::validate_gold`], because generated tables are allowed
/// to violate them.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalTable {
    columns: Vec<ColumnSpec>,
    rows: Vec<Row>,
}

impl RelationalTable {
    pub fn new(columns: Vec<ColumnSpec>, rows: Vec<Row>) -> Result<Self, TableError> {
        if columns.is_empty() {
            return Err(TableError::NoColumns);
        }
        for col in &columns {
            if col.name.is_empty() {
                return Err(TableError::EmptyColumnName);
            }
        }
        for (i, a) in columns.iter().enumerate() {
            if columns[i + 1..].iter().any(|b| b.name == a.name) {
                return Err(TableError::DuplicateColumn(a.name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RowWidth { row: i, got: row.len(), expected: columns.len() });
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn key_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_key)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn non_key_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_key)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn key_column_names(&self) -> Vec<String> {
        self.key_indices().iter().map(|&i| self.columns[i].name.clone()).collect()
    }

    pub fn non_key_column_names(&self) -> Vec<String> {
        self.non_key_indices().iter().map(|&i| self.columns[i].name.clone()).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Two tables share a schema when their column sequences are identical.
    pub fn same_schema(&self, other: &RelationalTable) -> bool {
        self.columns == other.columns
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.rows[row][col].as_deref()
    }

    /// The key tuple of a row: normalized key-cell values in key-column
    /// schema order. Any null key cell makes the row unmatchable.
    pub fn key_tuple(&self, row: usize) -> KeyTuple {
        let mut parts = Vec::new();
        for idx in self.key_indices() {
            match &self.rows[row][idx] {
                Some(v) => parts.push(normalize_for_key(v)),
                None => return KeyTuple::Unmatchable,
            }
        }
        KeyTuple::Key(parts)
    }

    /// The key tuple of a gold row, where a null key cell is an error.
    pub fn gold_key_tuple(&self, row: usize) -> Result<Vec<String>, TableError> {
        let mut parts = Vec::new();
        for idx in self.key_indices() {
            match &self.rows[row][idx] {
                Some(v) => parts.push(normalize_for_key(v)),
                None => {
                    return Err(TableError::NullKeyCell {
                        row,
                        column: self.columns[idx].name.clone(),
                    })
                }
            }
        }
        Ok(parts)
    }

    /// The raw (unnormalized) key-cell texts of a row, in key schema order.
    /// Errors on null key cells; used to seed oracle-keys runs from gold.
    pub fn raw_key_values(&self, row: usize) -> Result<Vec<String>, TableError> {
        let mut parts = Vec::new();
        for idx in self.key_indices() {
            match &self.rows[row][idx] {
                Some(v) => parts.push(v.clone()),
                None => {
                    return Err(TableError::NullKeyCell {
                        row,
                        column: self.columns[idx].name.clone(),
                    })
                }
            }
        }
        Ok(parts)
    }

    /// Checks the gold-table invariants: at least one key column, no null key
    /// cells, and key tuples unique after normalization (normalized
    /// uniqueness is what makes key-based alignment deterministic).
    pub fn validate_gold(&self) -> Result<(), TableError> {
        if self.key_indices().is_empty() {
            return Err(TableError::NoKeyColumns);
        }
        let mut seen: std::collections::HashMap<Vec<String>, usize> = std::collections::HashMap::new();
        for row in 0..self.rows.len() {
            let key = self.gold_key_tuple(row)?;
            if let Some(&first) = seen.get(&key) {
                return Err(TableError::DuplicateKeyTuple { first, second: row, key });
            }
            seen.insert(key, row);
        }
        Ok(())
    }

    /// A copy of this table without the rows whose key tuple equals `key`.
    pub fn without_key(&self, key: &[String]) -> RelationalTable {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| self.key_tuple(*i).as_key() != Some(key))
            .map(|(_, r)| r.clone())
            .collect();
        RelationalTable { columns: self.columns.clone(), rows }
    }
}

// Serialized as {"columns": [...], "rows": [...]}, the same shape the
// benchmark format uses; deserialization re-validates row widths.
#[derive(Serialize, Deserialize)]
struct TableData {
    columns: Vec<ColumnSpec>,
    rows: Vec<Row>,
}

impl Serialize for RelationalTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TableData { columns: self.columns.clone(), rows: self.rows.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RelationalTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let data = TableData::deserialize(deserializer)?;
        RelationalTable::new(data.columns, data.rows).map_err(serde::de::Error::custom)
    }
}

/// Size and content statistics for one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub num_rows: usize,
    pub num_cols: usize,
    pub num_cells: usize,
    pub numeric_ratio: f64,
    pub token_estimate: usize,
}

/// Computes table statistics. The token estimate runs the gateway's local
/// token counter over the description plus the table serialized in the same
/// list-of-objects JSON shape models are asked to produce.
pub fn table_stats(table: &RelationalTable, description: &str) -> TableStats {
    let num_rows = table.num_rows();
    let num_cols = table.num_cols();
    let numeric_cols = table.columns.iter().filter(|c| c.is_numeric).count();
    let numeric_ratio = if num_cols == 0 { 0.0 } else { numeric_cols as f64 / num_cols as f64 };
    let serialized = serialize_rows_as_json(table);
    let token_estimate =
        crate::gateway::count_tokens(description) + crate::gateway::count_tokens(&serialized);
    TableStats {
        num_rows,
        num_cols,
        num_cells: num_rows * num_cols,
        numeric_ratio,
        token_estimate,
    }
}

/// Renders the table as a compact JSON array of objects in schema order.
pub fn serialize_rows_as_json(table: &RelationalTable) -> String {
    let rows: Vec<serde_json::Value> = table
        .rows()
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            for (col, cell) in table.columns().iter().zip(row) {
                let v = match cell {
                    Some(s) => serde_json::Value::String(s.clone()),
                    None => serde_json::Value::Null,
                };
                obj.insert(col.name.clone(), v);
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(rows).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(s: &str) -> CellValue {
        Some(s.to_string())
    }

    pub(crate) fn small_table() -> RelationalTable {
        RelationalTable::new(
            vec![
                ColumnSpec::key("year", true),
                ColumnSpec::key("competition", false),
                ColumnSpec::non_key("venue", false),
                ColumnSpec::non_key("position", false),
            ],
            vec![
                vec![cell("1987"), cell("European Junior"), cell("Birmingham"), cell("3rd")],
                vec![cell("1987"), cell("World Championships"), cell("Rome"), cell("10th")],
            ],
        )
        .unwrap()
    }

    #[test]
    fn key_tuple_is_normalized_and_schema_ordered() {
        let t = small_table();
        assert_eq!(
            t.key_tuple(0),
            KeyTuple::Key(vec!["1987".to_string(), "europeanjunior".to_string()])
        );
    }

    #[test]
    fn key_tuple_order_follows_schema_declaration() {
        // Same data, key columns declared in the opposite order.
        let t = RelationalTable::new(
            vec![
                ColumnSpec::key("competition", false),
                ColumnSpec::key("year", true),
                ColumnSpec::non_key("venue", false),
            ],
            vec![vec![cell("European Junior"), cell("1987"), cell("Birmingham")]],
        )
        .unwrap();
        assert_eq!(
            t.key_tuple(0),
            KeyTuple::Key(vec!["europeanjunior".to_string(), "1987".to_string()])
        );
    }

    #[test]
    fn single_key_column_yields_one_tuple_element() {
        let t = RelationalTable::new(
            vec![ColumnSpec::key("year", true), ColumnSpec::non_key("venue", false)],
            vec![vec![cell("1987"), cell("Birmingham")]],
        )
        .unwrap();
        assert_eq!(t.key_tuple(0), KeyTuple::Key(vec!["1987".to_string()]));
    }

    #[test]
    fn null_key_cell_is_unmatchable_or_error() {
        let t = RelationalTable::new(
            vec![ColumnSpec::key("year", true), ColumnSpec::non_key("venue", false)],
            vec![vec![None, cell("Birmingham")]],
        )
        .unwrap();
        assert_eq!(t.key_tuple(0), KeyTuple::Unmatchable);
        assert!(matches!(t.gold_key_tuple(0), Err(TableError::NullKeyCell { .. })));
        assert!(t.validate_gold().is_err());
    }

    #[test]
    fn duplicate_gold_key_tuple_rejected() {
        let t = RelationalTable::new(
            vec![
                ColumnSpec::key("year", true),
                ColumnSpec::key("competition", false),
                ColumnSpec::non_key("venue", false),
            ],
            vec![
                vec![cell("1987"), cell("World Championships"), cell("Rome")],
                vec![cell("1987"), cell("World Championships"), cell("Tokyo")],
            ],
        )
        .unwrap();
        assert!(matches!(t.validate_gold(), Err(TableError::DuplicateKeyTuple { .. })));
    }

    #[test]
    fn row_width_checked() {
        let err = RelationalTable::new(
            vec![ColumnSpec::key("a", false), ColumnSpec::non_key("b", false)],
            vec![vec![cell("1")]],
        );
        assert!(matches!(err, Err(TableError::RowWidth { .. })));
    }

    #[test]
    fn stats_arithmetic() {
        let cols = vec![
            ColumnSpec::key("a", true),
            ColumnSpec::non_key("b", true),
            ColumnSpec::non_key("c", false),
            ColumnSpec::non_key("d", false),
        ];
        let rows = (0..10)
            .map(|i| vec![cell(&i.to_string()), cell("1"), cell("x"), cell("y")])
            .collect();
        let t = RelationalTable::new(cols, rows).unwrap();
        let stats = table_stats(&t, "ten rows");
        assert_eq!(stats.num_cells, 40);
        assert_eq!(stats.numeric_ratio, 0.5);
    }

    #[test]
    fn stats_zero_rows() {
        let t = RelationalTable::new(
            vec![ColumnSpec::key("a", false), ColumnSpec::non_key("b", false)],
            vec![],
        )
        .unwrap();
        let stats = table_stats(&t, "empty");
        assert_eq!(stats.num_cells, 0);
        assert_eq!(stats.num_rows, 0);
    }

    #[test]
    fn fig_style_numeric_ratio() {
        // year numeric, other three textual -> 1/4
        let t = small_table();
        let stats = table_stats(&t, "achievements");
        assert_eq!(stats.numeric_ratio, 0.25);
    }

    #[test]
    fn without_key_drops_matching_rows_only() {
        let t = small_table();
        let key = vec!["1987".to_string(), "europeanjunior".to_string()];
        let rest = t.without_key(&key);
        assert_eq!(rest.num_rows(), 1);
        assert_eq!(rest.cell(0, 2), Some("Rome"));
    }
}
