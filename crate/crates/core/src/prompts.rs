//! Renders the four prompt templates (full-table, keys, row, cell) with
//! description, columns, and key values.
//!
//! Templates are external text assets with `<<name>>` placeholders, compiled
//! in as defaults and overridable from a directory. Rendering is byte-exact:
//! golden tests diff the populated examples against stored files, so
//! substitution never trims, reflows, or re-quotes anything.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

const FULL_TABLE_TEMPLATE: &str = include_str!("../assets/templates/full_table.txt");
const KEYS_TEMPLATE: &str = include_str!("../assets/templates/keys.txt");
const ROW_TEMPLATE: &str = include_str!("../assets/templates/row.txt");
const CELL_TEMPLATE: &str = include_str!("../assets/templates/cell.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("description is empty")]
    EmptyDescription,
    #[error("full-table prompt needs at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("key set is empty")]
    NoKeyColumns,
    #[error("table has no non-key columns, so a {0} prompt is meaningless")]
    NoNonKeyColumns(&'static str),
    #[error("{got} key values supplied for {expected} key columns")]
    KeyArityMismatch { got: usize, expected: usize },
    #[error("key column {0:?} is not one of the table columns")]
    UnknownKeyColumn(String),
    #[error("target column {0:?} is not one of the table columns")]
    UnknownTargetColumn(String),
    #[error("target column {0:?} is a key column")]
    TargetIsKey(String),
    #[error("prompt already carries an example block")]
    AlreadyAugmented,
    #[error("example row is missing a value for column {0:?}")]
    MissingExampleColumn(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("cannot read template {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Which of the four templates produced a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    FullTable,
    Keys,
    Row,
    Cell,
}

/// The values substituted into a template, recorded alongside the text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PromptBindings {
    pub description: String,
    pub columns: Vec<String>,
    pub key_columns: Vec<String>,
    pub key_values: Vec<String>,
    pub target_column: Option<String>,
    /// The example JSON block appended by the example-row scenario, if any.
    pub example: Option<String>,
}

/// A fully rendered prompt: the exact text sent to the model plus the
/// bindings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub kind: PromptKind,
    pub text: String,
    pub bindings: PromptBindings,
}

/// The four templates plus an optional per-model wrapper applied around the
/// user message (`<<prompt>>` marks where the prompt goes).
#[derive(Debug, Clone)]
pub struct TemplateSet {
    full_table: String,
    keys: String,
    row: String,
    cell: String,
    wrapper: Option<String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            full_table: FULL_TABLE_TEMPLATE.to_string(),
            keys: KEYS_TEMPLATE.to_string(),
            row: ROW_TEMPLATE.to_string(),
            cell: CELL_TEMPLATE.to_string(),
            wrapper: None,
        }
    }
}

impl TemplateSet {
    /// Loads `full_table.txt`, `keys.txt`, `row.txt`, `cell.txt` from a
    /// directory, plus `wrapper.<model-family>.txt` when a family is named.
    pub fn load_dir(dir: impl AsRef<Path>, model_family: Option<&str>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String, PromptError> {
            let path = dir.join(name);
            std::fs::read_to_string(&path)
                .map_err(|source| PromptError::Io { path: path.display().to_string(), source })
        };
        let wrapper = match model_family {
            Some(family) => {
                let path = dir.join(format!("wrapper.{family}.txt"));
                if path.exists() { Some(read(&format!("wrapper.{family}.txt"))?) } else { None }
            }
            None => None,
        };
        Ok(Self {
            full_table: read("full_table.txt")?,
            keys: read("keys.txt")?,
            row: read("row.txt")?,
            cell: read("cell.txt")?,
            wrapper,
        })
    }

    /// Applies the per-model wrapper to a rendered prompt text, when one is
    /// configured. Without a wrapper the text passes through unchanged.
    pub fn wrap(&self, text: &str) -> Result<String, PromptError> {
        match &self.wrapper {
            Some(w) if !w.trim().is_empty() => fill(w, &[("prompt", text.to_string())]),
            _ => Ok(text.to_string()),
        }
    }

    /// Full-table prompt: one request for every row of the table.
    pub fn render_full_table(&self, description: &str, columns: &[String]) -> Result<RenderedPrompt, PromptError> {
        if description.trim().is_empty() {
            return Err(PromptError::EmptyDescription);
        }
        if columns.len() < 2 {
            return Err(PromptError::TooFewColumns(columns.len()));
        }
        let column_list = format!(
            "[{}]",
            columns.iter().map(|c| format!("'{c}'")).collect::<Vec<_>>().join(", ")
        );
        let response_fields = columns
            .iter()
            .map(|c| format!("\"{c}\": _{c}"))
            .collect::<Vec<_>>()
            .join(", ");
        let text = fill(
            &self.full_table,
            &[
                ("description", description.to_string()),
                ("num_columns", columns.len().to_string()),
                ("column_list", column_list),
                ("response_fields", response_fields),
            ],
        )?;
        Ok(RenderedPrompt {
            kind: PromptKind::FullTable,
            text,
            bindings: PromptBindings {
                description: description.to_string(),
                columns: columns.to_vec(),
                ..PromptBindings::default()
            },
        })
    }

    /// Keys prompt: asks for every key tuple of the table.
    pub fn render_keys(&self, description: &str, key_columns: &[String]) -> Result<RenderedPrompt, PromptError> {
        if description.trim().is_empty() {
            return Err(PromptError::EmptyDescription);
        }
        if key_columns.is_empty() {
            return Err(PromptError::NoKeyColumns);
        }
        let key_list = key_columns.join(", ");
        let response_fields = key_columns
            .iter()
            .map(|c| format!("\"{c}\": _{c}"))
            .collect::<Vec<_>>()
            .join(", ");
        let text = fill(
            &self.keys,
            &[
                ("description", description.to_string()),
                ("key_list", key_list),
                ("response_fields", response_fields),
            ],
        )?;
        Ok(RenderedPrompt {
            kind: PromptKind::Keys,
            text,
            bindings: PromptBindings {
                description: description.to_string(),
                key_columns: key_columns.to_vec(),
                ..PromptBindings::default()
            },
        })
    }

    /// Row prompt: asks for the full row behind one key tuple. Key = value
    /// pairs and the response-format block follow column schema order; key
    /// fields are pre-filled with their values.
    pub fn render_row(
        &self,
        description: &str,
        columns: &[String],
        key_columns: &[String],
        key_values: &[String],
    ) -> Result<RenderedPrompt, PromptError> {
        let parts = RowParts::prepare(description, columns, key_columns, key_values, "row")?;
        let response_fields = columns
            .iter()
            .map(|c| match parts.value_of(c) {
                Some(v) => format!("\"{c}\": {v}"),
                None => format!("\"{c}\": _{c}"),
            })
            .collect::<Vec<_>>()
            .join(", ");
        let text = fill(
            &self.row,
            &[
                ("description", description.to_string()),
                ("column_list", columns.join(", ")),
                ("key_list", key_columns.join(", ")),
                ("key_pairs", parts.key_pairs.clone()),
                ("response_fields", response_fields),
            ],
        )?;
        Ok(RenderedPrompt {
            kind: PromptKind::Row,
            text,
            bindings: PromptBindings {
                description: description.to_string(),
                columns: columns.to_vec(),
                key_columns: key_columns.to_vec(),
                key_values: key_values.to_vec(),
                ..PromptBindings::default()
            },
        })
    }

    /// Cell prompt: asks for one non-key cell behind one key tuple. The
    /// response format carries exactly the target column.
    pub fn render_cell(
        &self,
        description: &str,
        columns: &[String],
        key_columns: &[String],
        key_values: &[String],
        target_column: &str,
    ) -> Result<RenderedPrompt, PromptError> {
        let parts = RowParts::prepare(description, columns, key_columns, key_values, "cell")?;
        if key_columns.iter().any(|k| k == target_column) {
            return Err(PromptError::TargetIsKey(target_column.to_string()));
        }
        if !columns.iter().any(|c| c == target_column) {
            return Err(PromptError::UnknownTargetColumn(target_column.to_string()));
        }
        let response_fields = format!("\"{target_column}\": _{target_column}");
        let text = fill(
            &self.cell,
            &[
                ("description", description.to_string()),
                ("column_list", columns.join(", ")),
                ("key_list", key_columns.join(", ")),
                ("key_pairs", parts.key_pairs.clone()),
                ("target_column", target_column.to_string()),
                ("response_fields", response_fields),
            ],
        )?;
        Ok(RenderedPrompt {
            kind: PromptKind::Cell,
            text,
            bindings: PromptBindings {
                description: description.to_string(),
                columns: columns.to_vec(),
                key_columns: key_columns.to_vec(),
                key_values: key_values.to_vec(),
                target_column: Some(target_column.to_string()),
                ..PromptBindings::default()
            },
        })
    }
}

/// Appends an example block rendering the first gold row in the same JSON
/// shape the prompt's response format requests: an array for full-table and
/// keys prompts, an object for row and cell prompts, projected onto the
/// fields the prompt names.
pub fn augment_with_example(
    prompt: RenderedPrompt,
    example_row: &[(String, Option<String>)],
) -> Result<RenderedPrompt, PromptError> {
    if prompt.bindings.example.is_some() {
        return Err(PromptError::AlreadyAugmented);
    }
    let fields: Vec<&String> = match prompt.kind {
        PromptKind::FullTable | PromptKind::Row => prompt.bindings.columns.iter().collect(),
        PromptKind::Keys => prompt.bindings.key_columns.iter().collect(),
        PromptKind::Cell => prompt.bindings.target_column.iter().collect(),
    };
    let mut obj = serde_json::Map::new();
    for field in fields {
        let value = example_row
            .iter()
            .find(|(name, _)| name == field)
            .ok_or_else(|| PromptError::MissingExampleColumn(field.clone()))?;
        let json = match &value.1 {
            Some(v) => serde_json::Value::String(v.clone()),
            None => serde_json::Value::Null,
        };
        obj.insert(field.clone(), json);
    }
    let value = serde_json::Value::Object(obj);
    let example = match prompt.kind {
        PromptKind::FullTable | PromptKind::Keys => serde_json::Value::Array(vec![value]).to_string(),
        PromptKind::Row | PromptKind::Cell => value.to_string(),
    };
    let mut text = prompt.text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    text.push_str("\nEXAMPLE:\n");
    text.push_str(&example);
    text.push('\n');
    let mut bindings = prompt.bindings;
    bindings.example = Some(example);
    Ok(RenderedPrompt { kind: prompt.kind, text, bindings })
}

struct RowParts {
    key_pairs: String,
    ordered: Vec<(String, String)>, // (column, value) for key columns, schema order
}

impl RowParts {
    fn prepare(
        description: &str,
        columns: &[String],
        key_columns: &[String],
        key_values: &[String],
        kind: &'static str,
    ) -> Result<Self, PromptError> {
        if description.trim().is_empty() {
            return Err(PromptError::EmptyDescription);
        }
        if key_columns.is_empty() {
            return Err(PromptError::NoKeyColumns);
        }
        if key_values.len() != key_columns.len() {
            return Err(PromptError::KeyArityMismatch {
                got: key_values.len(),
                expected: key_columns.len(),
            });
        }
        for key in key_columns {
            if !columns.iter().any(|c| c == key) {
                return Err(PromptError::UnknownKeyColumn(key.clone()));
            }
        }
        if columns.iter().all(|c| key_columns.contains(c)) {
            return Err(PromptError::NoNonKeyColumns(kind));
        }
        // key = value pairs in column schema order, whatever order the key
        // list was supplied in
        let ordered: Vec<(String, String)> = columns
            .iter()
            .filter_map(|c| {
                key_columns
                    .iter()
                    .position(|k| k == c)
                    .map(|i| (c.clone(), key_values[i].clone()))
            })
            .collect();
        let key_pairs = ordered
            .iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(Self { key_pairs, ordered })
    }

    fn value_of(&self, column: &str) -> Option<&str> {
        self.ordered.iter().find(|(c, _)| c == column).map(|(_, v)| v.as_str())
    }
}

fn fill(template: &str, vars: &[(&str, String)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("<<") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find(">>")
            .ok_or_else(|| PromptError::Template("unterminated <<placeholder>>".to_string()))?;
        let name = &after[..end];
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .ok_or_else(|| PromptError::Template(format!("unknown placeholder <<{name}>>")))?;
        out.push_str(&value.1);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
