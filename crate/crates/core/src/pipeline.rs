//! End-to-end generation: renders prompts, issues them through a gateway
//! client, extracts JSON payloads from free-text responses, and merges rows
//! and cells into a generated table with a full trace.
//!
//! Gateway and parse failures degrade to nulls or empty tables and are
//! counted in the record; they never abort a run. Secondary prompts execute
//! with bounded parallelism and a merge that depends only on (key order,
//! column order), so records are identical regardless of scheduling.

use crate::benchmark::{Benchmark, BenchmarkInstance};
use crate::gateway::{LlmClient, LlmRequest, LlmResponse};
use crate::matching::normalize_for_key;
use crate::prompts::{augment_with_example, PromptError, RenderedPrompt, TemplateSet};
use crate::table::{CellValue, RelationalTable, TableError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("instance {0:?} has no non-key columns; row and cell prompts are meaningless")]
    NoNonKeyColumns(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("record {path} cannot be decoded: {reason}")]
    BadRecord { path: String, reason: String },
    #[error("record for {id:?} was produced by method={method} scenario={scenario}, not the requested run")]
    ResumeMismatch { id: String, method: Method, scenario: Scenario },
}

/// The three prompting methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FullTable,
    RowByRow,
    CellByCell,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::FullTable => "full-table",
            Method::RowByRow => "row-by-row",
            Method::CellByCell => "cell-by-cell",
        };
        f.write_str(s)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full-table" => Ok(Method::FullTable),
            "row-by-row" => Ok(Method::RowByRow),
            "cell-by-cell" => Ok(Method::CellByCell),
            other => Err(format!("unknown method {other:?} (expected full-table, row-by-row, or cell-by-cell)")),
        }
    }
}

/// Baseline generation, or one of the two ablations: append the first gold
/// row to every prompt, or substitute gold key tuples for the keys stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Baseline,
    ExampleRow,
    OracleKeys,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Baseline => "baseline",
            Scenario::ExampleRow => "example-row",
            Scenario::OracleKeys => "oracle-keys",
        };
        f.write_str(s)
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Scenario::Baseline),
            "example-row" => Ok(Scenario::ExampleRow),
            "oracle-keys" => Ok(Scenario::OracleKeys),
            other => Err(format!("unknown scenario {other:?} (expected baseline, example-row, or oracle-keys)")),
        }
    }
}

/// Full trace of one generation run over one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub instance_id: String,
    pub method: Method,
    pub scenario: Scenario,
    pub prompts: Vec<RenderedPrompt>,
    pub responses: Vec<LlmResponse>,
    pub parsed_table: RelationalTable,
    pub parse_failures: u64,
    pub parse_failure_reasons: Vec<String>,
    /// Key tuples as the keys stage produced them, before deduplication.
    pub generated_keys_raw: Vec<Vec<CellValue>>,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    /// Sum of per-response provider latencies; 0 for deterministic clients.
    pub wall_time_ms: u64,
}

/// Orchestrates prompt rendering, issuance, and merging.
pub struct Pipeline {
    templates: TemplateSet,
    parallelism: usize,
    dedup_keys: bool,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self { templates: TemplateSet::default(), parallelism: 4, dedup_keys: true }
    }
}

impl Pipeline {
    pub fn new(templates: TemplateSet, parallelism: usize, dedup_keys: bool) -> Self {
        Self { templates, parallelism: parallelism.max(1), dedup_keys }
    }

    pub fn run_full_table(
        &self,
        instance: &BenchmarkInstance,
        client: &dyn LlmClient,
    ) -> Result<GenerationRecord, PipelineError> {
        self.run_scenario(instance, client, Method::FullTable, Scenario::Baseline)
    }

    pub fn run_row_by_row(
        &self,
        instance: &BenchmarkInstance,
        client: &dyn LlmClient,
    ) -> Result<GenerationRecord, PipelineError> {
        self.run_scenario(instance, client, Method::RowByRow, Scenario::Baseline)
    }

    pub fn run_cell_by_cell(
        &self,
        instance: &BenchmarkInstance,
        client: &dyn LlmClient,
    ) -> Result<GenerationRecord, PipelineError> {
        self.run_scenario(instance, client, Method::CellByCell, Scenario::Baseline)
    }

    /// Runs one method/scenario pair over one instance.
    pub fn run_scenario(
        &self,
        instance: &BenchmarkInstance,
        client: &dyn LlmClient,
        method: Method,
        scenario: Scenario,
    ) -> Result<GenerationRecord, PipelineError> {
        if scenario == Scenario::OracleKeys && method == Method::FullTable {
            return Err(PipelineError::InvalidScenario(
                "oracle-keys substitutes the keys prompt, which full-table does not have".to_string(),
            ));
        }
        let example = match scenario {
            Scenario::ExampleRow => {
                if instance.table.num_rows() == 0 {
                    return Err(PipelineError::InvalidScenario(
                        "example-row needs a gold table with at least one row".to_string(),
                    ));
                }
                Some(first_row_pairs(&instance.table))
            }
            _ => None,
        };
        let mut record = match method {
            Method::FullTable => self.generate_full_table(instance, client, example.as_deref())?,
            Method::RowByRow => {
                self.generate_keyed(instance, client, scenario, example.as_deref(), false)?
            }
            Method::CellByCell => {
                self.generate_keyed(instance, client, scenario, example.as_deref(), true)?
            }
        };
        record.method = method;
        record.scenario = scenario;
        Ok(record)
    }

    fn generate_full_table(
        &self,
        instance: &BenchmarkInstance,
        client: &dyn LlmClient,
        example: Option<&[(String, CellValue)]>,
    ) -> Result<GenerationRecord, PipelineError> {
        let columns = instance.table.column_names();
        let mut prompt = self.templates.render_full_table(&instance.description, &columns)?;
        if let Some(row) = example {
            prompt = augment_with_example(prompt, row)?;
        }
        let mut record = RecordBuilder::new(instance);
        let outcome = self.issue(client, &prompt);
        record.push_prompt(prompt);
        let rows = match outcome {
            Outcome::Response(resp) => {
                let parsed = extract_json_payload(&resp.text, ExpectedShape::List, &columns);
                record.push_response(resp);
                match parsed {
                    Ok(rows) => rows,
                    Err(reason) => {
                        record.fail(format!("full-table response: {reason}"));
                        Vec::new()
                    }
                }
            }
            Outcome::Failed(reason) => {
                record.fail(format!("full-table request: {reason}"));
                Vec::new()
            }
        };
        record.finish(instance, rows, Vec::new())
    }

    /// Shared two-stage driver for row-by-row and cell-by-cell.
    fn generate_keyed(
        &self,
        instance: &BenchmarkInstance,
        client: &dyn LlmClient,
        scenario: Scenario,
        example: Option<&[(String, CellValue)]>,
        per_cell: bool,
    ) -> Result<GenerationRecord, PipelineError> {
        let gold = &instance.table;
        let columns = gold.column_names();
        let key_columns = gold.key_column_names();
        let non_key_columns = gold.non_key_column_names();
        if non_key_columns.is_empty() {
            return Err(PipelineError::NoNonKeyColumns(instance.id.clone()));
        }

        let mut record = RecordBuilder::new(instance);

        // Stage 1: key tuples, either generated or taken from gold.
        let raw_keys: Vec<Vec<CellValue>> = if scenario == Scenario::OracleKeys {
            (0..gold.num_rows())
                .map(|r| gold.raw_key_values(r).map(|vs| vs.into_iter().map(Some).collect()))
                .collect::<Result<_, _>>()?
        } else {
            let mut prompt = self.templates.render_keys(&instance.description, &key_columns)?;
            if let Some(row) = example {
                prompt = augment_with_example(prompt, row)?;
            }
            let outcome = self.issue(client, &prompt);
            record.push_prompt(prompt);
            match outcome {
                Outcome::Response(resp) => {
                    let parsed = extract_json_payload(&resp.text, ExpectedShape::List, &key_columns);
                    record.push_response(resp);
                    match parsed {
                        Ok(rows) => rows,
                        Err(reason) => {
                            record.fail(format!("keys response: {reason}"));
                            return record.finish(instance, Vec::new(), Vec::new());
                        }
                    }
                }
                Outcome::Failed(reason) => {
                    record.fail(format!("keys request: {reason}"));
                    return record.finish(instance, Vec::new(), Vec::new());
                }
            }
        };

        let keys = if self.dedup_keys { dedup_keys(&raw_keys) } else { raw_keys.clone() };

        // Stage 2: one prompt per row, or per (row, non-key column).
        let mut prompts = Vec::new();
        for key in &keys {
            let values: Vec<String> =
                key.iter().map(|v| v.clone().unwrap_or_default()).collect();
            if per_cell {
                for target in &non_key_columns {
                    let mut p = self.templates.render_cell(
                        &instance.description,
                        &columns,
                        &key_columns,
                        &values,
                        target,
                    )?;
                    if let Some(row) = example {
                        p = augment_with_example(p, row)?;
                    }
                    prompts.push(p);
                }
            } else {
                let mut p = self.templates.render_row(
                    &instance.description,
                    &columns,
                    &key_columns,
                    &values,
                )?;
                if let Some(row) = example {
                    p = augment_with_example(p, row)?;
                }
                prompts.push(p);
            }
        }

        let outcomes = parallel_map(&prompts, self.parallelism, |p| self.issue(client, p));

        // Deterministic merge: rows in key order, cells slotted by column.
        let key_idx = gold.key_indices();
        let non_key_idx = gold.non_key_indices();
        let mut rows: Vec<Vec<CellValue>> = Vec::with_capacity(keys.len());
        let mut outcome_iter = outcomes.into_iter();
        for key in &keys {
            let mut row: Vec<CellValue> = vec![None; columns.len()];
            for (slot, &c) in key_idx.iter().enumerate() {
                row[c] = key[slot].clone();
            }
            if per_cell {
                for &c in &non_key_idx {
                    let target = &gold.columns()[c].name;
                    match outcome_iter.next().expect("one outcome per cell prompt") {
                        Outcome::Response(resp) => {
                            let parsed = extract_json_payload(
                                &resp.text,
                                ExpectedShape::Object,
                                std::slice::from_ref(target),
                            );
                            record.push_response(resp);
                            match parsed {
                                Ok(cells) => row[c] = cells[0][0].clone(),
                                Err(reason) => record.fail(format!(
                                    "cell ({key:?}, {target}): {reason}"
                                )),
                            }
                        }
                        Outcome::Failed(reason) => {
                            record.fail(format!("cell ({key:?}, {target}) request: {reason}"))
                        }
                    }
                }
            } else {
                match outcome_iter.next().expect("one outcome per row prompt") {
                    Outcome::Response(resp) => {
                        let parsed = extract_json_payload(&resp.text, ExpectedShape::Object, &columns);
                        record.push_response(resp);
                        match parsed {
                            Ok(cells) => {
                                for &c in &non_key_idx {
                                    row[c] = cells[0][c].clone();
                                }
                            }
                            Err(reason) => record.fail(format!("row {key:?}: {reason}")),
                        }
                    }
                    Outcome::Failed(reason) => record.fail(format!("row {key:?} request: {reason}")),
                }
            }
            rows.push(row);
        }
        record.prompts.extend(prompts);
        record.finish(instance, rows, raw_keys)
    }

    fn issue(&self, client: &dyn LlmClient, prompt: &RenderedPrompt) -> Outcome {
        let wrapped = match self.templates.wrap(&prompt.text) {
            Ok(text) => text,
            Err(e) => return Outcome::Failed(e.to_string()),
        };
        match client.complete(&LlmRequest::user(wrapped)) {
            Ok(resp) => Outcome::Response(resp),
            Err(e) => Outcome::Failed(e.to_string()),
        }
    }
}

/// Identifies a benchmark run for the manifest and cross-run checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub method: Method,
    pub scenario: Scenario,
    pub benchmark_path: String,
    pub benchmark_hash: String,
    pub config_hash: String,
}

/// Summary written as `run_manifest.json` next to the records. Contains no
/// timestamps so reruns with a warm cache reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: Method,
    pub scenario: Scenario,
    pub model: String,
    pub temperature: f64,
    pub benchmark_path: String,
    pub benchmark_hash: String,
    pub config_hash: String,
    /// Whether generated key tuples were deduplicated before second-stage
    /// prompts; recorded so runs with either policy can be told apart.
    pub dedup_keys: bool,
    pub instances: Vec<String>,
    pub failed_instances: Vec<String>,
    pub total_prompts: u64,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    pub total_parse_failures: u64,
}

impl Pipeline {
    /// Runs every eval-split instance, persisting each record as it lands.
    ///
    /// Output layout: `records/<id>.json` (full trace), `tables/<id>.json`
    /// (parsed table in benchmark row format), `run_manifest.json`. Existing
    /// record files are trusted and skipped, which together with the gateway
    /// cache makes interrupted runs resumable; per-instance failures are
    /// isolated and listed in the manifest.
    pub fn run_benchmark(
        &self,
        benchmark: &Benchmark,
        client: &dyn LlmClient,
        spec: &RunSpec,
        out_dir: &Path,
    ) -> Result<RunManifest, PipelineError> {
        if spec.scenario == Scenario::OracleKeys && spec.method == Method::FullTable {
            return Err(PipelineError::InvalidScenario(
                "oracle-keys substitutes the keys prompt, which full-table does not have".to_string(),
            ));
        }
        let records_dir = out_dir.join("records");
        let tables_dir = out_dir.join("tables");
        for dir in [&records_dir, &tables_dir] {
            std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }

        let identity = client.identity();
        let mut manifest = RunManifest {
            method: spec.method,
            scenario: spec.scenario,
            model: identity.model,
            temperature: identity.temperature,
            benchmark_path: spec.benchmark_path.clone(),
            benchmark_hash: spec.benchmark_hash.clone(),
            config_hash: spec.config_hash.clone(),
            dedup_keys: self.dedup_keys,
            instances: Vec::new(),
            failed_instances: Vec::new(),
            total_prompts: 0,
            total_input_tokens: 0,
            total_output_tokens: 0,
            total_parse_failures: 0,
        };

        for instance in benchmark.eval_instances() {
            let record_path = records_dir.join(format!("{}.json", instance.id));
            let record = if record_path.exists() {
                let existing = read_record(&record_path)?;
                if existing.method != spec.method || existing.scenario != spec.scenario {
                    return Err(PipelineError::ResumeMismatch {
                        id: instance.id.clone(),
                        method: existing.method,
                        scenario: existing.scenario,
                    });
                }
                existing
            } else {
                match self.run_scenario(instance, client, spec.method, spec.scenario) {
                    Ok(record) => {
                        write_json_atomic(&record_path, &record)?;
                        record
                    }
                    Err(PipelineError::Io { path, source }) => {
                        return Err(PipelineError::Io { path, source })
                    }
                    Err(e) => {
                        log::warn!("instance {} failed: {e}", instance.id);
                        manifest.failed_instances.push(instance.id.clone());
                        continue;
                    }
                }
            };
            write_json_atomic(&tables_dir.join(format!("{}.json", instance.id)), &record.parsed_table)?;
            manifest.instances.push(instance.id.clone());
            manifest.total_prompts += record.prompts.len() as u64;
            manifest.total_input_tokens += record.total_input_tokens;
            manifest.total_output_tokens += record.total_output_tokens;
            manifest.total_parse_failures += record.parse_failures;
        }

        write_json_atomic(&out_dir.join("run_manifest.json"), &manifest)?;
        Ok(manifest)
    }
}

/// Reads one persisted generation record.
pub fn read_record(path: &Path) -> Result<GenerationRecord, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| PipelineError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::BadRecord { path: path.display().to_string(), reason: e.to_string() })
}

/// Reads a whole run directory: manifest plus records in manifest order.
pub fn read_run(out_dir: &Path) -> Result<(RunManifest, Vec<GenerationRecord>), PipelineError> {
    let manifest_path = out_dir.join("run_manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|source| PipelineError::Io { path: manifest_path.display().to_string(), source })?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| PipelineError::BadRecord {
        path: manifest_path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut records = Vec::with_capacity(manifest.instances.len());
    for id in &manifest.instances {
        records.push(read_record(&out_dir.join("records").join(format!("{id}.json")))?);
    }
    Ok((manifest, records))
}

pub(crate) fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::BadRecord { path: path.display().to_string(), reason: e.to_string() })?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, &text)
        .map_err(|source| PipelineError::Io { path: tmp.display().to_string(), source })?;
    std::fs::rename(&tmp, path)
        .map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

enum Outcome {
    Response(LlmResponse),
    Failed(String),
}

struct RecordBuilder {
    instance_id: String,
    prompts: Vec<RenderedPrompt>,
    responses: Vec<LlmResponse>,
    parse_failures: u64,
    parse_failure_reasons: Vec<String>,
}

impl RecordBuilder {
    fn new(instance: &BenchmarkInstance) -> Self {
        Self {
            instance_id: instance.id.clone(),
            prompts: Vec::new(),
            responses: Vec::new(),
            parse_failures: 0,
            parse_failure_reasons: Vec::new(),
        }
    }

    fn push_prompt(&mut self, prompt: RenderedPrompt) {
        self.prompts.push(prompt);
    }

    fn push_response(&mut self, response: LlmResponse) {
        self.responses.push(response);
    }

    fn fail(&mut self, reason: String) {
        self.parse_failures += 1;
        self.parse_failure_reasons.push(reason);
    }

    fn finish(
        self,
        instance: &BenchmarkInstance,
        rows: Vec<Vec<CellValue>>,
        generated_keys_raw: Vec<Vec<CellValue>>,
    ) -> Result<GenerationRecord, PipelineError> {
        let parsed_table = RelationalTable::new(instance.table.columns().to_vec(), rows)?;
        let total_input_tokens = self.responses.iter().map(|r| r.input_tokens).sum();
        let total_output_tokens = self.responses.iter().map(|r| r.output_tokens).sum();
        let wall_time_ms = self.responses.iter().map(|r| r.latency_ms).sum();
        Ok(GenerationRecord {
            instance_id: self.instance_id,
            method: Method::FullTable, // overwritten by run_scenario
            scenario: Scenario::Baseline,
            prompts: self.prompts,
            responses: self.responses,
            parsed_table,
            parse_failures: self.parse_failures,
            parse_failure_reasons: self.parse_failure_reasons,
            generated_keys_raw,
            total_input_tokens,
            total_output_tokens,
            wall_time_ms,
        })
    }
}

fn first_row_pairs(table: &RelationalTable) -> Vec<(String, CellValue)> {
    table
        .columns()
        .iter()
        .enumerate()
        .map(|(c, col)| (col.name.clone(), table.rows()[0][c].clone()))
        .collect()
}

/// Deduplicates key tuples by their normalized form, first occurrence kept,
/// so prompt counts match the formulas and duplicate keys are not billed
/// twice. Null components use a sentinel no normalized text can produce.
fn dedup_keys(raw: &[Vec<CellValue>]) -> Vec<Vec<CellValue>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for key in raw {
        let signature: Vec<String> = key
            .iter()
            .map(|v| match v {
                Some(s) => normalize_for_key(s),
                None => "\u{0}null".to_string(),
            })
            .collect();
        if seen.insert(signature) {
            out.push(key.clone());
        }
    }
    out
}

/// The JSON shape a response is expected to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedShape {
    List,
    Object,
}

/// Locates the first well-formed JSON value of the expected shape inside
/// free text (models wrap payloads in prose and code fences), then coerces
/// it to rows over the declared columns: missing columns become null, extra
/// fields are ignored, and scalars are stringified canonically (integral
/// numbers carry no trailing ".0").
///
/// Returns the parse-failure reason as a plain string; it never panics or
/// raises.
pub fn extract_json_payload(
    text: &str,
    shape: ExpectedShape,
    columns: &[String],
) -> Result<Vec<Vec<CellValue>>, String> {
    let open = match shape {
        ExpectedShape::List => b'[',
        ExpectedShape::Object => b'{',
    };
    let bytes = text.as_bytes();
    let mut start = 0usize;
    while let Some(pos) = find_byte(bytes, open, start) {
        if let Some(end) = balanced_end(bytes, pos) {
            if let Ok(value) = serde_json::from_str::<serde_json::Value>(&text[pos..end]) {
                match (shape, &value) {
                    (ExpectedShape::List, serde_json::Value::Array(items)) => {
                        let rows = items
                            .iter()
                            .filter_map(|item| item.as_object())
                            .map(|obj| object_to_row(obj, columns))
                            .collect();
                        return Ok(rows);
                    }
                    (ExpectedShape::Object, serde_json::Value::Object(obj)) => {
                        return Ok(vec![object_to_row(obj, columns)]);
                    }
                    _ => {}
                }
            }
        }
        start = pos + 1;
    }
    let shape_name = match shape {
        ExpectedShape::List => "list",
        ExpectedShape::Object => "object",
    };
    Err(format!("no well-formed JSON {shape_name} found in response"))
}

fn find_byte(bytes: &[u8], needle: u8, from: usize) -> Option<usize> {
    bytes[from..].iter().position(|&b| b == needle).map(|p| p + from)
}

/// Byte index one past the bracket that balances the one at `start`,
/// skipping over string literals.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut in_string = false;
    let mut escape = false;
    let mut depth = 0i64;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escape {
                escape = false;
            } else if b == b'\\' {
                escape = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
                if depth < 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    None
}

fn object_to_row(obj: &serde_json::Map<String, serde_json::Value>, columns: &[String]) -> Vec<CellValue> {
    columns.iter().map(|c| obj.get(c).and_then(value_to_text)).collect()
}

fn value_to_text(value: &serde_json::Value) -> CellValue {
    match value {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        serde_json::Value::Number(n) => Some(number_to_text(n)),
        other => Some(other.to_string()),
    }
}

fn number_to_text(n: &serde_json::Number) -> String {
    if let Some(i) = n.as_i64() {
        return i.to_string();
    }
    if let Some(u) = n.as_u64() {
        return u.to_string();
    }
    let f = n.as_f64().unwrap_or(0.0);
    if f.fract() == 0.0 && f.abs() < 9.0e15 {
        format!("{}", f as i64)
    } else {
        n.to_string()
    }
}

/// Order-preserving map with at most `bound` worker threads.
pub(crate) fn parallel_map<T, R, F>(items: &[T], bound: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = bound.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("worker filled slot"))
        .collect()
}
