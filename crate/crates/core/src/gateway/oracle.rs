use super::{local_response, ClientIdentity, GatewayError, LlmClient, LlmRequest, LlmResponse};
use crate::benchmark::{Benchmark, BenchmarkInstance};
use crate::matching::normalize_for_key;
use crate::table::RelationalTable;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A deterministic client that recognizes the four built-in prompt shapes and
/// answers them from gold tables.
///
/// With a non-zero corruption rate, each emitted non-key value is
/// independently replaced by a marked wrong value, seeded per request so
/// responses are a pure function of (request, gold, seed). Key-generation
/// requests and echoed key fields are never corrupted.
pub struct OracleClient {
    entries: Vec<OracleEntry>,
    corruption_rate: f64,
    seed: u64,
}

struct OracleEntry {
    description: String,
    gold: RelationalTable,
}

impl OracleClient {
    pub fn new(corruption_rate: f64, seed: u64) -> Self {
        Self { entries: Vec::new(), corruption_rate, seed }
    }

    pub fn with_table(mut self, description: &str, gold: &RelationalTable) -> Self {
        self.entries.push(OracleEntry { description: description.to_string(), gold: gold.clone() });
        self
    }

    pub fn for_instance(instance: &BenchmarkInstance, corruption_rate: f64, seed: u64) -> Self {
        Self::new(corruption_rate, seed).with_table(&instance.description, &instance.table)
    }

    pub fn for_benchmark(benchmark: &Benchmark, corruption_rate: f64, seed: u64) -> Self {
        let mut client = Self::new(corruption_rate, seed);
        for inst in &benchmark.instances {
            client = client.with_table(&inst.description, &inst.table);
        }
        client
    }

    fn find_entry(&self, prompt: &str) -> Option<&OracleEntry> {
        self.entries.iter().find(|e| {
            prompt.contains(&format!("List all {}.\n", e.description))
                || prompt.contains(&format!("about {}.\n", e.description))
        })
    }

    fn rng_for(&self, prompt: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(prompt.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes))
    }

    fn maybe_corrupt(&self, rng: &mut ChaCha8Rng, value: Option<&str>) -> serde_json::Value {
        let corrupt = self.corruption_rate > 0.0 && rng.random_bool(self.corruption_rate);
        if corrupt {
            serde_json::Value::String(format!("__wrong_{}__", value.unwrap_or("")))
        } else {
            match value {
                Some(v) => serde_json::Value::String(v.to_string()),
                None => serde_json::Value::Null,
            }
        }
    }

    fn answer(&self, prompt: &str) -> Result<String, GatewayError> {
        let entry = self.find_entry(prompt).ok_or_else(|| {
            GatewayError::UnrecognizedPrompt("no known table description in prompt".to_string())
        })?;
        let gold = &entry.gold;
        let mut rng = self.rng_for(prompt);

        if let Some(line) = prompt.lines().find(|l| l.contains("Retrieve a single row whose key is (")) {
            let key_values = parse_key_pairs(line, &gold.key_column_names(), ").")?;
            return Ok(self.row_answer(gold, &key_values, &mut rng));
        }
        if let Some(line) = prompt.lines().find(|l| l.contains("whose key is (") && l.contains("what is the value of attribute")) {
            let key_values = parse_key_pairs(line, &gold.key_column_names(), ") what is the value of attribute")?;
            let target = parse_target_column(line)?;
            return Ok(self.cell_answer(gold, &key_values, &target, &mut rng));
        }
        if prompt.contains("entities for the table") {
            return Ok(keys_answer(gold));
        }
        if prompt.contains(&format!("List all {}.\n", entry.description)) {
            return Ok(self.full_table_answer(gold, &mut rng));
        }
        Err(GatewayError::UnrecognizedPrompt("prompt matches no template shape".to_string()))
    }

    fn full_table_answer(&self, gold: &RelationalTable, rng: &mut ChaCha8Rng) -> String {
        let rows: Vec<serde_json::Value> = (0..gold.num_rows())
            .map(|r| {
                let mut obj = serde_json::Map::new();
                for (c, col) in gold.columns().iter().enumerate() {
                    let raw = gold.cell(r, c);
                    let value = if col.is_key {
                        match raw {
                            Some(v) => serde_json::Value::String(v.to_string()),
                            None => serde_json::Value::Null,
                        }
                    } else {
                        self.maybe_corrupt(rng, raw)
                    };
                    obj.insert(col.name.clone(), value);
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows).to_string()
    }

    fn row_answer(&self, gold: &RelationalTable, key_values: &[String], rng: &mut ChaCha8Rng) -> String {
        let row = find_gold_row(gold, key_values);
        let key_indices = gold.key_indices();
        let mut obj = serde_json::Map::new();
        let mut requested = key_values.iter();
        for (c, col) in gold.columns().iter().enumerate() {
            let value = if key_indices.contains(&c) {
                // echo the requested key verbatim, never corrupted
                serde_json::Value::String(requested.next().cloned().unwrap_or_default())
            } else {
                match row {
                    Some(r) => self.maybe_corrupt(rng, gold.cell(r, c)),
                    None => serde_json::Value::Null,
                }
            };
            obj.insert(col.name.clone(), value);
        }
        serde_json::Value::Object(obj).to_string()
    }

    fn cell_answer(
        &self,
        gold: &RelationalTable,
        key_values: &[String],
        target: &str,
        rng: &mut ChaCha8Rng,
    ) -> String {
        let row = find_gold_row(gold, key_values);
        let value = match (row, gold.column_index(target)) {
            (Some(r), Some(c)) => self.maybe_corrupt(rng, gold.cell(r, c)),
            _ => serde_json::Value::Null,
        };
        let mut obj = serde_json::Map::new();
        obj.insert(target.to_string(), value);
        serde_json::Value::Object(obj).to_string()
    }
}

fn keys_answer(gold: &RelationalTable) -> String {
    let key_indices = gold.key_indices();
    let rows: Vec<serde_json::Value> = (0..gold.num_rows())
        .map(|r| {
            let mut obj = serde_json::Map::new();
            for &c in &key_indices {
                let v = match gold.cell(r, c) {
                    Some(v) => serde_json::Value::String(v.to_string()),
                    None => serde_json::Value::Null,
                };
                obj.insert(gold.columns()[c].name.clone(), v);
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(rows).to_string()
}

/// Finds the gold row whose normalized key tuple equals the requested values
/// (requested values arrive in key schema order).
fn find_gold_row(gold: &RelationalTable, key_values: &[String]) -> Option<usize> {
    let wanted: Vec<String> = key_values.iter().map(|v| normalize_for_key(v)).collect();
    (0..gold.num_rows()).find(|&r| gold.key_tuple(r).as_key() == Some(wanted.as_slice()))
}

/// Parses `name = value` pairs from a prompt line, between `whose key is (`
/// and `terminator`. Pair order follows the key schema order the renderer
/// uses, so values are recovered by scanning for each column marker in turn.
fn parse_key_pairs(line: &str, key_columns: &[String], terminator: &str) -> Result<Vec<String>, GatewayError> {
    let start = line
        .find("whose key is (")
        .ok_or_else(|| GatewayError::UnrecognizedPrompt("missing key clause".to_string()))?
        + "whose key is (".len();
    let end = line[start..]
        .rfind(terminator)
        .ok_or_else(|| GatewayError::UnrecognizedPrompt("unterminated key clause".to_string()))?
        + start;
    let content = &line[start..end];

    let mut values = Vec::with_capacity(key_columns.len());
    let mut cursor = 0usize;
    for (i, name) in key_columns.iter().enumerate() {
        let marker = format!("{name} = ");
        let pos = content[cursor..].find(&marker).ok_or_else(|| {
            GatewayError::UnrecognizedPrompt(format!("key column {name:?} missing from key clause"))
        })? + cursor;
        let value_start = pos + marker.len();
        let value_end = match key_columns.get(i + 1) {
            Some(next) => {
                let next_marker = format!(", {next} = ");
                content[value_start..].find(&next_marker).map(|p| value_start + p).unwrap_or(content.len())
            }
            None => content.len(),
        };
        values.push(content[value_start..value_end].to_string());
        cursor = value_end;
    }
    Ok(values)
}

fn parse_target_column(line: &str) -> Result<String, GatewayError> {
    let marker = "what is the value of attribute ";
    let start = line
        .find(marker)
        .ok_or_else(|| GatewayError::UnrecognizedPrompt("missing attribute clause".to_string()))?
        + marker.len();
    let rest = &line[start..];
    let end = rest.rfind('.').unwrap_or(rest.len());
    Ok(rest[..end].to_string())
}

impl LlmClient for OracleClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        request.validate()?;
        let text = self.answer(&request.user_message)?;
        Ok(local_response(request, text))
    }

    fn identity(&self) -> ClientIdentity {
        ClientIdentity {
            model: format!("oracle(corruption={},seed={})", self.corruption_rate, self.seed),
            temperature: 0.0,
        }
    }
}
