//! Generation and evaluation harness for relational tables produced from an
//! LLM's parametric knowledge.
//!
//! The pipeline renders one of four prompt shapes (full-table, keys, row,
//! cell), issues them through a gateway client (HTTP, scripted, or a
//! gold-table oracle), extracts JSON payloads from free-text responses, and
//! merges them into tables. Evaluation aligns generated rows to gold rows by
//! normalized key tuples and scores keys, non-keys, and overall cells with
//! fuzzy cell matching (canonical dates, relative numeric tolerance, null
//! equivalence). Analysis buckets per-table F1 by table properties and
//! accounts prompting cost per method.

pub mod analysis;
pub mod benchmark;
pub mod config;
pub mod curation;
pub mod gateway;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod table;

pub use benchmark::{load_benchmark, save_benchmark, Benchmark, BenchmarkInstance, Split};
pub use matching::{cells_match, MatchRule};
pub use metrics::{evaluate_instance, EvalOptions, TableEvaluation};
pub use pipeline::{Method, Pipeline, Scenario};
pub use table::{ColumnSpec, RelationalTable};
