//! Recomputes the bundled fixture set's aggregate statistics and prints the
//! manifest JSON. Run after editing fixtures:
//!
//!   cargo run --example fixture_manifest > crates/core/fixtures/manifest.json

use tabgen::benchmark::{compute_manifest, load_benchmark};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/benchmark.json");
    let benchmark = load_benchmark(path).expect("fixture benchmark loads");
    let manifest = compute_manifest(&benchmark);
    println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
}
