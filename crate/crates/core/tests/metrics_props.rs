//! Property tests for matching and metrics invariants.

mod common;

use common::{random_table_pair, test_rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use tabgen::matching::{cells_match, normalize_text, parse_date, parse_number, MatchRule};
use tabgen::metrics::{align_rows, evaluate_keys, evaluate_non_keys, evaluate_table, EvalOptions};
use tabgen::table::{CellValue, ColumnSpec, RelationalTable};

fn value_strategy() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        2 => Just(None),
        3 => proptest::option::weighted(0.9, "[a-zA-Z0-9 ,.%!-]{0,12}"),
        2 => (0i64..10_000).prop_map(|n| Some(n.to_string())),
        1 => Just(Some("2014-05-16".to_string())),
        1 => Just(Some("n/a".to_string())),
    ]
}

proptest! {
    #[test]
    fn match_is_reflexive_for_non_null(v in "[a-zA-Z0-9 ,.%!-]{1,16}") {
        let rule = MatchRule::default();
        prop_assume!(!tabgen::matching::is_nullish(Some(&v), &rule));
        prop_assert!(cells_match(Some(&v), Some(&v), &rule));
    }

    #[test]
    fn match_is_symmetric_outside_the_numeric_branch(a in value_strategy(), b in value_strategy()) {
        let rule = MatchRule::default();
        let numeric = |v: &Option<String>| {
            v.as_deref().map(|s| parse_number(s).is_some() && parse_date(s).is_none()).unwrap_or(false)
        };
        // the numeric branch is anchored to gold, so skip number-number pairs
        prop_assume!(!(numeric(&a) && numeric(&b)));
        prop_assert_eq!(
            cells_match(a.as_deref(), b.as_deref(), &rule),
            cells_match(b.as_deref(), a.as_deref(), &rule)
        );
    }

    #[test]
    fn tolerance_is_monotonic(pred in -1.0e6..1.0e6f64, gold in -1.0e6..1.0e6f64, t1 in 0.0..0.2f64, bump in 0.0..0.2f64) {
        let p = format!("{pred:.3}");
        let g = format!("{gold:.3}");
        let narrow = MatchRule::with_tolerance(t1);
        let wide = MatchRule::with_tolerance(t1 + bump);
        if cells_match(Some(&p), Some(&g), &narrow) {
            prop_assert!(cells_match(Some(&p), Some(&g), &wide));
        }
    }

    #[test]
    fn normalization_is_idempotent(s in ".{0,24}") {
        prop_assert_eq!(normalize_text(&normalize_text(&s)), normalize_text(&s));
    }
}

fn evaluate_all(
    pred: &RelationalTable,
    gold: &RelationalTable,
) -> (tabgen::metrics::MetricTriple, tabgen::metrics::MetricTriple, tabgen::metrics::MetricTriple, u64) {
    let options = EvalOptions::default();
    let alignment = align_rows(pred, gold).expect("valid gold");
    let (keys, phi) = evaluate_keys(&alignment, pred, gold);
    let (non_keys, _) = evaluate_non_keys(&alignment, pred, gold, &options.rule);
    let (overall, _) = evaluate_table(&alignment, pred, gold, &options);
    (keys, non_keys, overall, phi)
}

#[test]
fn permutation_invariance_without_duplicate_keys() {
    let mut rng = test_rng(0xbeef);
    let mut tested = 0;
    while tested < 200 {
        let (pred, gold) = random_table_pair(&mut rng);
        // dedupe pred keys so the first-occurrence rule cannot bite
        let mut seen = std::collections::HashSet::new();
        let rows: Vec<Vec<CellValue>> = pred
            .rows()
            .iter()
            .filter(|_r| true)
            .enumerate()
            .filter(|(i, _)| seen.insert(pred.key_tuple(*i)))
            .map(|(_, r)| r.clone())
            .collect();
        let pred = RelationalTable::new(pred.columns().to_vec(), rows).unwrap();
        if pred.num_rows() < 2 {
            continue;
        }
        tested += 1;

        let base = evaluate_all(&pred, &gold);
        let mut shuffled_rows = pred.rows().to_vec();
        shuffled_rows.shuffle(&mut rng);
        let shuffled = RelationalTable::new(pred.columns().to_vec(), shuffled_rows).unwrap();
        let permuted = evaluate_all(&shuffled, &gold);
        assert_eq!(base, permuted, "metrics must ignore generated row order");
    }
}

#[test]
fn bounds_hold_on_random_pairs() {
    let mut rng = test_rng(0xcafe);
    for _ in 0..500 {
        let (pred, gold) = random_table_pair(&mut rng);
        let (keys, non_keys, overall, phi) = evaluate_all(&pred, &gold);
        assert!(phi <= gold.num_rows() as u64);
        assert!(phi <= pred.num_rows() as u64);
        for t in [keys, non_keys, overall] {
            assert!((0.0..=1.0).contains(&t.precision));
            assert!((0.0..=1.0).contains(&t.recall));
            assert!((0.0..=1.0).contains(&t.f1));
        }
    }
}

#[test]
fn key_recall_is_one_when_pred_covers_gold() {
    let mut rng = test_rng(0xfeed);
    let mut tested = 0;
    while tested < 100 {
        let (extra, gold) = random_table_pair(&mut rng);
        if gold.num_rows() == 0 {
            continue;
        }
        tested += 1;
        // pred = gold rows plus whatever extra rows were generated
        let mut rows = gold.rows().to_vec();
        rows.extend(extra.rows().iter().cloned());
        let pred = RelationalTable::new(gold.columns().to_vec(), rows).unwrap();
        let (keys, _, _, _) = evaluate_all(&pred, &gold);
        assert_eq!(keys.recall, 1.0, "pred contains every gold key");
    }
}

#[test]
fn duplicate_key_rows_only_hurt_precision() {
    let mut rng = test_rng(0xd00d);
    let mut tested = 0;
    while tested < 100 {
        let (pred, gold) = random_table_pair(&mut rng);
        if pred.num_rows() == 0 || pred.num_rows() >= 12 {
            continue;
        }
        let duplicate = pred.rows()[0].clone();
        if pred.key_tuple(0).as_key().is_none() {
            continue;
        }
        tested += 1;
        let (keys_before, non_keys_before, overall_before, _) = evaluate_all(&pred, &gold);

        let mut rows = pred.rows().to_vec();
        rows.push(duplicate);
        let bigger = RelationalTable::new(pred.columns().to_vec(), rows).unwrap();
        let (keys_after, non_keys_after, overall_after, _) = evaluate_all(&bigger, &gold);

        assert!(keys_after.precision <= keys_before.precision);
        assert_eq!(keys_after.recall, keys_before.recall);
        assert_eq!(non_keys_after.recall, non_keys_before.recall);
        assert_eq!(overall_after.recall, overall_before.recall);
        assert!(non_keys_after.precision <= non_keys_before.precision);
        assert!(overall_after.precision <= overall_before.precision);
    }
}

#[test]
fn correcting_a_wrong_cell_never_lowers_recall_or_f1() {
    let mut rng = test_rng(0xabcd);
    let rule = MatchRule::default();
    let mut tested = 0;
    while tested < 100 {
        let (pred, gold) = random_table_pair(&mut rng);
        let alignment = align_rows(&pred, &gold).unwrap();
        // find an aligned row with a wrong non-key cell
        let non_key: Vec<usize> = gold.non_key_indices();
        let target = alignment.pairs.iter().find_map(|&(p, g)| {
            non_key
                .iter()
                .find(|&&c| !cells_match(pred.cell(p, c), gold.cell(g, c), &rule))
                .map(|&c| (p, g, c))
        });
        let Some((p, g, c)) = target else { continue };
        tested += 1;

        let (_, non_keys_before, overall_before, _) = evaluate_all(&pred, &gold);
        let mut rows = pred.rows().to_vec();
        rows[p][c] = gold.rows()[g][c].clone();
        let fixed = RelationalTable::new(pred.columns().to_vec(), rows).unwrap();
        let (_, non_keys_after, overall_after, _) = evaluate_all(&fixed, &gold);

        assert!(non_keys_after.recall >= non_keys_before.recall);
        assert!(non_keys_after.f1 >= non_keys_before.f1);
        assert!(overall_after.recall >= overall_before.recall);
        assert!(overall_after.f1 >= overall_before.f1);
    }
}

proptest! {
    // Round-trip over arbitrary small benchmarks: save then load is identity.
    #[test]
    fn benchmark_round_trip(
        ids in proptest::collection::vec("[a-z][a-z0-9_]{0,8}", 1..4),
        seed in 0u64..1000
    ) {
        let mut rng = test_rng(seed);
        let mut instances = Vec::new();
        let mut used = std::collections::HashSet::new();
        for id in ids {
            if !used.insert(id.clone()) {
                continue;
            }
            let (_, gold) = random_table_pair(&mut rng);
            if gold.validate_gold().is_err() {
                continue;
            }
            instances.push(tabgen::BenchmarkInstance {
                id,
                description: "generated property-test table".to_string(),
                table: gold,
                popularity: 42.0,
                source_page: None,
                split: tabgen::Split::Eval,
            });
        }
        prop_assume!(!instances.is_empty());
        let benchmark = tabgen::Benchmark { instances };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        tabgen::save_benchmark(&benchmark, &path).unwrap();
        let loaded = tabgen::load_benchmark(&path).unwrap();
        prop_assert_eq!(loaded, benchmark);
    }
}

#[test]
fn fixture_manifest_self_check() {
    let manifest_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let benchmark = tabgen::load_benchmark(manifest_dir.join("fixtures/benchmark.json")).unwrap();
    let recorded: tabgen::benchmark::FixtureManifest = serde_json::from_str(
        &std::fs::read_to_string(manifest_dir.join("fixtures/manifest.json")).unwrap(),
    )
    .unwrap();
    let recomputed = tabgen::benchmark::compute_manifest(&benchmark);
    assert_eq!(recomputed, recorded, "fixtures/manifest.json is stale; regenerate with the fixture_manifest example");
}

#[test]
fn fig_style_fixture_has_composite_keys() {
    let manifest_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let benchmark = tabgen::load_benchmark(manifest_dir.join("fixtures/benchmark.json")).unwrap();
    let inst = benchmark.get("susen_tiedtke_achievements").unwrap();
    assert_eq!(inst.table.key_column_names(), vec!["year".to_string(), "competition".to_string()]);
    assert_eq!(inst.popularity, 8449.0);
    // the row the architecture example walks through
    let row = (0..inst.table.num_rows())
        .find(|&r| {
            inst.table.cell(r, 0) == Some("1987") && inst.table.cell(r, 1) == Some("European Junior")
        })
        .expect("fig-style row present");
    assert_eq!(inst.table.cell(row, 2), Some("Birmingham"));
    assert_eq!(inst.table.cell(row, 3), Some("3rd"));
}

#[test]
fn key_tuple_matches_spec_example() {
    let table = RelationalTable::new(
        vec![
            ColumnSpec::key("year", true),
            ColumnSpec::key("competition", false),
            ColumnSpec::non_key("venue", false),
        ],
        vec![vec![
            Some("1987".to_string()),
            Some("European Junior".to_string()),
            Some("Birmingham".to_string()),
        ]],
    )
    .unwrap();
    assert_eq!(
        table.key_tuple(0).as_key().unwrap(),
        &["1987".to_string(), "europeanjunior".to_string()]
    );
}
