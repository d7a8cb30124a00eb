//! C ABI for the matching and evaluation core, so other languages can score
//! generated tables against gold benchmarks without reimplementing the
//! metrics.
//!
//! Conventions: every function returns a `TabgenStatus`; results come back
//! through out-pointers. Benchmarks and match rules are opaque handles freed
//! with their `_free` functions. Strings returned by the library are freed
//! with `tabgen_string_free`. `tabgen_last_error` describes the most recent
//! failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tabgen::matching::{cells_match, normalize_text, MatchRule};
use tabgen::metrics::{evaluate_instance, EvalOptions};
use tabgen::table::RelationalTable;
use tabgen::Benchmark;

/// Result code for every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabgenStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File could not be read or written.
    Io = 3,
    /// Input could not be parsed or validated.
    Parse = 4,
    /// Unknown instance id or index out of range.
    NotFound = 5,
    /// Evaluation preconditions failed (for example schema mismatch).
    Evaluation = 6,
    /// An internal invariant failed; see tabgen_last_error.
    Internal = 7,
}

/// Opaque handle to a loaded benchmark.
pub struct TabgenBenchmark {
    inner: Benchmark,
}

/// Opaque handle to a cell-matching rule.
pub struct TabgenMatchRule {
    inner: MatchRule,
    tau_fuzzy_keys: bool,
}

/// One table's evaluation, flattened for C callers. Triples are ordered
/// recall, precision, F1.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabgenEvaluation {
    pub keys_recall: f64,
    pub keys_precision: f64,
    pub keys_f1: f64,
    pub nonkeys_recall: f64,
    pub nonkeys_precision: f64,
    pub nonkeys_f1: f64,
    pub overall_recall: f64,
    pub overall_precision: f64,
    pub overall_f1: f64,
    pub phi: u64,
    pub psi: u64,
    pub tau: u64,
    pub pred_rows: u64,
    pub gold_rows: u64,
    pub pred_nonkey_cells: u64,
    pub gold_nonkey_cells: u64,
    pub pred_cells: u64,
    pub gold_cells: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn guard<F: FnOnce() -> TabgenStatus>(f: F) -> TabgenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            TabgenStatus::Internal
        }
    }
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn utf8_arg<'a>(s: *const c_char) -> Result<Option<&'a str>, TabgenStatus> {
    if s.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(s).to_str() {
        Ok(v) => Ok(Some(v)),
        Err(_) => {
            set_error("argument is not valid UTF-8");
            Err(TabgenStatus::InvalidUtf8)
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tabgen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread, or null. The pointer is
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn tabgen_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(s) => s.as_ptr(),
        None => ptr::null(),
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must have been returned by a tabgen function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn tabgen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a match rule with the default tolerance, null aliases, and date
/// formats.
#[no_mangle]
pub extern "C" fn tabgen_match_rule_new() -> *mut TabgenMatchRule {
    Box::into_raw(Box::new(TabgenMatchRule { inner: MatchRule::default(), tau_fuzzy_keys: true }))
}

/// Sets the relative numeric tolerance (anchored to the gold value).
///
/// # Safety
/// `rule` must be a live handle from `tabgen_match_rule_new`.
#[no_mangle]
pub unsafe extern "C" fn tabgen_match_rule_set_tolerance(
    rule: *mut TabgenMatchRule,
    tolerance: f64,
) -> TabgenStatus {
    guard(|| {
        let Some(rule) = rule.as_mut() else {
            set_error("rule is null");
            return TabgenStatus::NullArgument;
        };
        if tolerance.is_nan() || tolerance < 0.0 {
            set_error("tolerance must be non-negative");
            return TabgenStatus::Parse;
        }
        rule.inner.numeric_rel_tolerance = tolerance;
        TabgenStatus::Ok
    })
}

/// Adds a text treated as null (compared after lowercasing and trimming).
///
/// # Safety
/// `rule` must be a live handle; `alias` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tabgen_match_rule_add_null_alias(
    rule: *mut TabgenMatchRule,
    alias: *const c_char,
) -> TabgenStatus {
    guard(|| {
        let Some(rule) = rule.as_mut() else {
            set_error("rule is null");
            return TabgenStatus::NullArgument;
        };
        let alias = match utf8_arg(alias) {
            Ok(Some(a)) => a,
            Ok(None) => {
                set_error("alias is null");
                return TabgenStatus::NullArgument;
            }
            Err(status) => return status,
        };
        rule.inner.nullish_aliases.push(alias.to_string());
        TabgenStatus::Ok
    })
}

/// When `fuzzy` is false, key cells of aligned rows count toward tau by
/// alignment alone instead of being re-matched.
///
/// # Safety
/// `rule` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tabgen_match_rule_set_tau_fuzzy_keys(
    rule: *mut TabgenMatchRule,
    fuzzy: bool,
) -> TabgenStatus {
    guard(|| {
        let Some(rule) = rule.as_mut() else {
            set_error("rule is null");
            return TabgenStatus::NullArgument;
        };
        rule.tau_fuzzy_keys = fuzzy;
        TabgenStatus::Ok
    })
}

/// # Safety
/// `rule` must be a handle from `tabgen_match_rule_new`, not freed before.
#[no_mangle]
pub unsafe extern "C" fn tabgen_match_rule_free(rule: *mut TabgenMatchRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Lowercases and strips every non-alphanumeric character. Returns a string
/// the caller frees with `tabgen_string_free`, or null on error.
///
/// # Safety
/// `s` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tabgen_normalize_text(s: *const c_char) -> *mut c_char {
    let Ok(Some(text)) = utf8_arg(s) else {
        return ptr::null_mut();
    };
    match CString::new(normalize_text(text)) {
        Ok(out) => out.into_raw(),
        Err(_) => ptr::null_mut(),
    }
}

/// Decides whether a generated cell matches a gold cell under the rule.
/// Null pointers stand for null cells.
///
/// # Safety
/// `rule` must be a live handle; `pred`/`gold` null or NUL-terminated;
/// `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn tabgen_cells_match(
    rule: *const TabgenMatchRule,
    pred: *const c_char,
    gold: *const c_char,
    out: *mut bool,
) -> TabgenStatus {
    guard(|| {
        let Some(rule) = rule.as_ref() else {
            set_error("rule is null");
            return TabgenStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out is null");
            return TabgenStatus::NullArgument;
        }
        let pred = match utf8_arg(pred) {
            Ok(v) => v,
            Err(status) => return status,
        };
        let gold = match utf8_arg(gold) {
            Ok(v) => v,
            Err(status) => return status,
        };
        *out = cells_match(pred, gold, &rule.inner);
        TabgenStatus::Ok
    })
}

/// Loads and validates a benchmark file into an opaque handle.
///
/// # Safety
/// `path` must be NUL-terminated; `out` non-null. The handle is freed with
/// `tabgen_benchmark_free`.
#[no_mangle]
pub unsafe extern "C" fn tabgen_benchmark_load(
    path: *const c_char,
    out: *mut *mut TabgenBenchmark,
) -> TabgenStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return TabgenStatus::NullArgument;
        }
        let path = match utf8_arg(path) {
            Ok(Some(p)) => p,
            Ok(None) => {
                set_error("path is null");
                return TabgenStatus::NullArgument;
            }
            Err(status) => return status,
        };
        match tabgen::load_benchmark(path) {
            Ok(benchmark) => {
                *out = Box::into_raw(Box::new(TabgenBenchmark { inner: benchmark }));
                TabgenStatus::Ok
            }
            Err(e @ tabgen::benchmark::BenchmarkError::Read { .. }) => {
                set_error(e.to_string());
                TabgenStatus::Io
            }
            Err(e) => {
                set_error(e.to_string());
                TabgenStatus::Parse
            }
        }
    })
}

/// Number of instances in the benchmark; 0 if the handle is null.
///
/// # Safety
/// `benchmark` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tabgen_benchmark_len(benchmark: *const TabgenBenchmark) -> usize {
    benchmark.as_ref().map(|b| b.inner.instances.len()).unwrap_or(0)
}

/// Returns the id of the instance at `index` as a string the caller frees
/// with `tabgen_string_free`.
///
/// # Safety
/// `benchmark` must be a live handle; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn tabgen_benchmark_instance_id(
    benchmark: *const TabgenBenchmark,
    index: usize,
    out: *mut *mut c_char,
) -> TabgenStatus {
    guard(|| {
        let Some(benchmark) = benchmark.as_ref() else {
            set_error("benchmark is null");
            return TabgenStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out is null");
            return TabgenStatus::NullArgument;
        }
        match benchmark.inner.instances.get(index) {
            Some(inst) => match CString::new(inst.id.clone()) {
                Ok(s) => {
                    *out = s.into_raw();
                    TabgenStatus::Ok
                }
                Err(_) => {
                    set_error("instance id contains a NUL byte");
                    TabgenStatus::Internal
                }
            },
            None => {
                set_error(format!(
                    "index {index} out of range ({} instances)",
                    benchmark.inner.instances.len()
                ));
                TabgenStatus::NotFound
            }
        }
    })
}

/// # Safety
/// `benchmark` must be a handle from `tabgen_benchmark_load`, not freed
/// before.
#[no_mangle]
pub unsafe extern "C" fn tabgen_benchmark_free(benchmark: *mut TabgenBenchmark) {
    if !benchmark.is_null() {
        drop(Box::from_raw(benchmark));
    }
}

/// Evaluates a generated table (JSON with "columns" and "rows", the same
/// shape the pipeline writes under `tables/`) against one gold instance.
///
/// # Safety
/// `benchmark` and `rule` must be live handles; `instance_id` and
/// `table_json` NUL-terminated; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn tabgen_evaluate_table_json(
    benchmark: *const TabgenBenchmark,
    instance_id: *const c_char,
    table_json: *const c_char,
    rule: *const TabgenMatchRule,
    out: *mut TabgenEvaluation,
) -> TabgenStatus {
    guard(|| {
        let Some(benchmark) = benchmark.as_ref() else {
            set_error("benchmark is null");
            return TabgenStatus::NullArgument;
        };
        let Some(rule) = rule.as_ref() else {
            set_error("rule is null");
            return TabgenStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out is null");
            return TabgenStatus::NullArgument;
        }
        let id = match utf8_arg(instance_id) {
            Ok(Some(v)) => v,
            Ok(None) => {
                set_error("instance_id is null");
                return TabgenStatus::NullArgument;
            }
            Err(status) => return status,
        };
        let json = match utf8_arg(table_json) {
            Ok(Some(v)) => v,
            Ok(None) => {
                set_error("table_json is null");
                return TabgenStatus::NullArgument;
            }
            Err(status) => return status,
        };
        let Some(instance) = benchmark.inner.get(id) else {
            set_error(format!("no instance {id:?} in benchmark"));
            return TabgenStatus::NotFound;
        };
        let pred: RelationalTable = match serde_json::from_str(json) {
            Ok(table) => table,
            Err(e) => {
                set_error(format!("table_json: {e}"));
                return TabgenStatus::Parse;
            }
        };
        let options = EvalOptions { rule: rule.inner.clone(), tau_fuzzy_keys: rule.tau_fuzzy_keys };
        match evaluate_instance(&pred, instance, &options, None) {
            Ok(ev) => {
                *out = TabgenEvaluation {
                    keys_recall: ev.keys.recall,
                    keys_precision: ev.keys.precision,
                    keys_f1: ev.keys.f1,
                    nonkeys_recall: ev.non_keys.recall,
                    nonkeys_precision: ev.non_keys.precision,
                    nonkeys_f1: ev.non_keys.f1,
                    overall_recall: ev.overall.recall,
                    overall_precision: ev.overall.precision,
                    overall_f1: ev.overall.f1,
                    phi: ev.phi,
                    psi: ev.psi,
                    tau: ev.tau,
                    pred_rows: ev.pred_rows,
                    gold_rows: ev.gold_rows,
                    pred_nonkey_cells: ev.pred_non_key_cells,
                    gold_nonkey_cells: ev.gold_non_key_cells,
                    pred_cells: ev.pred_cells,
                    gold_cells: ev.gold_cells,
                };
                TabgenStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                TabgenStatus::Evaluation
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn fixture_benchmark() -> *mut TabgenBenchmark {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/benchmark.json");
        let mut handle: *mut TabgenBenchmark = ptr::null_mut();
        let status = unsafe { tabgen_benchmark_load(cstr(path).as_ptr(), &mut handle) };
        assert_eq!(status, TabgenStatus::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(tabgen_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn cells_match_through_the_abi() {
        let rule = tabgen_match_rule_new();
        let mut out = false;
        unsafe {
            let a = cstr("100.05");
            let b = cstr("100");
            assert_eq!(tabgen_cells_match(rule, a.as_ptr(), b.as_ptr(), &mut out), TabgenStatus::Ok);
            assert!(out);
            let c = cstr("100.2");
            assert_eq!(tabgen_cells_match(rule, c.as_ptr(), b.as_ptr(), &mut out), TabgenStatus::Ok);
            assert!(!out);
            // null pointer stands for a null cell; nullish text matches it
            let na = cstr("n/a");
            assert_eq!(tabgen_cells_match(rule, na.as_ptr(), ptr::null(), &mut out), TabgenStatus::Ok);
            assert!(out);
            tabgen_match_rule_free(rule);
        }
    }

    #[test]
    fn tolerance_and_alias_setters_apply() {
        let rule = tabgen_match_rule_new();
        let mut out = false;
        unsafe {
            assert_eq!(tabgen_match_rule_set_tolerance(rule, 0.01), TabgenStatus::Ok);
            let a = cstr("101");
            let b = cstr("100");
            tabgen_cells_match(rule, a.as_ptr(), b.as_ptr(), &mut out);
            assert!(out, "1% off matches at 1% tolerance");
            assert_eq!(tabgen_match_rule_set_tolerance(rule, -1.0), TabgenStatus::Parse);

            let alias = cstr("missing");
            assert_eq!(tabgen_match_rule_add_null_alias(rule, alias.as_ptr()), TabgenStatus::Ok);
            let m = cstr("MISSING ");
            tabgen_cells_match(rule, m.as_ptr(), ptr::null(), &mut out);
            assert!(out);
            tabgen_match_rule_free(rule);
        }
    }

    #[test]
    fn normalize_round_trip() {
        unsafe {
            let input = cstr("Los Angeles!");
            let out = tabgen_normalize_text(input.as_ptr());
            assert!(!out.is_null());
            assert_eq!(CStr::from_ptr(out).to_str().unwrap(), "losangeles");
            tabgen_string_free(out);
        }
    }

    #[test]
    fn benchmark_load_and_ids() {
        let handle = fixture_benchmark();
        unsafe {
            let len = tabgen_benchmark_len(handle);
            assert!(len >= 10);
            let mut id: *mut c_char = ptr::null_mut();
            assert_eq!(tabgen_benchmark_instance_id(handle, 0, &mut id), TabgenStatus::Ok);
            assert_eq!(CStr::from_ptr(id).to_str().unwrap(), "susen_tiedtke_achievements");
            tabgen_string_free(id);
            assert_eq!(
                tabgen_benchmark_instance_id(handle, 9999, &mut id),
                TabgenStatus::NotFound
            );
            assert!(!tabgen_last_error().is_null());
            tabgen_benchmark_free(handle);
        }
    }

    #[test]
    fn load_errors_are_coded() {
        let mut handle: *mut TabgenBenchmark = ptr::null_mut();
        unsafe {
            let missing = cstr("/nonexistent/benchmark.json");
            assert_eq!(tabgen_benchmark_load(missing.as_ptr(), &mut handle), TabgenStatus::Io);
            assert_eq!(
                tabgen_benchmark_load(ptr::null(), &mut handle),
                TabgenStatus::NullArgument
            );
        }
    }

    #[test]
    fn evaluate_perfect_table_through_the_abi() {
        let handle = fixture_benchmark();
        let rule = tabgen_match_rule_new();
        // the gold table itself, serialized the way the pipeline writes tables/<id>.json
        let benchmark = tabgen::load_benchmark(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../core/fixtures/benchmark.json"
        ))
        .unwrap();
        let inst = benchmark.get("susen_tiedtke_achievements").unwrap();
        let table_json = serde_json::to_string(&inst.table).unwrap();

        let mut out = TabgenEvaluation {
            keys_recall: -1.0,
            keys_precision: -1.0,
            keys_f1: -1.0,
            nonkeys_recall: -1.0,
            nonkeys_precision: -1.0,
            nonkeys_f1: -1.0,
            overall_recall: -1.0,
            overall_precision: -1.0,
            overall_f1: -1.0,
            phi: 0,
            psi: 0,
            tau: 0,
            pred_rows: 0,
            gold_rows: 0,
            pred_nonkey_cells: 0,
            gold_nonkey_cells: 0,
            pred_cells: 0,
            gold_cells: 0,
        };
        unsafe {
            let id = cstr("susen_tiedtke_achievements");
            let json = cstr(&table_json);
            let status = tabgen_evaluate_table_json(handle, id.as_ptr(), json.as_ptr(), rule, &mut out);
            assert_eq!(status, TabgenStatus::Ok);
            assert_eq!(out.overall_f1, 1.0);
            assert_eq!(out.keys_f1, 1.0);
            assert_eq!(out.phi, 14);
            assert_eq!(out.gold_cells, 56);

            let bad = cstr("not json");
            assert_eq!(
                tabgen_evaluate_table_json(handle, id.as_ptr(), bad.as_ptr(), rule, &mut out),
                TabgenStatus::Parse
            );
            let unknown = cstr("missing_instance");
            assert_eq!(
                tabgen_evaluate_table_json(handle, unknown.as_ptr(), json.as_ptr(), rule, &mut out),
                TabgenStatus::NotFound
            );
            tabgen_match_rule_free(rule);
            tabgen_benchmark_free(handle);
        }
    }
}
