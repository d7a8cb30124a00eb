/* C interface to the tabgen table-generation evaluation core. */

#ifndef TABGEN_H
#define TABGEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code for every FFI call.
typedef enum TabgenStatus {
  TABGEN_STATUS_OK = 0,
  // A required pointer argument was null.
  TABGEN_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  TABGEN_STATUS_INVALID_UTF8 = 2,
  // File could not be read or written.
  TABGEN_STATUS_IO = 3,
  // Input could not be parsed or validated.
  TABGEN_STATUS_PARSE = 4,
  // Unknown instance id or index out of range.
  TABGEN_STATUS_NOT_FOUND = 5,
  // Evaluation preconditions failed (for example schema mismatch).
  TABGEN_STATUS_EVALUATION = 6,
  // An internal invariant failed; see tabgen_last_error.
  TABGEN_STATUS_INTERNAL = 7,
} TabgenStatus;

// Opaque handle to a loaded benchmark.
typedef struct TabgenBenchmark TabgenBenchmark;

// Opaque handle to a cell-matching rule.
typedef struct TabgenMatchRule TabgenMatchRule;

// One table's evaluation, flattened for C callers. Triples are ordered
// recall, precision, F1.
typedef struct TabgenEvaluation {
  double keys_recall;
  double keys_precision;
  double keys_f1;
  double nonkeys_recall;
  double nonkeys_precision;
  double nonkeys_f1;
  double overall_recall;
  double overall_precision;
  double overall_f1;
  uint64_t phi;
  uint64_t psi;
  uint64_t tau;
  uint64_t pred_rows;
  uint64_t gold_rows;
  uint64_t pred_nonkey_cells;
  uint64_t gold_nonkey_cells;
  uint64_t pred_cells;
  uint64_t gold_cells;
} TabgenEvaluation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *tabgen_version(void);

// Message for the most recent error on this thread, or null. The pointer is
// valid until the next failing call on the same thread; do not free it.
const char *tabgen_last_error(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must have been returned by a tabgen function and not freed before.
void tabgen_string_free(char *s);

// Creates a match rule with the default tolerance, null aliases, and date
// formats.
struct TabgenMatchRule *tabgen_match_rule_new(void);

// Sets the relative numeric tolerance (anchored to the gold value).
//
// # Safety
// `rule` must be a live handle from `tabgen_match_rule_new`.
enum TabgenStatus tabgen_match_rule_set_tolerance(struct TabgenMatchRule *rule, double tolerance);

// Adds a text treated as null (compared after lowercasing and trimming).
//
// # Safety
// `rule` must be a live handle; `alias` a NUL-terminated string.
enum TabgenStatus tabgen_match_rule_add_null_alias(struct TabgenMatchRule *rule, const char *alias);

// When `fuzzy` is false, key cells of aligned rows count toward tau by
// alignment alone instead of being re-matched.
//
// # Safety
// `rule` must be a live handle.
enum TabgenStatus tabgen_match_rule_set_tau_fuzzy_keys(struct TabgenMatchRule *rule, bool fuzzy);

// # Safety
// `rule` must be a handle from `tabgen_match_rule_new`, not freed before.
void tabgen_match_rule_free(struct TabgenMatchRule *rule);

// Lowercases and strips every non-alphanumeric character. Returns a string
// the caller frees with `tabgen_string_free`, or null on error.
//
// # Safety
// `s` must be a NUL-terminated string.
char *tabgen_normalize_text(const char *s);

// Decides whether a generated cell matches a gold cell under the rule.
// Null pointers stand for null cells.
//
// # Safety
// `rule` must be a live handle; `pred`/`gold` null or NUL-terminated;
// `out` non-null.
enum TabgenStatus tabgen_cells_match(const struct TabgenMatchRule *rule,
                                     const char *pred,
                                     const char *gold,
                                     bool *out);

// Loads and validates a benchmark file into an opaque handle.
//
// # Safety
// `path` must be NUL-terminated; `out` non-null. The handle is freed with
// `tabgen_benchmark_free`.
enum TabgenStatus tabgen_benchmark_load(const char *path, struct TabgenBenchmark **out);

// Number of instances in the benchmark; 0 if the handle is null.
//
// # Safety
// `benchmark` must be null or a live handle.
size_t tabgen_benchmark_len(const struct TabgenBenchmark *benchmark);

// Returns the id of the instance at `index` as a string the caller frees
// with `tabgen_string_free`.
//
// # Safety
// `benchmark` must be a live handle; `out` non-null.
enum TabgenStatus tabgen_benchmark_instance_id(const struct TabgenBenchmark *benchmark,
                                               size_t index,
                                               char **out);

// # Safety
// `benchmark` must be a handle from `tabgen_benchmark_load`, not freed
// before.
void tabgen_benchmark_free(struct TabgenBenchmark *benchmark);

// Evaluates a generated table (JSON with "columns" and "rows", the same
// shape the pipeline writes under `tables/`) against one gold instance.
//
// # Safety
// `benchmark` and `rule` must be live handles; `instance_id` and
// `table_json` NUL-terminated; `out` non-null.
enum TabgenStatus tabgen_evaluate_table_json(const struct TabgenBenchmark *benchmark,
                                             const char *instance_id,
                                             const char *table_json,
                                             const struct TabgenMatchRule *rule,
                                             struct TabgenEvaluation *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TABGEN_H */
