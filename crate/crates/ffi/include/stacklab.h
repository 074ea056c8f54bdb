/*
 * Handles are opaque and owned by the caller once returned; release them
 * with the matching *_free function. Strings returned through out-parameters
 * are heap allocated and must be released with stacklab_string_free.
 * On any non-OK status, stacklab_last_error() describes the failure.
 */

#ifndef STACKLAB_H
#define STACKLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum StacklabStatus {
  STACKLAB_STATUS_OK = 0,
  STACKLAB_STATUS_NULL_POINTER = 1,
  STACKLAB_STATUS_INVALID_UTF8 = 2,
  STACKLAB_STATUS_INVALID_INPUT = 3,
  STACKLAB_STATUS_INFEASIBLE = 4,
  STACKLAB_STATUS_PARSE = 5,
  STACKLAB_STATUS_IO = 6,
  STACKLAB_STATUS_INTERNAL = 7,
} StacklabStatus;

/**
 * Opaque catalog of stable stacks.
 */
typedef struct StacklabCatalog StacklabCatalog;

/**
 * Opaque scenario handle.
 */
typedef struct StacklabScenario StacklabScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *stacklab_last_error(void);

/**
 * Library version as a static string.
 */
const char *stacklab_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void stacklab_string_free(char *s);

/**
 * Parses and validates a scenario from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum StacklabStatus stacklab_scenario_from_json(const char *json, struct StacklabScenario **out);

/**
 * Samples scenario `index` of the default generator with `master_seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum StacklabStatus stacklab_scenario_generate(uint64_t master_seed,
                                               uint64_t index,
                                               struct StacklabScenario **out);

/**
 * # Safety
 * `s` must be a live scenario handle; `out` must be writable.
 */
enum StacklabStatus stacklab_scenario_to_json(const struct StacklabScenario *s, char **out);

/**
 * # Safety
 * `s` must be a live scenario handle; `out` must be writable.
 */
enum StacklabStatus stacklab_scenario_box_count(const struct StacklabScenario *s, uintptr_t *out);

/**
 * Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void stacklab_scenario_free(struct StacklabScenario *s);

/**
 * Simulates every stacking order with the default physics parameters.
 *
 * # Safety
 * `s` must be a live scenario handle; `out` must be writable.
 */
enum StacklabStatus stacklab_catalog_enumerate(const struct StacklabScenario *s,
                                               struct StacklabCatalog **out);

/**
 * Number of completed stable stacks.
 *
 * # Safety
 * `c` must be a live catalog handle; `out` must be writable.
 */
enum StacklabStatus stacklab_catalog_completed_count(const struct StacklabCatalog *c,
                                                     uintptr_t *out);

/**
 * Best stable stack for comma-separated preferences such as
 * `"weight,size"`. The stack is written bottom-to-top as `"box3,box2,box1"`.
 *
 * # Safety
 * `c` must be a live catalog handle, `prefs` NUL-terminated, and both
 * out-pointers writable.
 */
enum StacklabStatus stacklab_catalog_best(const struct StacklabCatalog *c,
                                          const char *prefs,
                                          char **out_stack,
                                          double *out_score);

/**
 * # Safety
 * `c` must come from this library and not be freed twice.
 */
void stacklab_catalog_free(struct StacklabCatalog *c);

/**
 * Edit distance between two comma-separated id sequences.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated; `out` must be writable.
 */
enum StacklabStatus stacklab_levenshtein(const char *a, const char *b, uintptr_t *out);

/**
 * Parses plan text and writes its canonical rendering, e.g.
 * `"stack box2, stack box1"` becomes `"stack box2; stack box1"`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum StacklabStatus stacklab_parse_plan(const char *text, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STACKLAB_H */
