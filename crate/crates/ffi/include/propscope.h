#ifndef PROPSCOPE_H
#define PROPSCOPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_ARGUMENT = 1,
  PS_STATUS_INVALID_UTF8 = 2,
  PS_STATUS_INVALID_INPUT = 3,
  PS_STATUS_NOT_FOUND = 4,
  PS_STATUS_UNDEFINED = 5,
  PS_STATUS_PANIC = 6,
} PsStatus;

/**
 * A narrative taxonomy and technique catalog pair.
 */
typedef struct PsLabelSpace PsLabelSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *ps_last_error(void);

/**
 * Library version as a static string.
 */
const char *ps_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be freed twice.
 */
void ps_string_free(char *s);

/**
 * Creates a label space from the bundled taxonomy and catalog.
 *
 * # Safety
 * `out_space` must be a valid pointer.
 */
enum PsStatus ps_label_space_bundled(struct PsLabelSpace **out_space);

/**
 * Creates a label space from taxonomy and catalog JSON documents.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_space` must be valid.
 */
enum PsStatus ps_label_space_from_json(const char *taxonomy_json,
                                       const char *catalog_json,
                                       struct PsLabelSpace **out_space);

/**
 * Destroys a label space. NULL is ignored.
 *
 * # Safety
 * `space` must come from a constructor above and must not be used afterwards.
 */
void ps_label_space_free(struct PsLabelSpace *space);

/**
 * Resolves a label to its canonical form.
 *
 * `kind` is one of "bias", "narrative" or "technique"; `event` ("CAA" or
 * "FARMERS") is required for narratives and ignored otherwise. Writes the
 * canonical id (or bias label) to `out_label`.
 *
 * # Safety
 * Pointers must be valid; `event` may be NULL unless `kind` is "narrative".
 */
enum PsStatus ps_resolve_label(const struct PsLabelSpace *space,
                               const char *kind,
                               const char *event,
                               const char *raw,
                               char **out_label);

/**
 * Fleiss' kappa over a row-major `items` x `categories` count matrix.
 * Returns `Undefined` when every rating falls in one category.
 *
 * # Safety
 * `counts` must point to `items * categories` values; `out_kappa` must be valid.
 */
enum PsStatus ps_fleiss_kappa(const size_t *counts,
                              size_t items,
                              size_t categories,
                              double *out_kappa);

/**
 * Multi-label precision/recall/F1.
 *
 * Input: `{"gold": [[...], ...], "pred": [[...], ...], "universe": [...]}`.
 * Output: micro/macro/weighted averages and per-label rows as JSON.
 *
 * # Safety
 * `request_json` must be NUL-terminated; `out_json` must be valid.
 */
enum PsStatus ps_multilabel_scores(const char *request_json, char **out_json);

/**
 * Removes URL, title and near-duplicate-content duplicates from a JSONL
 * corpus. A `threshold` of 0 selects the default.
 *
 * Output: `{"kept": "<jsonl>", "removed": [{duplicate_id, kept_id, reason, similarity?}, ...]}`.
 *
 * # Safety
 * Pointers must be valid and `jsonl` NUL-terminated.
 */
enum PsStatus ps_dedup_jsonl(const struct PsLabelSpace *space,
                             const char *jsonl,
                             double threshold,
                             char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROPSCOPE_H */
