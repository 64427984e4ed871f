#ifndef SYMREC_H
#define SYMREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SymrecStatus {
  SYMREC_STATUS_OK = 0,
  SYMREC_STATUS_NULL_ARGUMENT = 1,
  SYMREC_STATUS_INVALID_UTF8 = 2,
  SYMREC_STATUS_INVALID_ARGUMENT = 3,
  SYMREC_STATUS_LOAD = 4,
  SYMREC_STATUS_PARSE = 5,
  SYMREC_STATUS_CLASSIFY = 6,
  SYMREC_STATUS_PANIC = 7,
} SymrecStatus;

/**
 * Opaque loaded recognizer.
 */
typedef struct SymrecRecognizer SymrecRecognizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on this thread.
 */
const char *symrec_last_error(void);

/**
 * Library version as a static string.
 */
const char *symrec_version(void);

/**
 * Loads a recognizer bundle (file or directory) into `*out`.
 *
 * # Safety
 *
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SymrecStatus symrec_recognizer_load(const char *path, struct SymrecRecognizer **out);

/**
 * Releases a recognizer. Null is ignored.
 *
 * # Safety
 *
 * `handle` must come from [`symrec_recognizer_load`] and not be used again.
 */
void symrec_recognizer_free(struct SymrecRecognizer *handle);

/**
 * Number of symbols the recognizer distinguishes.
 *
 * # Safety
 *
 * `handle` must be a live recognizer and `out` a valid pointer.
 */
enum SymrecStatus symrec_recognizer_symbol_count(const struct SymrecRecognizer *handle,
                                                 size_t *out);

/**
 * Classifies a recording given as a JSON stroke array. `*out` receives the
 * `[{"<id>": p}, ...]` list of at most `k` (1 to 10) hypotheses.
 *
 * # Safety
 *
 * `handle` must be a live recognizer, `recording_json` a NUL-terminated
 * string and `out` a valid pointer.
 */
enum SymrecStatus symrec_classify_json(const struct SymrecRecognizer *handle,
                                       const char *recording_json,
                                       size_t k,
                                       char **out);

/**
 * Greedy time warping distance between two recordings given as JSON stroke
 * arrays, each flattened to one point sequence.
 *
 * # Safety
 *
 * Both strings must be NUL-terminated and `out` a valid pointer.
 */
enum SymrecStatus symrec_gtw_distance(const char *a_json, const char *b_json, double *out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 *
 * `s` must come from this library and not be used again.
 */
void symrec_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYMREC_H */
