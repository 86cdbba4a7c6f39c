#ifndef PEO_H
#define PEO_H

/* This file is generated by cbindgen from peo-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum PeoStatus {
  PEO_STATUS_OK = 0,
  PEO_STATUS_NULL_ARGUMENT = 1,
  PEO_STATUS_INVALID_UTF8 = 2,
  PEO_STATUS_IO_ERROR = 3,
  PEO_STATUS_PARSE_ERROR = 4,
  PEO_STATUS_INVALID_EXPRESSION = 5,
  PEO_STATUS_INTERNAL_ERROR = 6,
} PeoStatus;

/**
 * Pipeline state shared across conversions and queries.
 */
typedef struct PeoContext PeoContext;

/**
 * An assembled knowledge base plus the namespace it was built under.
 */
typedef struct PeoKb PeoKb;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a context with the bundled vocabulary and seed action mapping.
 *
 * `base_iri` may be NULL for the default base IRI. `action_map_path` may
 * be NULL for the bundled mapping.
 *
 * # Safety
 * `base_iri` and `action_map_path`, when non-NULL, must point to
 * NUL-terminated strings; `out` must be a valid pointer.
 */
enum PeoStatus peo_context_new(const char *base_iri,
                               const char *action_map_path,
                               struct PeoContext **out);

/**
 * Releases a context. NULL is ignored.
 *
 * # Safety
 * `ctx` must be NULL or a pointer returned by `peo_context_new` that has
 * not been freed yet.
 */
void peo_context_free(struct PeoContext *ctx);

/**
 * Builds a knowledge base from an EMBER-style JSON-Lines file.
 * Undecodable lines are skipped, mirroring the CLI's behavior.
 *
 * # Safety
 * `ctx` must be a live context, `path` a NUL-terminated string, `out` a
 * valid pointer.
 */
enum PeoStatus peo_kb_from_jsonl(const struct PeoContext *ctx,
                                 const char *path,
                                 struct PeoKb **out);

/**
 * Reconstructs a knowledge base from an ABox document emitted by this
 * toolkit (Turtle or N-Triples).
 *
 * # Safety
 * `ctx` must be a live context, `document` a NUL-terminated string, `out`
 * a valid pointer.
 */
enum PeoStatus peo_kb_from_document(const struct PeoContext *ctx,
                                    const char *document,
                                    struct PeoKb **out);

/**
 * Releases a knowledge base. NULL is ignored.
 *
 * # Safety
 * `kb` must be NULL or a pointer returned by a `peo_kb_*` constructor that
 * has not been freed yet.
 */
void peo_kb_free(struct PeoKb *kb);

/**
 * Number of PE file individuals in the knowledge base; 0 for NULL.
 *
 * # Safety
 * `kb` must be NULL or a live knowledge base handle.
 */
size_t peo_kb_file_count(const struct PeoKb *kb);

/**
 * Serializes the vocabulary (TBox) as Turtle into `out`.
 *
 * # Safety
 * `ctx` must be a live context and `out` a valid pointer.
 */
enum PeoStatus peo_tbox_turtle(const struct PeoContext *ctx, char **out);

/**
 * Serializes a knowledge base as Turtle (`ntriples` false) or N-Triples.
 * With `include_derived` false, derived-feature links are omitted.
 *
 * # Safety
 * `ctx` and `kb` must be live handles and `out` a valid pointer.
 */
enum PeoStatus peo_kb_serialize(const struct PeoContext *ctx,
                                const struct PeoKb *kb,
                                bool include_derived,
                                bool ntriples,
                                char **out);

/**
 * Emits the positive/negative examples sidecar JSON for a knowledge base.
 *
 * # Safety
 * `kb` must be a live handle and `out` a valid pointer.
 */
enum PeoStatus peo_kb_examples_json(const struct PeoKb *kb, char **out);

/**
 * Evaluates a class expression; the result is a JSON document with a
 * sorted `matches` array of PE file IRIs and, when `with_score` is set, a
 * `score` object computed against the knowledge base's labels.
 *
 * # Safety
 * `ctx` and `kb` must be live handles, `expression` a NUL-terminated
 * string, `out` a valid pointer.
 */
enum PeoStatus peo_query(const struct PeoContext *ctx,
                         const struct PeoKb *kb,
                         const char *expression,
                         bool with_score,
                         char **out);

/**
 * Last error message for this thread; empty until a call fails. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *peo_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer produced by a `peo_*` function that hands
 * ownership to the caller, not yet freed.
 */
void peo_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEO_H */
