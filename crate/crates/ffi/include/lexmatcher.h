#ifndef LEXMATCHER_H
#define LEXMATCHER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Scale of the numbers in a score file.
 */
typedef enum LmScoreScale {
  /**
   * Scores in [0, 1].
   */
  LM_SCORE_SCALE_UNIT = 0,
  /**
   * Scores in [0, 100].
   */
  LM_SCORE_SCALE_PERCENT = 1,
} LmScoreScale;

/**
 * Result code of every fallible call.
 */
typedef enum LmStatus {
  LM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  LM_STATUS_INVALID_UTF8 = 2,
  /**
   * A file could not be read or written.
   */
  LM_STATUS_IO = 3,
  /**
   * An input file was malformed or the corpus sides were misaligned.
   */
  LM_STATUS_MALFORMED_INPUT = 4,
  /**
   * A parameter or configuration value was rejected.
   */
  LM_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The library panicked; the handle arguments are left untouched.
   */
  LM_STATUS_PANIC = 6,
  LM_STATUS_INTERNAL = 7,
} LmStatus;

/**
 * A parallel corpus together with the language tools for its pair.
 */
typedef struct LmCorpus LmCorpus;

typedef struct LmLexicon LmLexicon;

/**
 * The result of one retrieval run.
 */
typedef struct LmRetrieval LmRetrieval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null if
 * none occurred. The pointer stays valid until the next failing call on
 * the same thread; do not free it.
 */
const char *lm_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library that has not been
 * freed yet.
 */
void lm_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lm_version(void);

/**
 * Loads a line-aligned corpus. `langs` is a pair such as `"en-zh"`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be null or
 * point to writable storage for one pointer.
 */
enum LmStatus lm_corpus_load(const char *source_path,
                             const char *target_path,
                             const char *langs,
                             struct LmCorpus **out);

/**
 * Attaches one quality score per line from `scores_path`.
 *
 * # Safety
 * `corpus` must be null or a live corpus handle; `scores_path` must be
 * null or NUL-terminated.
 */
enum LmStatus lm_corpus_attach_scores(struct LmCorpus *corpus,
                                      const char *scores_path,
                                      enum LmScoreScale scale);

/**
 * Number of sentence pairs in the corpus.
 *
 * # Safety
 * `corpus` must be null or a live corpus handle; `out` must be null or
 * writable.
 */
enum LmStatus lm_corpus_len(const struct LmCorpus *corpus, size_t *out);

/**
 * Applies the filter pipeline and returns the retained pairs as a new
 * corpus. `config_json` may be null for the defaults. If `report_json` is
 * not null it receives the filter report as JSON.
 *
 * # Safety
 * `corpus` must be null or a live corpus handle; `config_json` must be
 * null or NUL-terminated; `out` and `report_json` must be null or
 * writable.
 */
enum LmStatus lm_corpus_filter(const struct LmCorpus *corpus,
                               const char *config_json,
                               struct LmCorpus **out,
                               char **report_json);

/**
 * # Safety
 * `corpus` must be null or a handle not freed before.
 */
void lm_corpus_free(struct LmCorpus *corpus);

/**
 * Loads a tab-separated bilingual dictionary. `max_segment_len` bounds the
 * number of source tokens of entity entries merged later; pass 0 for the
 * default of 8.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be null or
 * writable.
 */
enum LmStatus lm_lexicon_load(const char *dictionary_path,
                              const char *langs,
                              size_t max_segment_len,
                              struct LmLexicon **out);

/**
 * Merges aligned entity titles (`source<TAB>target` per line).
 *
 * # Safety
 * `lexicon` must be null or a live lexicon handle; `titles_path` must be
 * null or NUL-terminated.
 */
enum LmStatus lm_lexicon_merge_entities(struct LmLexicon *lexicon, const char *titles_path);

/**
 * Number of sense entries in the lexicon.
 *
 * # Safety
 * `lexicon` must be null or a live lexicon handle; `out` must be null or
 * writable.
 */
enum LmStatus lm_lexicon_len(const struct LmLexicon *lexicon, size_t *out);

/**
 * # Safety
 * `lexicon` must be null or a handle not freed before.
 */
void lm_lexicon_free(struct LmLexicon *lexicon);

/**
 * Selects the sentence pairs that give each sense up to `k` contexts.
 * With `rank` non-zero, pairs are visited by descending quality score.
 * The corpus and lexicon must cover the same language pair.
 *
 * # Safety
 * Handles must be null or live; `out` must be null or writable.
 */
enum LmStatus lm_retrieve(const struct LmCorpus *corpus,
                          const struct LmLexicon *lexicon,
                          int64_t k,
                          int32_t rank,
                          struct LmRetrieval **out);

/**
 * Number of selected sentence pairs.
 *
 * # Safety
 * `retrieval` must be null or a live handle; `out` must be null or
 * writable.
 */
enum LmStatus lm_retrieval_subset_len(const struct LmRetrieval *retrieval, size_t *out);

/**
 * Copies the original line indices of the selected pairs, in selection
 * order, into `buf`. At most `capacity` values are written; `written`
 * receives the number copied. Call with `capacity` 0 to query nothing.
 *
 * # Safety
 * `buf` must be null (only if `capacity` is 0) or valid for `capacity`
 * writes; `written` must be null or writable.
 */
enum LmStatus lm_retrieval_subset_indices(const struct LmRetrieval *retrieval,
                                          size_t *buf,
                                          size_t capacity,
                                          size_t *written);

/**
 * Final count of lexicon entry `entry`, in lexicon order.
 *
 * # Safety
 * `retrieval` must be null or a live handle; `out` must be null or
 * writable.
 */
enum LmStatus lm_retrieval_count(const struct LmRetrieval *retrieval, size_t entry, uint32_t *out);

/**
 * The coverage report as a JSON string; release with [`lm_string_free`].
 *
 * # Safety
 * `retrieval` must be null or a live handle; `out` must be null or
 * writable.
 */
enum LmStatus lm_retrieval_coverage_json(const struct LmRetrieval *retrieval, char **out);

/**
 * # Safety
 * `retrieval` must be null or a handle not freed before.
 */
void lm_retrieval_free(struct LmRetrieval *retrieval);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEXMATCHER_H */
