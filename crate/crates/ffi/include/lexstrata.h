/* SPDX-License-Identifier: Apache-2.0 */

#ifndef LEXSTRATA_H
#define LEXSTRATA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LxStatus {
  LX_STATUS_OK = 0,
  LX_STATUS_NULL_ARGUMENT = 1,
  LX_STATUS_INVALID_UTF8 = 2,
  LX_STATUS_IO = 3,
  LX_STATUS_PARSE = 4,
  LX_STATUS_INVALID_INPUT = 5,
  LX_STATUS_SINGLE_CLASS = 6,
  LX_STATUS_CONFIG = 7,
  LX_STATUS_UNDEFINED = 8,
  LX_STATUS_BUFFER_TOO_SMALL = 9,
  LX_STATUS_PANIC = 10,
} LxStatus;

// Feature-set selector.
typedef enum LxVariant {
  LX_VARIANT_MODEL_A = 0,
  LX_VARIANT_MODEL_B = 1,
  LX_VARIANT_ABLATED = 2,
  LX_VARIANT_PURE = 3,
} LxVariant;

// A wordlist after cognate subtraction.
typedef struct LxCorpus LxCorpus;

// A classifier trained on a corpus, with the statistics it was trained on.
typedef struct LxModel LxModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or an empty string.
// Valid until the next failing call on the same thread.
const char *lx_last_error(void);

// Library version as a static NUL-terminated string.
const char *lx_version(void);

// Loads a form table and applies cognate subtraction. Every path except
// `forms_path` may be null. The handle must be released with
// [`lx_corpus_free`].
//
// # Safety
// Non-null string arguments must be valid NUL-terminated strings and `out`
// must be a valid pointer.
enum LxStatus lx_corpus_load(const char *forms_path,
                             const char *loans_path,
                             const char *rescues_path,
                             const char *swadesh_path,
                             const char *domains_path,
                             struct LxCorpus **out);

// Releases a corpus handle. Null is ignored.
//
// # Safety
// `corpus` must come from [`lx_corpus_load`] and not be used afterwards.
void lx_corpus_free(struct LxCorpus *corpus);

// Number of forms.
//
// # Safety
// Pointers must be valid.
enum LxStatus lx_corpus_len(const struct LxCorpus *corpus, size_t *out);

// Number of forms left unexplained after subtraction.
//
// # Safety
// Pointers must be valid.
enum LxStatus lx_corpus_residual_count(const struct LxCorpus *corpus, size_t *out);

// Residual percentage for one language (loans excluded from the
// denominator).
//
// # Safety
// Pointers must be valid; `language` NUL-terminated.
enum LxStatus lx_corpus_residual_rate(const struct LxCorpus *corpus,
                                      const char *language,
                                      double *out);

// Repeated stratified k-fold CV of the gradient-boosted classifier.
// Seeds are `seed, seed + 1, ..., seed + n_seeds - 1`.
//
// # Safety
// Pointers must be valid.
enum LxStatus lx_cv_auc(const struct LxCorpus *corpus,
                        enum LxVariant variant,
                        uint32_t k,
                        uint32_t n_seeds,
                        uint64_t seed,
                        double *mean_out,
                        double *sd_out);

// Trains the gradient-boosted classifier on the whole corpus. Release with
// [`lx_model_free`].
//
// # Safety
// Pointers must be valid.
enum LxStatus lx_model_train(const struct LxCorpus *corpus,
                             enum LxVariant variant,
                             uint64_t seed,
                             struct LxModel **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from [`lx_model_train`] and not be used afterwards.
void lx_model_free(struct LxModel *model);

// Writes one probability per corpus form, in corpus order, into `out`
// (capacity `len`). Languages unseen in training get the reserved code.
//
// # Safety
// Pointers must be valid and `out` must hold `len` doubles.
enum LxStatus lx_model_predict(const struct LxModel *model,
                               const struct LxCorpus *corpus,
                               double *out,
                               size_t len);

// Cohen's kappa from the four quadrant counts.
//
// # Safety
// `out` must be valid.
enum LxStatus lx_cohen_kappa(uint64_t cs, uint64_t ca, uint64_t ro, uint64_t mo, double *out);

// Unit-cost edit distance divided by the longer length.
//
// # Safety
// Strings must be valid and NUL-terminated; `out` must be valid.
enum LxStatus lx_norm_levenshtein(const char *a, const char *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEXSTRATA_H */
