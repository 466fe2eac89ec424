#ifndef LECTRANK_H
#define LECTRANK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of values written by [`lectrank_content_features`].
 */
#define LECTRANK_CONTENT_FEATURE_COUNT 13

/**
 * Status codes returned by fallible functions.
 */
typedef enum {
  LECTRANK_STATUS_OK = 0,
  LECTRANK_STATUS_NULL_ARGUMENT = 1,
  LECTRANK_STATUS_INVALID_UTF8 = 2,
  LECTRANK_STATUS_PARSE_ERROR = 3,
  LECTRANK_STATUS_IO_ERROR = 4,
  LECTRANK_STATUS_SHAPE_MISMATCH = 5,
  LECTRANK_STATUS_FEATURE_ERROR = 6,
  LECTRANK_STATUS_BUFFER_TOO_SMALL = 7,
} LectrankStatus;

/**
 * Opaque handle to a trained model.
 */
typedef struct LectrankModel LectrankModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on the calling thread. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *lectrank_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lectrank_version(void);

/**
 * Deserialize a model from its JSON form. Returns null on failure; consult
 * [`lectrank_last_error_message`].
 *
 * # Safety
 * `json` must be a NUL-terminated string valid for the duration of the call.
 */
LectrankModel *lectrank_model_load_json(const char *json);

/**
 * Load a model.json file from disk. Returns null on failure.
 *
 * # Safety
 * `path` must be a NUL-terminated string valid for the duration of the call.
 */
LectrankModel *lectrank_model_load_file(const char *path);

/**
 * Number of input features the model expects.
 *
 * # Safety
 * `model` must be null or a pointer returned by a `lectrank_model_load_*`
 * function that has not been freed.
 */
size_t lectrank_model_feature_count(const LectrankModel *model);

/**
 * Copy the NUL-terminated name of feature `index` into `buf`.
 *
 * # Safety
 * `model` must be a live handle; `buf` must point to `buf_len` writable
 * bytes.
 */
LectrankStatus lectrank_model_feature_name(const LectrankModel *model,
                                           size_t index,
                                           char *buf,
                                           size_t buf_len);

/**
 * Predict the engagement target for one raw (unscaled) feature row laid out
 * in the model's feature order. Writes the prediction to `out`.
 *
 * # Safety
 * `model` must be a live handle, `features` must point to `len` doubles,
 * and `out` must be writable.
 */
LectrankStatus lectrank_model_predict(const LectrankModel *model,
                                      const double *features,
                                      size_t len,
                                      double *out);

/**
 * Release a model handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a pointer returned by a `lectrank_model_load_*`
 * function, and must not be used afterwards.
 */
void lectrank_model_free(LectrankModel *model);

/**
 * Extract the 13 content features from raw transcript text using the
 * built-in lexicons, in the canonical column order. `published_days` is the
 * lecture's publication date as days since 1970-01-01 and is passed through
 * as the final feature.
 *
 * # Safety
 * `transcript` and `title` must be NUL-terminated strings; `out` must point
 * to at least `out_len >= 13` writable doubles.
 */
LectrankStatus lectrank_content_features(const char *transcript,
                                         const char *title,
                                         int64_t published_days,
                                         double *out,
                                         size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LECTRANK_H */
