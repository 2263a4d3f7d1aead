/* SPDX-FileCopyrightText: 2026 dpl contributors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API for the dpl library: prototype-based long-tailed classification
 * with semantic-diversity-aware unbiased inference.
 *
 * Conventions:
 *   - Every fallible call returns a dpl_status; DPL_OK is 0.
 *   - On failure, dpl_last_error() returns a thread-local message.
 *   - Objects are opaque handles released with their _free function.
 *   - Strings returned through char** are heap-allocated; release them
 *     with dpl_string_free().
 */

#ifndef DPL_DPL_H
#define DPL_DPL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DPL_API __declspec(dllexport)
#else
#define DPL_API __attribute__((visibility("default")))
#endif

typedef enum dpl_status {
  DPL_OK = 0,
  DPL_ERR_INVALID_ARGUMENT = 1, /* bad config, dimensions, indices, usage */
  DPL_ERR_FORMAT = 2,           /* malformed file content */
  DPL_ERR_IO = 3,               /* filesystem failure */
  DPL_ERR_NUMERIC = 4           /* non-finite values or failed checks */
} dpl_status;

typedef enum dpl_inference_mode {
  DPL_INFERENCE_BIASED = 0,
  DPL_INFERENCE_UNBIASED = 1
} dpl_inference_mode;

typedef struct dpl_dataset dpl_dataset;
typedef struct dpl_model dpl_model;

DPL_API const char* dpl_version(void);

/* Message for the most recent failure on this thread; never NULL. */
DPL_API const char* dpl_last_error(void);

DPL_API void dpl_string_free(char* str);

/* ---- datasets -------------------------------------------------------- */

/* Builds a dataset from a generator-spec JSON document. The document is
 * either a full spec (fine_means, fine_stddev, fine_counts,
 * fine_to_coarse, group_size, seed) or {"preset":"desk","seed":...} with
 * optional overrides. */
DPL_API dpl_status dpl_dataset_generate(const char* spec_json,
                                        dpl_dataset** out);

/* Returns the desk-preset generator spec as JSON. */
DPL_API dpl_status dpl_generator_spec_desk(uint64_t seed, char** out_json);

/* Loads CSV or DPLF binary; the format is sniffed from the content. */
DPL_API dpl_status dpl_dataset_load(const char* path, dpl_dataset** out);

/* Saves CSV when the path ends in ".csv", DPLF binary otherwise. */
DPL_API dpl_status dpl_dataset_save(const dpl_dataset* dataset,
                                    const char* path);

DPL_API dpl_status dpl_dataset_split(const dpl_dataset* dataset,
                                     double train_frac, uint64_t seed,
                                     dpl_dataset** out_train,
                                     dpl_dataset** out_test);

DPL_API int64_t dpl_dataset_size(const dpl_dataset* dataset);
DPL_API int32_t dpl_dataset_num_classes(const dpl_dataset* dataset);
DPL_API int32_t dpl_dataset_feature_dim(const dpl_dataset* dataset);

DPL_API void dpl_dataset_free(dpl_dataset* dataset);

/* ---- training and checkpoints ---------------------------------------- */

/* Trains a model from a run-config JSON document ({"preset":"desk"} or
 * explicit fields). When out_history_json is non-NULL it receives the
 * logged training records as JSON. */
DPL_API dpl_status dpl_train(const char* config_json,
                             const dpl_dataset* dataset, dpl_model** out,
                             char** out_history_json);

DPL_API dpl_status dpl_model_save(const dpl_model* model, const char* path);
DPL_API dpl_status dpl_model_load(const char* path, dpl_model** out);
DPL_API int32_t dpl_model_feature_dim(const dpl_model* model);
DPL_API int32_t dpl_model_num_classes(const dpl_model* model);
DPL_API void dpl_model_free(dpl_model* model);

/* ---- inference and evaluation ----------------------------------------- */

/* Classifies one feature vector. out_probs, when non-NULL, must hold
 * dpl_model_num_classes(model) doubles. */
DPL_API dpl_status dpl_predict(const dpl_model* model, const double* feature,
                               int32_t dim, dpl_inference_mode mode,
                               int32_t* out_class, double* out_probs);

/* Evaluates the model over a dataset in one mode; metrics as JSON.
 * topk <= 0 disables grouped top-K recall. */
DPL_API dpl_status dpl_evaluate(const dpl_model* model,
                                const dpl_dataset* dataset,
                                dpl_inference_mode mode, int32_t topk,
                                char** out_metrics_json);

/* Biased and unbiased evaluation side by side with per-class deltas. */
DPL_API dpl_status dpl_compare_modes(const dpl_model* model,
                                     const dpl_dataset* dataset, int32_t topk,
                                     char** out_report_json);

/* CSV export of prototypes (with sigma), projected features (with both
 * predictions) and samples_per_class optional drawn samples per class. */
DPL_API dpl_status dpl_export_embeddings(const dpl_model* model,
                                         const dpl_dataset* dataset,
                                         const char* path,
                                         int32_t samples_per_class,
                                         uint64_t sample_seed);

/* ---- built-in verification -------------------------------------------- */

/* Finite-difference check of every analytic gradient on the seeded
 * instance. Returns DPL_OK iff every (group, component) cell passes;
 * out_report_json (optional) receives the full report. */
DPL_API dpl_status dpl_grad_check(uint64_t seed, char** out_report_json);

/* Runs the built-in analytic-identity suite. DPL_OK iff all checks pass. */
DPL_API dpl_status dpl_verify(char** out_report_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DPL_DPL_H */
