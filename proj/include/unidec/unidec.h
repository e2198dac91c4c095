/*
 * Copyright 2026 The UniDEC Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to libunidec. All objects are opaque handles owned by the
 * caller and released with the matching *_destroy function. Every call that
 * can fail returns a unidec_status; on failure unidec_last_error() holds a
 * message for the calling thread until its next failing call. */

#ifndef UNIDEC_UNIDEC_H_
#define UNIDEC_UNIDEC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UNIDEC_API __declspec(dllexport)
#else
#define UNIDEC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum unidec_status {
  UNIDEC_OK = 0,
  UNIDEC_ERR_INVALID_ARGUMENT = 1,
  UNIDEC_ERR_CONFIG = 2,
  UNIDEC_ERR_IO = 3,
  UNIDEC_ERR_FORMAT = 4,
  UNIDEC_ERR_NUMERIC = 5,
  UNIDEC_ERR_DEGENERATE = 6,
  UNIDEC_ERR_INTERNAL = 7
} unidec_status;

typedef struct unidec_config unidec_config;
typedef struct unidec_dataset unidec_dataset;
typedef struct unidec_model unidec_model;
typedef struct unidec_predictions unidec_predictions;

UNIDEC_API const char* unidec_version(void);
UNIDEC_API const char* unidec_status_string(unidec_status status);
UNIDEC_API const char* unidec_last_error(void);

/* Strings returned through char** outputs are heap copies. */
UNIDEC_API void unidec_string_free(char* s);

/* ---- configuration ---- */

/* Static registry of known keys; index in [0, unidec_config_key_count()).
 * Out-of-range indices return NULL. */
UNIDEC_API size_t unidec_config_key_count(void);
UNIDEC_API const char* unidec_config_key_name(size_t index);
UNIDEC_API const char* unidec_config_key_type(size_t index);
UNIDEC_API const char* unidec_config_key_default(size_t index);
UNIDEC_API const char* unidec_config_key_help(size_t index);

UNIDEC_API unidec_status unidec_config_create(unidec_config** out);
UNIDEC_API void unidec_config_destroy(unidec_config* config);
/* Unknown keys and unparsable values fail with UNIDEC_ERR_CONFIG. */
UNIDEC_API unidec_status unidec_config_set(unidec_config* config, const char* key, const char* value);
/* *value stays valid until the key is set again or the config is destroyed. */
UNIDEC_API unidec_status unidec_config_get(const unidec_config* config, const char* key, const char** value);
UNIDEC_API unidec_status unidec_config_load_file(unidec_config* config, const char* path);

/* ---- datasets ---- */

/* Loads the training split selected by format / queries / labels /
 * query_texts (or synth_* for format=synth). */
UNIDEC_API unidec_status unidec_dataset_load(const unidec_config* config, unidec_dataset** out);
/* Loads the eval_queries split. *out is set to NULL when none is configured. */
UNIDEC_API unidec_status unidec_dataset_load_eval(const unidec_config* config, unidec_dataset** out);
UNIDEC_API void unidec_dataset_destroy(unidec_dataset* dataset);
UNIDEC_API size_t unidec_dataset_num_instances(const unidec_dataset* dataset);
UNIDEC_API size_t unidec_dataset_num_labels(const unidec_dataset* dataset);
/* Instances whose relevance row was empty. */
UNIDEC_API size_t unidec_dataset_num_warnings(const unidec_dataset* dataset);

/* ---- training and models ---- */

/* Trains on `train` and writes output_dir/{model.bin, model.json,
 * train_log.jsonl}. `eval` may be NULL. */
UNIDEC_API unidec_status unidec_train(const unidec_config* config, const unidec_dataset* train,
                                      const unidec_dataset* eval, unidec_model** out);

/* Writes the binary checkpoint at `path` and a JSON sidecar next to it
 * (extension replaced by .json). `config` may be NULL. */
UNIDEC_API unidec_status unidec_model_save(const unidec_model* model, const unidec_config* config,
                                           const char* path);
UNIDEC_API unidec_status unidec_model_load(const char* path, unidec_model** out);
UNIDEC_API void unidec_model_destroy(unidec_model* model);
UNIDEC_API unidec_status unidec_model_dims(const unidec_model* model, size_t* vocab, size_t* encoder,
                                           size_t* head, size_t* labels);
/* Fails with UNIDEC_ERR_CONFIG when a dimension key set explicitly in
 * `config` disagrees with the checkpoint, or when `dataset` (may be NULL)
 * has a different label count. */
UNIDEC_API unidec_status unidec_model_check(const unidec_model* model, const unidec_config* config,
                                            const unidec_dataset* dataset);

/* ---- inference ---- */

/* Top-k labels for every instance text of `dataset`, using the `mode` and
 * `k` keys of `config`. */
UNIDEC_API unidec_status unidec_predict(const unidec_model* model, const unidec_dataset* dataset,
                                        const unidec_config* config, unidec_predictions** out);
UNIDEC_API void unidec_predictions_destroy(unidec_predictions* predictions);
UNIDEC_API size_t unidec_predictions_num_queries(const unidec_predictions* predictions);
UNIDEC_API size_t unidec_predictions_depth(const unidec_predictions* predictions, size_t query);
UNIDEC_API unidec_status unidec_predictions_get(const unidec_predictions* predictions, size_t query,
                                                size_t rank, uint32_t* label, double* score);
/* TSV columns: query_id, rank (from 1), label_id, score. */
UNIDEC_API unidec_status unidec_predictions_write_tsv(const unidec_predictions* predictions, const char* path);
/* num_queries = 0 sizes the set by the largest query id present. */
UNIDEC_API unidec_status unidec_predictions_read_tsv(const char* path, size_t num_queries,
                                                     unidec_predictions** out);

/* ---- evaluation and batch statistics ---- */

/* P@k and PSP@k for the k_list key. Propensities use the label frequencies
 * of `propensity_source` (NULL means `truth`). */
UNIDEC_API unidec_status unidec_evaluate(const unidec_predictions* predictions, const unidec_dataset* truth,
                                         const unidec_dataset* propensity_source, const unidec_config* config,
                                         char** json_out);

/* One clustering + collation pass per (sim_betas x sim_etas) pair with
 * ceil(N / batch_size) batches. Embeddings come from `model`, or from a
 * freshly initialized model when NULL. */
UNIDEC_API unidec_status unidec_simulate_batches(const unidec_model* model, const unidec_dataset* dataset,
                                                 const unidec_config* config, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif /* UNIDEC_UNIDEC_H_ */
