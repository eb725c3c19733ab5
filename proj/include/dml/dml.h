/*
 * C interface to the adaptive tree/network ensemble library.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns a dml_status; on
 * failure, dml_last_error() describes the error for the calling thread until
 * the next failing call on that thread.
 */
#ifndef DML_DML_H
#define DML_DML_H

#include <stddef.h>
#include <stdint.h>

#if defined(DML_BUILDING_LIBRARY)
#define DML_API __attribute__((visibility("default")))
#else
#define DML_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dml_status {
  DML_OK = 0,
  DML_ERR_INVALID_INPUT = 1,
  DML_ERR_UNDEFINED_METRIC = 2,
  DML_ERR_DIVERGED = 3,
  DML_ERR_UNSUPPORTED_FORMAT = 4,
  DML_ERR_PARSE = 5,
  DML_ERR_SCHEMA = 6,
  DML_ERR_IO = 7,
  DML_ERR_INTERNAL = 8
} dml_status;

typedef struct dml_dataset dml_dataset;
typedef struct dml_config dml_config;
typedef struct dml_model dml_model;

DML_API const char* dml_last_error(void);
DML_API const char* dml_status_name(dml_status status);
DML_API int dml_model_format_version(void);

/* ---- datasets ---------------------------------------------------------- */

/* Flags for dml_dataset_read_csv. */
#define DML_CSV_TARGET_OPTIONAL 1u /* file may lack the target column */
#define DML_CSV_ALLOW_EMPTY 2u     /* header-only file is accepted */

DML_API dml_status dml_dataset_read_csv(const char* path, const char* target_column,
                                        unsigned flags, dml_dataset** out);
DML_API dml_status dml_dataset_write_csv(const dml_dataset* data, const char* path,
                                         const char* target_column);
/* kind: "linear", "tree" or "two-regime". */
DML_API dml_status dml_dataset_synth(const char* kind, size_t rows, double noise_std,
                                     uint64_t seed, dml_dataset** out);
/* Seeded permutation split; train gets floor(rows * train_fraction) rows. */
DML_API dml_status dml_dataset_split(const dml_dataset* data, double train_fraction,
                                     uint64_t seed, dml_dataset** train, dml_dataset** test);
DML_API size_t dml_dataset_rows(const dml_dataset* data);
DML_API size_t dml_dataset_cols(const dml_dataset* data);
DML_API int dml_dataset_has_target(const dml_dataset* data);
DML_API const char* dml_dataset_feature_name(const dml_dataset* data, size_t column);
/* Pointer to dml_dataset_cols() values; valid until the dataset is freed. */
DML_API const double* dml_dataset_row(const dml_dataset* data, size_t row);
DML_API double dml_dataset_target(const dml_dataset* data, size_t row);
DML_API void dml_dataset_free(dml_dataset* data);

/* ---- configuration ------------------------------------------------------ */

/* A new configuration holds the reference defaults. */
DML_API dml_status dml_config_new(dml_config** out);
DML_API void dml_config_free(dml_config* config);
DML_API dml_status dml_config_set(dml_config* config, const char* key, const char* value);
/* Flat key=value lines, '#' comments. Unknown keys are rejected. */
DML_API dml_status dml_config_load_file(dml_config* config, const char* path);
DML_API size_t dml_config_entry_count(const dml_config* config);
/* Effective value of entry i. Strings stay valid until the next call that
 * modifies the configuration. */
DML_API dml_status dml_config_entry(const dml_config* config, size_t index, const char** key,
                                    const char** value);
DML_API double dml_config_train_fraction(const dml_config* config);
DML_API uint64_t dml_config_seed(const dml_config* config);

/* ---- training and persistence ------------------------------------------ */

typedef void (*dml_progress_fn)(const char* phase, const char* message, void* user);

/* Three-phase training. progress may be NULL. */
DML_API dml_status dml_train(const dml_dataset* train, const dml_config* config,
                             dml_progress_fn progress, void* user, dml_model** out);
DML_API dml_status dml_model_save(const dml_model* model, const char* path);
DML_API dml_status dml_model_load(const char* path, dml_model** out);
DML_API void dml_model_free(dml_model* model);
DML_API size_t dml_model_input_dim(const dml_model* model);
DML_API const char* dml_model_feature_name(const dml_model* model, size_t column);

/* ---- inference ---------------------------------------------------------- */

typedef struct dml_prediction {
  double prediction;
  double y_xgb;
  double y_nn;
  double p_xgb;
  double p_nn;
  double p_hybrid;
  double w_xgb;
  double w_nn;
  double c_xgb;
  double c_nn;
} dml_prediction;

/* importance may be NULL; otherwise it receives `dim` fused importances. */
DML_API dml_status dml_predict(const dml_model* model, const double* x, size_t dim,
                               dml_prediction* out, double* importance);

typedef struct dml_metrics {
  double rmse;
  double mae;
  double r2;
} dml_metrics;

/* Row order of dml_evaluate's output. */
enum { DML_ROW_GBRT = 0, DML_ROW_NN = 1, DML_ROW_AVERAGE = 2, DML_ROW_DML = 3 };

DML_API dml_status dml_evaluate(const dml_model* model, const dml_dataset* test,
                                dml_metrics out[4]);

typedef struct dml_selection_stats {
  size_t count;
  double mean[3];   /* xgb, nn, hybrid */
  double stddev[3]; /* population */
  size_t argmax_count[3];
  double argmax_share[3];
} dml_selection_stats;

/* Selection statistics over `data`; importance (nullable) receives the mean
 * fused importance vector, dml_model_input_dim() entries. */
DML_API dml_status dml_inspect(const dml_model* model, const dml_dataset* data,
                               dml_selection_stats* out, double* importance);

#ifdef __cplusplus
}
#endif

#endif /* DML_DML_H */
