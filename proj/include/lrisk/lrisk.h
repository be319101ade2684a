/* C interface to the lifting-risk pipeline. All functions return an
 * lrisk_status; on failure lrisk_last_error() describes the error for the
 * calling thread. Handles are opaque and released with the matching _free. */
#ifndef LRISK_H
#define LRISK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(LRISK_BUILDING)
#define LRISK_API __declspec(dllexport)
#else
#define LRISK_API __declspec(dllimport)
#endif
#else
#define LRISK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lrisk_status {
  LRISK_OK = 0,
  LRISK_ERR_INTERNAL = 1,
  LRISK_ERR_CONFIG = 2,   /* invalid or unknown configuration */
  LRISK_ERR_DATA = 3,     /* unreadable or malformed dataset or checkpoint */
  LRISK_ERR_DIVERGED = 4, /* non-finite training loss */
  LRISK_ERR_MISMATCH = 5, /* checkpoint and configuration disagree */
  LRISK_ERR_IO = 6,       /* cannot write an output */
  LRISK_ERR_ARGUMENT = 7, /* bad argument to an API call */
  LRISK_ERR_EXISTS = 8    /* output directory is not empty */
} lrisk_status;

#define LRISK_CLASS_COUNT 3
#define LRISK_SENSOR_COUNT 12

typedef struct lrisk_config lrisk_config;
typedef struct lrisk_model lrisk_model;
typedef struct lrisk_dataset lrisk_dataset;

LRISK_API const char* lrisk_version(void);
LRISK_API const char* lrisk_last_error(void);
LRISK_API const char* lrisk_status_name(lrisk_status status);
LRISK_API const char* lrisk_class_name(int class_index);
LRISK_API const char* lrisk_sensor_name(size_t sensor);
/* "low", "medium" or "high" to 0, 1, 2. */
LRISK_API lrisk_status lrisk_parse_class(const char* name, int* class_index);

/* Pipeline configuration. profile is "default", "desk" or NULL (default). */
LRISK_API lrisk_status lrisk_config_new(const char* profile, lrisk_config** out);
LRISK_API lrisk_status lrisk_config_load(const char* path, lrisk_config** out);
LRISK_API lrisk_status lrisk_config_parse(const char* text, lrisk_config** out);
LRISK_API lrisk_status lrisk_config_set(lrisk_config* config, const char* key, const char* value);
/* String outputs: writes up to cap bytes including the terminator; *needed
 * (optional) receives the full size including the terminator. */
LRISK_API lrisk_status lrisk_config_get(const lrisk_config* config, const char* key, char* buf,
                                        size_t cap, size_t* needed);
LRISK_API lrisk_status lrisk_config_text(const lrisk_config* config, char* buf, size_t cap,
                                         size_t* needed);
LRISK_API void lrisk_config_free(lrisk_config* config);

typedef struct lrisk_synth_summary {
  size_t trials;
  size_t class_counts[LRISK_CLASS_COUNT];
} lrisk_synth_summary;

/* Writes a synthetic dataset; profile is "default" or "desk". */
LRISK_API lrisk_status lrisk_synth(const char* out_dir, uint64_t seed, const char* profile, int force,
                                   lrisk_synth_summary* summary);

LRISK_API lrisk_status lrisk_dataset_load(const char* dir, lrisk_dataset** out);
LRISK_API size_t lrisk_dataset_size(const lrisk_dataset* dataset);
LRISK_API lrisk_status lrisk_dataset_class_counts(const lrisk_dataset* dataset,
                                                  size_t counts[LRISK_CLASS_COUNT]);
LRISK_API void lrisk_dataset_free(lrisk_dataset* dataset);

typedef struct lrisk_metrics {
  int64_t confusion[LRISK_CLASS_COUNT * LRISK_CLASS_COUNT]; /* [true][predicted] */
  double precision[LRISK_CLASS_COUNT];
  double recall[LRISK_CLASS_COUNT];
  double f_measure[LRISK_CLASS_COUNT];
  double accuracy;
  double rk;
  int rk_degenerate;
} lrisk_metrics;

typedef struct lrisk_train_summary {
  int epochs_run;
  int best_epoch;
  double best_loss;
  lrisk_metrics test;
} lrisk_train_summary;

typedef void (*lrisk_epoch_callback)(int epoch, double loss, double accuracy, void* user);

/* Full pipeline; writes the checkpoint plus .history.csv, .metrics.csv and
 * .split.csv beside it. callback and summary may be NULL. */
LRISK_API lrisk_status lrisk_train(const lrisk_config* config, const char* data_dir,
                                   const char* checkpoint, lrisk_epoch_callback callback, void* user,
                                   lrisk_train_summary* summary);

/* Evaluates on the test split. config (optional) is checked against the
 * checkpoint; out_csv (optional) receives the metrics CSV. */
LRISK_API lrisk_status lrisk_eval(const char* checkpoint, const char* data_dir,
                                  const lrisk_config* config, const char* out_csv,
                                  lrisk_metrics* metrics);

typedef struct lrisk_saliency_summary {
  size_t images;
  double sensor_totals[LRISK_SENSOR_COUNT];
  size_t ranking[LRISK_SENSOR_COUNT];
} lrisk_saliency_summary;

LRISK_API lrisk_status lrisk_saliency(const char* checkpoint, const char* data_dir, int class_index,
                                      const char* out_dir, const lrisk_config* config,
                                      lrisk_saliency_summary* summary);

typedef struct lrisk_tune_summary {
  size_t rows;
  size_t failed;
  size_t best_cell; /* valid when rows > failed */
  double best_rk;
} lrisk_tune_summary;

LRISK_API lrisk_status lrisk_tune(const lrisk_config* config, const char* data_dir,
                                  const char* grid_path, const char* out_csv, size_t parallel_cells,
                                  lrisk_tune_summary* summary);

LRISK_API lrisk_status lrisk_model_load(const char* checkpoint, lrisk_model** out);
LRISK_API lrisk_status lrisk_model_save(const lrisk_model* model, const char* checkpoint);
LRISK_API size_t lrisk_model_image_width(const lrisk_model* model);
LRISK_API size_t lrisk_model_image_height(const lrisk_model* model);
LRISK_API size_t lrisk_model_parameter_count(const lrisk_model* model);
LRISK_API void lrisk_model_free(lrisk_model* model);

/* K-category correlation of a k x k confusion matrix given row-major as
 * [true][predicted]. */
LRISK_API lrisk_status lrisk_rk(const int64_t* counts, size_t k, double* value, int* degenerate);

#ifdef __cplusplus
}
#endif

#endif
