/*
 * C interface to the mtml library.
 *
 * Objects are opaque handles created by mtml_*_create/load/generate calls and
 * released with the matching *_free. Every fallible call returns an
 * mtml_status; on failure mtml_last_error() describes the problem for the
 * calling thread until its next mtml call.
 */
#ifndef MTML_MTML_H
#define MTML_MTML_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MTML_BUILDING_LIBRARY)
#    define MTML_API __declspec(dllexport)
#  else
#    define MTML_API __declspec(dllimport)
#  endif
#else
#  define MTML_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtml_status {
  MTML_OK = 0,
  MTML_ERR_INVALID_ARGUMENT = 1,
  MTML_ERR_DEGENERATE_CAMERA = 2,
  MTML_ERR_INVALID_SAMPLE = 3,
  MTML_ERR_INSUFFICIENT_IDENTITIES = 4,
  MTML_ERR_PARSE = 5,
  MTML_ERR_UNSUPPORTED_VERSION = 6,
  MTML_ERR_SHAPE = 7,
  MTML_ERR_NO_SUCH_HEAD = 8,
  MTML_ERR_NUMERIC_FAILURE = 9,
  MTML_ERR_INCOMPATIBLE_CHECKPOINT = 10,
  MTML_ERR_LABEL_OUT_OF_RANGE = 11,
  MTML_ERR_EMPTY_BATCH = 12,
  MTML_ERR_EMPTY_IDENTITY = 13,
  MTML_ERR_STALE_ASSIGNMENT = 14,
  MTML_ERR_INCOMPATIBLE_ARTIFACTS = 15,
  MTML_ERR_IO = 16,
  MTML_ERR_MISSING_DUMPS = 17,
  MTML_ERR_MISSING_GROUND_TRUTH = 18,
  MTML_ERR_INTERNAL = 19
} mtml_status;

typedef struct mtml_dataset mtml_dataset;
typedef struct mtml_model mtml_model;

#define MTML_MAX_HIDDEN_LAYERS 8

typedef struct mtml_synth_config {
  int num_global_identities;
  int num_cameras;
  int feature_dim;
  int images_per_identity_per_camera;
  double camera_presence_probability;
  double cluster_spread;
  double camera_shift_scale;
  double camera_distortion;
  uint64_t seed;
} mtml_synth_config;

/* input_dim and head sizes are taken from the training dataset. */
typedef struct mtml_model_config {
  int num_hidden;
  int hidden_dims[MTML_MAX_HIDDEN_LAYERS];
  int feature_dim;
  double init_scale;
  uint64_t seed;
} mtml_model_config;

typedef struct mtml_train_config {
  double lambda_ml;
  double initial_lr;
  int pretrain_epochs;
  int pretrain_decay_every;
  double decay_factor;
  int ml_iterations;
  int epochs_per_iteration;
  int ml_decay_after_epoch;
  double ml_base_lr;
  int persons_per_camera;
  int images_per_person;
  int initial_association; /* bool */
  int mt_only;             /* bool */
  uint64_t seed;
} mtml_train_config;

typedef struct mtml_train_summary {
  int epochs_run;
  int association_rounds; /* rounds written as dumps */
  size_t final_pairs;
  double final_precision; /* negative when unknown */
  double final_mt_loss;
  double final_ml_loss;
} mtml_train_summary;

typedef struct mtml_eval_report {
  double r1;
  double r5;
  double r10;
  double r20;
  double map_score;
  int num_probes_evaluated;
  int num_probes_excluded;
} mtml_eval_report;

typedef struct mtml_dynamics_row {
  int round;
  size_t pairs;
  double precision; /* negative when undefined */
} mtml_dynamics_row;

typedef void (*mtml_log_fn)(const char* line, void* user);

MTML_API const char* mtml_last_error(void);
MTML_API const char* mtml_status_string(mtml_status status);
MTML_API const char* mtml_version(void);

MTML_API void mtml_synth_config_default(mtml_synth_config* config);
MTML_API void mtml_model_config_default(mtml_model_config* config);
MTML_API void mtml_train_config_default(mtml_train_config* config);

/* Datasets */
MTML_API mtml_status mtml_dataset_generate(const mtml_synth_config* config, mtml_dataset** out);
MTML_API mtml_status mtml_dataset_generate_split(const mtml_synth_config* config, int test_identities,
                                                 mtml_dataset** train_out, mtml_dataset** test_out);
MTML_API mtml_status mtml_dataset_load(const char* path, mtml_dataset** out);
MTML_API mtml_status mtml_dataset_save(const mtml_dataset* dataset, const char* path);
MTML_API void mtml_dataset_free(mtml_dataset* dataset);
MTML_API int mtml_dataset_num_cameras(const mtml_dataset* dataset);
MTML_API int mtml_dataset_feature_dim(const mtml_dataset* dataset);
MTML_API size_t mtml_dataset_num_samples(const mtml_dataset* dataset);
MTML_API int mtml_dataset_has_ground_truth(const mtml_dataset* dataset);
/* camera_id is 1-based; writes N_p and the camera's sample count. */
MTML_API mtml_status mtml_dataset_camera_info(const mtml_dataset* dataset, int camera_id, int* num_identities,
                                              size_t* num_samples);

/* Training: pretraining followed by the multi-label rounds. out_dir must exist
 * and receives metrics.csv, checkpoints and association dumps. out_model and
 * summary may be NULL; log may be NULL. */
MTML_API mtml_status mtml_train(const mtml_dataset* dataset, const mtml_model_config* model_config,
                                const mtml_train_config* train_config, const char* out_dir, mtml_log_fn log,
                                void* log_user, mtml_model** out_model, mtml_train_summary* summary);

/* Models */
MTML_API mtml_status mtml_model_load(const char* path, mtml_model** out);
MTML_API mtml_status mtml_model_save(const mtml_model* model, const char* path);
MTML_API void mtml_model_free(mtml_model* model);
MTML_API int mtml_model_input_dim(const mtml_model* model);
MTML_API int mtml_model_feature_dim(const mtml_model* model);
MTML_API int mtml_model_num_heads(const mtml_model* model);
/* features: count x input_dim row-major; out: count x feature_dim row-major. */
MTML_API mtml_status mtml_model_extract_features(const mtml_model* model, const double* features, size_t count,
                                                 double* out);

/* Evaluation: per-camera stratified probe/gallery split of dataset; writes
 * eval.csv and eval.txt (and distances.csv when dump_distances) into out_dir. */
MTML_API mtml_status mtml_evaluate(const mtml_model* model, const mtml_dataset* dataset, double probe_fraction,
                                   uint64_t seed, const char* out_dir, int dump_distances, mtml_eval_report* out);

/* Aggregates a run's association dumps; writes dynamics.csv and dynamics.txt
 * into out_dir. At most `capacity` rows are copied to rows (may be NULL);
 * *count receives the total number of rounds. */
MTML_API mtml_status mtml_dynamics(const char* run_dir, const char* out_dir, mtml_dynamics_row* rows,
                                   size_t capacity, size_t* count);

#ifdef __cplusplus
}
#endif

#endif /* MTML_MTML_H */
