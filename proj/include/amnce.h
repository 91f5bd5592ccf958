/*
 * C API for the adaptive multi-stage contrastive estimation library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions return AMNCE_OK on success; on failure they return a nonzero
 * status and amnce_last_error() describes the problem (thread-local).
 */
#ifndef AMNCE_H
#define AMNCE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum amnce_status {
    AMNCE_OK = 0,
    AMNCE_ERROR_INVALID_ARGUMENT = 1,
    AMNCE_ERROR_IO = 2,
    AMNCE_ERROR_FORMAT = 3,
    AMNCE_ERROR_NUMERIC = 4,
    AMNCE_ERROR_STATE = 5
} amnce_status;

typedef struct amnce_config amnce_config;
typedef struct amnce_dataset amnce_dataset;
typedef struct amnce_model amnce_model;

const char* amnce_last_error(void);
const char* amnce_version(void);

/* ---- run configuration (flat key = value text; '#' comments) ---- */

amnce_status amnce_config_create(amnce_config** out);
amnce_status amnce_config_load(const char* path, amnce_config** out);
amnce_status amnce_config_parse(const char* text, amnce_config** out);
amnce_status amnce_config_set(amnce_config* cfg, const char* key, const char* value);
/* Writes the value into buf (NUL terminated); fails if cap is too small. */
amnce_status amnce_config_get(const amnce_config* cfg, const char* key, char* buf, size_t cap);
void amnce_config_free(amnce_config* cfg);

/* ---- datasets ---- */

/* labels_path may be NULL or empty for unlabeled image data. */
amnce_status amnce_dataset_load_idx(const char* images_path, const char* labels_path,
                                    amnce_dataset** out);
/* kind: ring | two_spirals | gaussian_grid */
amnce_status amnce_dataset_synth(const char* kind, int64_t n, uint64_t seed, amnce_dataset** out);
/* Builds the dataset named by the config (synth or idx, heldout filter applied). */
amnce_status amnce_dataset_from_config(const amnce_config* cfg, amnce_dataset** out);
int64_t amnce_dataset_size(const amnce_dataset* ds);
int64_t amnce_dataset_dim(const amnce_dataset* ds);
int amnce_dataset_has_labels(const amnce_dataset* ds);
amnce_status amnce_dataset_labels(const amnce_dataset* ds, int* out, int64_t cap);
amnce_status amnce_dataset_examples(const amnce_dataset* ds, double* out, int64_t cap);
/* keep != 0 keeps only `label` rows; keep == 0 drops them. */
amnce_status amnce_dataset_filter_label(const amnce_dataset* ds, int label, int keep,
                                        amnce_dataset** out);
amnce_status amnce_dataset_slice(const amnce_dataset* ds, int64_t start, int64_t count,
                                 amnce_dataset** out);
void amnce_dataset_free(amnce_dataset* ds);

/* ---- training ---- */

/* Full run per the config schedule. log_csv_path may be NULL. */
amnce_status amnce_train(const amnce_config* cfg, const amnce_dataset* data, const char* log_csv_path,
                         amnce_model** out);
/* Stops after stop_iter iterations without freezing the in-progress stage. */
amnce_status amnce_train_until(const amnce_config* cfg, const amnce_dataset* data, uint64_t stop_iter,
                               const char* log_csv_path, amnce_model** out);
/* Continues a partial run to completion of its original schedule. */
amnce_status amnce_resume(amnce_model* model, const amnce_dataset* data, const char* log_csv_path);

/* ---- model io and queries ---- */

amnce_status amnce_model_save(const amnce_model* m, const char* path);
amnce_status amnce_model_load(const char* path, amnce_model** out);
int amnce_model_num_stages(const amnce_model* m);
uint64_t amnce_model_iteration(const amnce_model* m);
int64_t amnce_model_latent_dim(const amnce_model* m);
int64_t amnce_model_data_dim(const amnce_model* m);
/* which: 0 = generator, 1 = prior (all stage estimators). */
int64_t amnce_model_param_count(const amnce_model* m, int which);
/* Returns the config echo stored in the model. */
amnce_status amnce_model_config(const amnce_model* m, char* buf, size_t cap);
void amnce_model_free(amnce_model* m);

/* ---- inference ---- */

/*
 * Draws `count` latents from the learned prior and decodes them into out_x
 * (count * data_dim doubles). method: "langevin" (steps/step_size) or "sir"
 * (sir_proposals). With method=langevin and steps=0 the latents are raw
 * N(0, I) draws.
 */
amnce_status amnce_sample(const amnce_model* m, const char* method, int64_t count, int64_t steps,
                          double step_size, int64_t sir_proposals, uint64_t seed, double* out_x,
                          int64_t cap);

/* Posterior reconstruction; out_x (optional) receives decoded examples. */
amnce_status amnce_reconstruct(const amnce_model* m, const amnce_dataset* data, int64_t steps,
                               double step_size, uint64_t seed, double* out_x, int64_t cap,
                               double* out_mse);

/* Log joint density at a short-run posterior sample; higher = more normal. */
amnce_status amnce_anomaly_scores(const amnce_model* m, const amnce_dataset* data, int64_t steps,
                                  double step_size, int64_t chains, uint64_t seed, double* out_scores,
                                  int64_t cap);

/* Average precision with is_anomalous as the positive class, ranked by
 * ascending log joint score. */
amnce_status amnce_auprc(const double* log_joint_scores, const int* is_anomalous, int64_t n,
                         double* out);

/* ---- artifacts ---- */

/* Binary PGM (P5) grid; x holds count rows of width*height values in [-1, 1]. */
amnce_status amnce_write_pgm_grid(const double* x, int64_t count, int64_t width, int64_t height,
                                  int64_t grid_cols, const char* path);

/* ---- desk benchmarks ---- */

/* Finite-difference validation over random MLP configurations. */
amnce_status amnce_gradcheck(uint64_t seed, int64_t num_configs, double* out_max_rel_err);

/* Trains one ratio estimator between N(0,I) and N((1,1),I) in 2-D and reports
 * the mean absolute error of the learned log ratio against the closed form. */
amnce_status amnce_ratio_benchmark(uint64_t seed, int64_t train_samples, int64_t eval_points,
                                   double* out_mae);

#ifdef __cplusplus
}
#endif

#endif /* AMNCE_H */
