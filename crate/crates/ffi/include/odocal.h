#ifndef ODOCAL_H
#define ODOCAL_H

/* Generated from the odocal-ffi crate; regenerate with `cargo build -p odocal-ffi`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result category of an odocal call.
 */
typedef enum {
  /**
   * Success; outputs are valid.
   */
  ODOCAL_STATUS_OK = 0,
  /**
   * Invalid input: bad arguments, unreadable or malformed files,
   * dimension mismatches.
   */
  ODOCAL_STATUS_INVALID = 2,
  /**
   * A numerical failure such as a covariance that cannot be factorized.
   */
  ODOCAL_STATUS_NUMERICAL = 3,
} OdocalStatus;

/**
 * A displacement dataset loaded from CSV. Opaque.
 */
typedef struct OdocalDataset OdocalDataset;

/**
 * A trained calibration model. Opaque.
 */
typedef struct OdocalModel OdocalModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, as a
 * nul-terminated string. Empty after a successful call. The pointer stays
 * valid until the next odocal call on the same thread.
 */
const char *odocal_last_error(void);

/**
 * Read a displacement dataset CSV into a new handle.
 *
 * On success `*out` owns the dataset; release it with
 * [`odocal_dataset_free`].
 *
 * # Safety
 * `path` must be a valid nul-terminated string and `out` a valid pointer.
 */
OdocalStatus odocal_dataset_read_csv(const char *path, OdocalDataset **out);

/**
 * Release a dataset handle. Passing null is a no-op.
 *
 * # Safety
 * `dataset` must be a handle from this library, freed at most once.
 */
void odocal_dataset_free(OdocalDataset *dataset);

/**
 * Number of displacement samples in the dataset; 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle from this library.
 */
uintptr_t odocal_dataset_len(const OdocalDataset *dataset);

/**
 * Number of tick columns (wheels) in the dataset; 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle from this library.
 */
uintptr_t odocal_dataset_tick_dim(const OdocalDataset *dataset);

/**
 * Train a model on a dataset.
 *
 * `kind` is one of `cgp_zero_rbf`, `cgp_lin_rbf`, `cgp_zero_lin`,
 * `cgp_zero_sum`, `cgp_lin_sum`, `linear_huber`. `seed` drives the
 * hyperparameter-search restarts. On success `*out` owns the model;
 * release it with [`odocal_model_free`].
 *
 * # Safety
 * `dataset` must be a live handle, `kind` a valid nul-terminated string,
 * and `out` a valid pointer.
 */
OdocalStatus odocal_train(const OdocalDataset *dataset,
                          const char *kind,
                          uint64_t seed,
                          OdocalModel **out);

/**
 * Write a model snapshot to a JSON file.
 *
 * # Safety
 * `model` must be a live handle and `path` a valid nul-terminated string.
 */
OdocalStatus odocal_model_save(const OdocalModel *model, const char *path);

/**
 * Load a model snapshot from a JSON file into a new handle.
 *
 * # Safety
 * `path` must be a valid nul-terminated string and `out` a valid pointer.
 */
OdocalStatus odocal_model_load(const char *path, OdocalModel **out);

/**
 * Release a model handle. Passing null is a no-op.
 *
 * # Safety
 * `model` must be a handle from this library, freed at most once.
 */
void odocal_model_free(OdocalModel *model);

/**
 * The model's kind name as a static nul-terminated string; null for null.
 *
 * # Safety
 * `model` must be null or a live handle from this library.
 */
const char *odocal_model_kind(const OdocalModel *model);

/**
 * Number of tick inputs the model expects; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle from this library.
 */
uintptr_t odocal_model_input_dim(const OdocalModel *model);

/**
 * Predict one displacement from a tick difference vector.
 *
 * Writes the predicted `(x, y, theta)` into `out_pose` and the predictive
 * variances into `out_cov_diag` (zeros for the robust linear model).
 *
 * # Safety
 * `ticks` must point to `tick_dim` doubles; `out_pose` and `out_cov_diag`
 * must each point to 3 writable doubles.
 */
OdocalStatus odocal_model_predict(const OdocalModel *model,
                                  const double *ticks,
                                  uintptr_t tick_dim,
                                  double *out_pose,
                                  double *out_cov_diag);

/**
 * Predict every displacement in a dataset and chain them from a start pose.
 *
 * Writes `(len + 1) × 3` doubles into `out_poses` — the start pose followed
 * by one pose per sample. `capacity` is the number of doubles available at
 * `out_poses` and must be at least `3 * (odocal_dataset_len(dataset) + 1)`.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `start_pose` must point to 3
 * doubles; `out_poses` must point to `capacity` writable doubles.
 */
OdocalStatus odocal_integrate(const OdocalModel *model,
                              const OdocalDataset *dataset,
                              const double *start_pose,
                              double *out_poses,
                              uintptr_t capacity);

/**
 * Absolute trajectory error (RMS translation distance, meters) between two
 * already-corresponding pose arrays of `n` poses each.
 *
 * # Safety
 * `estimated` and `reference` must each point to `n × 3` doubles; `out`
 * must be a valid pointer.
 */
OdocalStatus odocal_ate(const double *estimated, const double *reference, uintptr_t n, double *out);

/**
 * Relative pose error (RMS step-displacement distance, meters) between two
 * already-corresponding pose arrays of `n` poses each; needs `n >= 2`.
 *
 * # Safety
 * `estimated` and `reference` must each point to `n × 3` doubles; `out`
 * must be a valid pointer.
 */
OdocalStatus odocal_rpe(const double *estimated, const double *reference, uintptr_t n, double *out);

/**
 * Run a simulation scenario from a config file and write `truth.csv`,
 * `odometry.csv`, and `dataset.csv` into `out_dir`.
 *
 * # Safety
 * `config_path` and `out_dir` must be valid nul-terminated strings.
 */
OdocalStatus odocal_simulate_csv(const char *config_path, const char *out_dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ODOCAL_H */
