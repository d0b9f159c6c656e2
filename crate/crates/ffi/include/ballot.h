#ifndef BALLOT_H
#define BALLOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Clustering algorithm.
typedef enum BallotAlgo {
  // Exact optimal-transport assignment.
  BALLOT_ALGO_EXACT = 0,
  // Entropic transport followed by rounding.
  BALLOT_ALGO_ENTROPIC = 1,
  // Unconstrained nearest-centroid assignment.
  BALLOT_ALGO_LLOYD = 2,
  // Balanced assignment by matching points to replicated centroids.
  BALLOT_ALGO_MATCHING = 3,
} BallotAlgo;

// Result code of every fallible call.
typedef enum BallotStatus {
  BALLOT_STATUS_OK = 0,
  BALLOT_STATUS_NULL_POINTER = 1,
  BALLOT_STATUS_INVALID_ARGUMENT = 2,
  BALLOT_STATUS_DIMENSION = 3,
  BALLOT_STATUS_UNBALANCED = 4,
  BALLOT_STATUS_NON_FINITE = 5,
  BALLOT_STATUS_INFEASIBLE = 6,
  BALLOT_STATUS_NON_CONVERGENCE = 7,
  BALLOT_STATUS_PARSE = 8,
  BALLOT_STATUS_IO = 9,
  BALLOT_STATUS_PANIC = 10,
} BallotStatus;

// Opaque dataset handle.
typedef struct BallotDataset BallotDataset;

// Opaque handle to the result of a clustering run.
typedef struct BallotTrace BallotTrace;

// Run parameters; obtain defaults from [`ballot_options_default`].
typedef struct BallotOptions {
  double term_eps;
  size_t max_iters;
  // Entropic regularization, used by `BALLOT_ALGO_ENTROPIC`.
  double lambda;
  // Sinkhorn marginal tolerance, used by `BALLOT_ALGO_ENTROPIC`.
  double marginal_tol;
  size_t max_sweeps;
} BallotOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or null if the
// last call succeeded. The pointer stays valid until the next call into this
// library on the same thread.
const char *ballot_last_error(void);

// Default run parameters.
struct BallotOptions ballot_options_default(void);

// Build a dataset from `n * d` row-major coordinates. `labels` is either
// null or `n` planted cluster indices in `0..k`.
//
// # Safety
// `points` must address `n * d` doubles and `labels`, when non-null, `n`
// values. `out` must be a valid place to store the new handle.
enum BallotStatus ballot_dataset_new(const double *points,
                                     size_t n,
                                     size_t d,
                                     size_t k,
                                     const uint32_t *labels,
                                     struct BallotDataset **out);

// Load a dataset CSV file.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid place to store
// the new handle.
enum BallotStatus ballot_dataset_load(const char *path, struct BallotDataset **out);

// Sample `n` points from `k` balls of unit radius around planted centers.
// Centers lie on a segment for `k = 2` and an equilateral triangle for
// `k = 3`, in both cases at pairwise distance `delta`; for larger `k` they
// are Gaussian with standard deviation `delta`.
//
// # Safety
// `out` must be a valid place to store the new handle.
enum BallotStatus ballot_dataset_sample_ball(size_t n,
                                             size_t d,
                                             size_t k,
                                             double delta,
                                             uint64_t seed,
                                             struct BallotDataset **out);

// Release a dataset. Null is ignored.
//
// # Safety
// `data` must come from this library and not be used afterwards.
void ballot_dataset_free(struct BallotDataset *data);

// Number of points, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live dataset handle.
size_t ballot_dataset_n(const struct BallotDataset *data);

// Dimension, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live dataset handle.
size_t ballot_dataset_d(const struct BallotDataset *data);

// Cluster count, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live dataset handle.
size_t ballot_dataset_k(const struct BallotDataset *data);

// Write `k * d` k-means++ seeds into `centroids`.
//
// # Safety
// `data` must be a live dataset handle and `centroids` must address `len`
// doubles.
enum BallotStatus ballot_kmeanspp(const struct BallotDataset *data,
                                  uint64_t seed,
                                  double *centroids,
                                  size_t len);

// Write the `k * d` means of the planted clusters into `centroids`.
//
// # Safety
// `data` must be a live dataset handle and `centroids` must address `len`
// doubles.
enum BallotStatus ballot_planted_centroids(const struct BallotDataset *data,
                                           double *centroids,
                                           size_t len);

// Cluster `data` starting from the `k * d` row-major centroids `init`.
// `options` may be null for defaults.
//
// # Safety
// `data` must be a live dataset handle, `init` must address `k * d`
// doubles, `options` must be null or valid, and `out` must be a valid place
// to store the new handle.
enum BallotStatus ballot_run(const struct BallotDataset *data,
                             const double *init,
                             enum BallotAlgo algo,
                             const struct BallotOptions *options,
                             struct BallotTrace **out);

// Release a trace. Null is ignored.
//
// # Safety
// `trace` must come from this library and not be used afterwards.
void ballot_trace_free(struct BallotTrace *trace);

// Iterations performed, or 0 for a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
size_t ballot_trace_iterations(const struct BallotTrace *trace);

// Whether the run stopped because the centroids stopped moving.
//
// # Safety
// `trace` must be null or a live trace handle.
bool ballot_trace_converged(const struct BallotTrace *trace);

// Objective after the last iteration, or NaN for a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
double ballot_trace_objective(const struct BallotTrace *trace);

// Write the `n` cluster labels, each in `0..k`.
//
// # Safety
// `trace` must be a live trace handle and `labels` must address `len`
// values.
enum BallotStatus ballot_trace_labels(const struct BallotTrace *trace,
                                      uint32_t *labels,
                                      size_t len);

// Write the final `k * d` centroids.
//
// # Safety
// `trace` must be a live trace handle and `centroids` must address `len`
// doubles.
enum BallotStatus ballot_trace_centroids(const struct BallotTrace *trace,
                                         double *centroids,
                                         size_t len);

// Serialize the trace as JSON into a new string released with
// [`ballot_string_free`].
//
// # Safety
// `trace` must be a live trace handle and `out` a valid place to store the
// string pointer.
enum BallotStatus ballot_trace_to_json(const struct BallotTrace *trace, char **out);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ballot_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BALLOT_H */
