#ifndef FRECHET_SOM_H
#define FRECHET_SOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Distance between self-organizing maps.
 */
typedef enum FsomMetric {
  /**
   * Temporal: prototype time series.
   */
  FsomMetric_TSmd = 0,
  /**
   * Spatial: voxel assignment sets.
   */
  FsomMetric_SSmd = 1,
  /**
   * Spatio-temporal: assignments of temporally matched units.
   */
  FsomMetric_StSmd = 2,
} FsomMetric;

/**
 * Status code returned by every fallible call.
 */
typedef enum FsomStatus {
  FsomStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  FsomStatus_NullPointer = 1,
  /**
   * An argument was structurally invalid (bad sizes, bad enum value...).
   */
  FsomStatus_InvalidArgument = 2,
  /**
   * The computation rejected the data (degenerate input, failed
   * validation, numeric trouble).
   */
  FsomStatus_DataError = 3,
} FsomStatus;

/**
 * Opaque metric-closed distance matrix handle.
 */
typedef struct FsomMatrix FsomMatrix;

/**
 * Opaque trained-map handle.
 */
typedef struct FsomSom FsomSom;

/**
 * Opaque spatio-temporal volume handle.
 */
typedef struct FsomVolume FsomVolume;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a volume from row-major data: `voxels` rows of `times` samples.
 * The data is copied.
 *
 * # Safety
 * `data` must point to `voxels * times` readable doubles and `out` to a
 * writable pointer slot.
 */
enum FsomStatus fsom_volume_create(const double *data,
                                   uintptr_t voxels,
                                   uintptr_t times,
                                   struct FsomVolume **out);

/**
 * # Safety
 * `volume` must be a pointer from `fsom_volume_create`, not yet freed.
 */
void fsom_volume_free(struct FsomVolume *volume);

/**
 * Trains a `k1 x k2` map on the volume with the batch algorithm and the
 * default schedule (`iterations` steps, radius decaying from `k1`).
 *
 * # Safety
 * `volume` must be a live volume handle; `out` a writable pointer slot.
 */
enum FsomStatus fsom_train_batch(const struct FsomVolume *volume,
                                 uintptr_t k1,
                                 uintptr_t k2,
                                 uintptr_t iterations,
                                 uint64_t seed,
                                 struct FsomSom **out);

/**
 * # Safety
 * `som` must be a pointer from `fsom_train_batch`, not yet freed.
 */
void fsom_som_free(struct FsomSom *som);

/**
 * Number of output units of a trained map; 0 for a null handle.
 *
 * # Safety
 * `som` must be null or a live map handle.
 */
uintptr_t fsom_som_units(const struct FsomSom *som);

/**
 * Summed distance from each voxel series to its best-matching prototype.
 *
 * # Safety
 * `som` and `volume` must be live handles; `out` a writable double.
 */
enum FsomStatus fsom_quantization_error(const struct FsomSom *som,
                                        const struct FsomVolume *volume,
                                        double *out);

/**
 * Raw (pre-closure) distance between two maps under a metric.
 *
 * # Safety
 * `a` and `b` must be live map handles; `out` a writable double.
 */
enum FsomStatus fsom_som_distance(enum FsomMetric metric,
                                  const struct FsomSom *a,
                                  const struct FsomSom *b,
                                  double *out);

/**
 * Pairwise distances over a sample of maps, repaired into a metric by
 * shortest-path closure.
 *
 * # Safety
 * `soms` must point to `n` live map handles; `out` to a writable slot.
 */
enum FsomStatus fsom_closed_matrix(const struct FsomSom *const *soms,
                                   uintptr_t n,
                                   enum FsomMetric metric,
                                   struct FsomMatrix **out);

/**
 * # Safety
 * `matrix` must be a pointer from `fsom_closed_matrix`, not yet freed.
 */
void fsom_matrix_free(struct FsomMatrix *matrix);

/**
 * Side length of the matrix; 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live matrix handle.
 */
uintptr_t fsom_matrix_len(const struct FsomMatrix *matrix);

/**
 * Entry `(i, j)` of the matrix.
 *
 * # Safety
 * `matrix` must be a live matrix handle; `out` a writable double.
 */
enum FsomStatus fsom_matrix_get(const struct FsomMatrix *matrix,
                                uintptr_t i,
                                uintptr_t j,
                                double *out);

/**
 * Two-group permutation test on a closed matrix. `labels` holds one 0/1
 * group label per sample member. Writes the observed statistic and the
 * permutation p-value.
 *
 * # Safety
 * `matrix` must be a live matrix handle, `labels` must point to `n`
 * readable values, and the out-pointers must be writable doubles.
 */
enum FsomStatus fsom_permutation_test(const struct FsomMatrix *matrix,
                                      const uint32_t *labels,
                                      uintptr_t n,
                                      uint64_t permutations,
                                      uint64_t seed,
                                      double *statistic_out,
                                      double *p_value_out);

/**
 * Static description of a status code.
 */
const char *fsom_status_message(enum FsomStatus status);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FRECHET_SOM_H */
