#ifndef CAVBENCH_H
#define CAVBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CavStatus {
  CAV_STATUS_OK = 0,
  CAV_STATUS_NULL_POINTER = 1,
  CAV_STATUS_INVALID_UTF8 = 2,
  // Dimensions, indices, lengths or names that do not fit the inputs.
  CAV_STATUS_INVALID_ARGUMENT = 3,
  CAV_STATUS_IO = 4,
  // Malformed file contents.
  CAV_STATUS_FORMAT = 5,
  // The inputs admit no answer (zero-norm direction, one class, ...).
  CAV_STATUS_DEGENERATE = 6,
  CAV_STATUS_CONFIG = 7,
  CAV_STATUS_PANIC = 8,
} CavStatus;

// Opaque embedding matrix.
typedef struct CavMatrix CavMatrix;

// Opaque sparse-autoencoder parameters.
typedef struct CavSae CavSae;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *cavbench_last_error(void);

// Library version as a static NUL-terminated string.
const char *cavbench_version(void);

// Copies `n * d` row-major values into a new matrix.
//
// # Safety
// `data` must point to `n * d` readable doubles; `out` must be writable.
enum CavStatus cavbench_matrix_new(size_t n, size_t d, const double *data, struct CavMatrix **out);

// Reads a matrix in the CAVB binary format.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CavStatus cavbench_matrix_load(const char *path, struct CavMatrix **out);

// Writes a matrix in the CAVB binary format (values stored as f32).
//
// # Safety
// `m` must be a live handle; `path` a NUL-terminated string.
enum CavStatus cavbench_matrix_save(const struct CavMatrix *m, const char *path);

// # Safety
// `m` must be a live handle; `n` and `d` must be writable.
enum CavStatus cavbench_matrix_dims(const struct CavMatrix *m, size_t *n, size_t *d);

// Releases a matrix. Null is ignored.
//
// # Safety
// `m` must come from this library and must not be used afterwards.
void cavbench_matrix_free(struct CavMatrix *m);

// Loads an SAE bundle directory (`W_enc.cavb`, `b_enc.cavb`, `W_dec.cavb`,
// `b_dec.cavb`, `meta`).
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum CavStatus cavbench_sae_load(const char *dir, struct CavSae **out);

// Releases an SAE. Null is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void cavbench_sae_free(struct CavSae *s);

// Extracts a unit CAV with `method` (registry name such as "diffmean")
// from the given row sets and writes its `d` components to `out`.
// `sae` may be null for methods that do not need one.
//
// # Safety
// Handles must be live; `pos`/`neg` must hold `n_pos`/`n_neg` indices;
// `out` must have room for `d` doubles.
enum CavStatus cavbench_extract(const struct CavMatrix *m,
                                const char *method,
                                const size_t *pos,
                                size_t n_pos,
                                const size_t *neg,
                                size_t n_neg,
                                const struct CavSae *sae,
                                uint64_t seed,
                                double *out);

// `out = h - (v.h) v` for a unit vector `v` of length `d`. `out` may
// alias `h`.
//
// # Safety
// `h`, `v` and `out` must each hold `d` doubles.
enum CavStatus cavbench_orthogonalize(const double *h, const double *v, size_t d, double *out);

// Mann-Whitney AUC of positive over negative scores, ties counting one half.
//
// # Safety
// `pos`/`neg` must hold `n_pos`/`n_neg` doubles; `out` must be writable.
enum CavStatus cavbench_auc(const double *pos,
                            size_t n_pos,
                            const double *neg,
                            size_t n_neg,
                            double *out);

// Mean projection difference in units of the negative standard deviation.
//
// # Safety
// As for [`cavbench_auc`].
enum CavStatus cavbench_mad(const double *pos,
                            size_t n_pos,
                            const double *neg,
                            size_t n_neg,
                            double *out);

// Runs a benchmark config and writes `report.csv`, `report.md` and
// `cavs/` under `out_dir` (the config's `output_dir` when null). Failed
// cells do not fail the call; their count goes to `failed_rows` when it is
// non-null.
//
// # Safety
// `config` must be a NUL-terminated string; `out_dir` null or one.
enum CavStatus cavbench_run_benchmark(const char *config, const char *out_dir, size_t *failed_rows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVBENCH_H */
