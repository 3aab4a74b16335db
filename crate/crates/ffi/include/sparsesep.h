/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SPARSESEP_H
#define SPARSESEP_H

#include <stddef.h>

typedef enum {
  SPARSESEP_STATUS_OK = 0,
  SPARSESEP_STATUS_NULL_POINTER = 1,
  SPARSESEP_STATUS_INVALID_ARGUMENT = 2,
  SPARSESEP_STATUS_SOLVER_ERROR = 3,
  SPARSESEP_STATUS_BUFFER_TOO_SMALL = 4,
  SPARSESEP_STATUS_PANIC = 5,
} SparsesepStatus;

// Dictionary learned by [`sparsesep_learn_dictionary`].
typedef struct SparsesepDictionary SparsesepDictionary;

// Sources and mixing matrix estimated by [`sparsesep_separate`].
typedef struct SparsesepSeparation SparsesepSeparation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null. The
// pointer stays valid until the next failing call on the same thread.
const char *sparsesep_last_error(void);

// Library version as a static string.
const char *sparsesep_version(void);

// Separates `m` mixture channels of `t` samples each, given row-major in
// `data` (`m * t` values).
//
// `method` is one of `fastica`, `mca`, `mmca`, `gmca`, `fgmca`,
// `ksvd-mmca`, `bksvd-mmca`. `config_json` may be null for the defaults.
// `n_sources` overrides the config when nonzero. On success `*out` owns a
// handle to release with [`sparsesep_separation_free`].
//
// # Safety
// `method` and a non-null `config_json` must be NUL-terminated strings,
// `data` must point to `m * t` readable doubles and `out` must be writable.
SparsesepStatus sparsesep_separate(const char *method,
                                   const double *data,
                                   size_t m,
                                   size_t t,
                                   size_t n_sources,
                                   const char *config_json,
                                   SparsesepSeparation **out);

// Sizes of a separation result. Any output pointer may be null.
//
// # Safety
// `sep` must be a live handle; non-null outputs must be writable.
SparsesepStatus sparsesep_separation_dims(const SparsesepSeparation *sep,
                                          size_t *n_sources,
                                          size_t *n_channels,
                                          size_t *n_samples,
                                          size_t *iterations);

// Copies the estimated sources, row-major `n_sources x n_samples`.
//
// # Safety
// `sep` must be a live handle and `buf` must hold `len` writable doubles.
SparsesepStatus sparsesep_separation_copy_sources(const SparsesepSeparation *sep,
                                                  double *buf,
                                                  size_t len);

// Copies the estimated mixing matrix, row-major `n_channels x n_sources`,
// unit-norm columns.
//
// # Safety
// `sep` must be a live handle and `buf` must hold `len` writable doubles.
SparsesepStatus sparsesep_separation_copy_mixing(const SparsesepSeparation *sep,
                                                 double *buf,
                                                 size_t len);

// Releases a separation handle; null is ignored.
//
// # Safety
// `sep` must come from [`sparsesep_separate`] and not be used afterwards.
void sparsesep_separation_free(SparsesepSeparation *sep);

// Learns `atoms` unit-norm atoms from `count` training signals of length
// `dim`, stored one after another in `signals` (`dim * count` values).
//
// `method` is `ksvd` or `sac-bksvd`. `sparsity` counts atoms per signal
// for K-SVD and blocks per signal for block K-SVD; `block_size` bounds the
// blocks and is ignored by K-SVD. Learning starts from the overcomplete
// DCT, so `dim` must be a perfect square.
//
// # Safety
// `method` must be a NUL-terminated string, `signals` must point to
// `dim * count` readable doubles and `out` must be writable.
SparsesepStatus sparsesep_learn_dictionary(const char *method,
                                           const double *signals,
                                           size_t dim,
                                           size_t count,
                                           size_t atoms,
                                           size_t sparsity,
                                           size_t block_size,
                                           size_t iterations,
                                           SparsesepDictionary **out);

// Signal length, atom count and block count of a dictionary. Any output
// pointer may be null.
//
// # Safety
// `dict` must be a live handle; non-null outputs must be writable.
SparsesepStatus sparsesep_dictionary_dims(const SparsesepDictionary *dict,
                                          size_t *dim,
                                          size_t *atoms,
                                          size_t *blocks);

// Copies the atoms one after another (`dim * atoms` values).
//
// # Safety
// `dict` must be a live handle and `buf` must hold `len` writable doubles.
SparsesepStatus sparsesep_dictionary_copy_atoms(const SparsesepDictionary *dict,
                                                double *buf,
                                                size_t len);

// Block index of `atom`.
//
// # Safety
// `dict` must be a live handle and `block` writable.
SparsesepStatus sparsesep_dictionary_block_of(const SparsesepDictionary *dict,
                                              size_t atom,
                                              size_t *block);

// Releases a dictionary handle; null is ignored.
//
// # Safety
// `dict` must come from [`sparsesep_learn_dictionary`] and not be used
// afterwards.
void sparsesep_dictionary_free(SparsesepDictionary *dict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSESEP_H */
