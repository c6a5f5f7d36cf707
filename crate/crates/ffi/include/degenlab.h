#ifndef DEGENLAB_H
#define DEGENLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every call.
 */
typedef enum dl_status {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_POINTER = 1,
  DL_STATUS_INVALID_UTF8 = 2,
  DL_STATUS_ARGUMENT = 3,
  DL_STATUS_DOMAIN = 4,
  DL_STATUS_VALIDATION = 5,
  DL_STATUS_RESOURCE = 6,
  DL_STATUS_UNSUPPORTED = 7,
  DL_STATUS_SOLVER = 8,
  DL_STATUS_INCONCLUSIVE = 9,
  DL_STATUS_SCHEMA = 10,
  DL_STATUS_IO = 11,
  DL_STATUS_PANIC = 12,
} dl_status;

/*
 Classifier outcome for a coefficient profile.
 */
typedef enum dl_verdict {
  DL_VERDICT_STRONGLY_ELLIPTIC = 0,
  DL_VERDICT_CLOSABLE_DEGENERATE = 1,
  DL_VERDICT_SEPARATING = 2,
  DL_VERDICT_INCONCLUSIVE = 3,
} dl_verdict;

/*
 Opaque assembled operator on a reflecting box grid.
 */
typedef struct dl_operator dl_operator;

/*
 Opaque coefficient profile.
 */
typedef struct dl_profile dl_profile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *dl_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *dl_version(void);

/*
 Parses a profile document (the same JSON the scenario files embed).
 Relative sample paths resolve against `base_dir`, which may be null.

 # Safety
 `json` and a non-null `base_dir` must be NUL-terminated strings; `out`
 must be writable.
 */
enum dl_status dl_profile_from_json(const char *json,
                                    const char *base_dir,
                                    struct dl_profile **out);

/*
 One-dimensional power profile `c = (ρ²/(1+ρ²))^δ`, ρ the distance to the
 nearest of `centers`, on `[lo, hi]`.

 # Safety
 `centers` must hold `n_centers` values; `out` must be writable.
 */
enum dl_status dl_profile_power_1d(double delta,
                                   const double *centers,
                                   size_t n_centers,
                                   double lo,
                                   double hi,
                                   struct dl_profile **out);

/*
 Serializes a profile; release the string with [`dl_string_free`].

 # Safety
 `profile` must be a live handle; `out` must be writable.
 */
enum dl_status dl_profile_to_json(const struct dl_profile *profile, char **out);

/*
 # Safety
 `profile` must be null or a handle not yet freed.
 */
void dl_profile_free(struct dl_profile *profile);

/*
 Runs the integrability classifier with default quadrature.

 # Safety
 `profile` must be a live handle; `out` must be writable.
 */
enum dl_status dl_profile_classify(const struct dl_profile *profile, enum dl_verdict *out);

/*
 Intrinsic distance between `x` and `y` on a one-dimensional profile with
 viscosity `epsilon`. Infinite across a separating zero.

 # Safety
 `profile` must be a live handle; `out` must be writable.
 */
enum dl_status dl_distance_1d(const struct dl_profile *profile,
                              double x,
                              double y,
                              double epsilon,
                              double *out);

/*
 Assembles the operator on the profile's own box with `n` cells per axis.

 # Safety
 `profile` must be a live handle; `out` must be writable.
 */
enum dl_status dl_operator_assemble(const struct dl_profile *profile,
                                    size_t n,
                                    double epsilon,
                                    struct dl_operator **out);

/*
 Number of grid points, the length of every field on this operator.

 # Safety
 `op` must be a live handle; `out` must be writable.
 */
enum dl_status dl_operator_size(const struct dl_operator *op, size_t *out);

/*
 Coordinates of grid point `i`; writes `dimension` values into `coords`.

 # Safety
 `op` must be a live handle; `coords` must hold `capacity` values.
 */
enum dl_status dl_operator_point(const struct dl_operator *op,
                                 size_t i,
                                 double *coords,
                                 size_t capacity);

/*
 Row sums of the operator; zero up to round-off on a conservative grid.

 # Safety
 `op` must be a live handle; `out` must hold `len` values, `len` equal to
 the operator size.
 */
enum dl_status dl_operator_row_sums(const struct dl_operator *op, double *out, size_t len);

/*
 # Safety
 `op` must be null or a handle not yet freed.
 */
void dl_operator_free(struct dl_operator *op);

/*
 Writes `e^{-tA} phi` into `out` (Chebyshev backend). `phi` and `out` may
 alias.

 # Safety
 `op` must be a live handle; `phi` and `out` must each hold `len` values.
 */
enum dl_status dl_heat_evolve(const struct dl_operator *op,
                              const double *phi,
                              double t,
                              double *out,
                              size_t len);

/*
 Runs a scenario file or builtin name, writes its artifacts to `out_dir`
 (null for the scenario default), and stores the runner's exit code: 0
 clean, 2 when a bound is violated. `threads` of 0 uses all cores.

 # Safety
 `source` and a non-null `out_dir` must be NUL-terminated strings;
 `exit_code` must be writable.
 */
enum dl_status dl_run_scenario(const char *source,
                               const char *out_dir,
                               size_t threads,
                               int32_t *exit_code);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void dl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEGENLAB_H */
