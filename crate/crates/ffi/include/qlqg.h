#ifndef QLQG_H
#define QLQG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum QlqgStatus {
  QLQG_STATUS_OK = 0,
  QLQG_STATUS_NULL_POINTER = 1,
  QLQG_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed scenario text or unknown fixture.
   */
  QLQG_STATUS_PARSE = 3,
  /**
   * Inconsistent shapes or out-of-domain arguments.
   */
  QLQG_STATUS_INVALID_ARGUMENT = 4,
  QLQG_STATUS_NOT_HURWITZ = 5,
  /**
   * Any other numerical failure.
   */
  QLQG_STATUS_NUMERIC = 6,
  QLQG_STATUS_PANIC = 7,
} QlqgStatus;

/**
 * Opaque scenario handle.
 */
typedef struct QlqgScenario QlqgScenario;

/**
 * Realizability residuals. Controller entries are NaN without a controller.
 */
typedef struct QlqgCheck {
  double plant_res1;
  double plant_res2;
  double controller_res1;
  double controller_res2;
  bool pass;
} QlqgCheck;

/**
 * Closed-loop cost report. `j` is NaN when the loop is not Hurwitz.
 */
typedef struct QlqgEvaluation {
  double j;
  double vacuum_bound;
  double spectral_abscissa;
  double lyapunov_residual;
} QlqgEvaluation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated).
 * Returns the message length without the terminator; when that is
 * `>= len` the message was truncated.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qlqg_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qlqg_version(void);

/**
 * Parse a scenario from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QlqgStatus qlqg_scenario_from_json(const char *json, struct QlqgScenario **out);

/**
 * Load one of the shipped fixtures by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QlqgStatus qlqg_scenario_from_fixture(const char *name, struct QlqgScenario **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void qlqg_scenario_free(struct QlqgScenario *s);

/**
 * Realizability residuals of the plant and controller at `tol`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QlqgStatus qlqg_scenario_check(const struct QlqgScenario *s,
                                    double tol,
                                    struct QlqgCheck *out);

/**
 * Closed-loop cost. A loop that is not Hurwitz returns
 * `QLQG_STATUS_NOT_HURWITZ` with `out` still filled in.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QlqgStatus qlqg_scenario_evaluate(const struct QlqgScenario *s, struct QlqgEvaluation *out);

/**
 * Sweep the amplifier time scale over `points` values from `h_max` down to
 * `h_min`. Each output array must hold `points` doubles.
 *
 * # Safety
 * Pointers must be valid for `points` elements.
 */
enum QlqgStatus qlqg_scenario_dpa_sweep(const struct QlqgScenario *s,
                                        double h_min,
                                        double h_max,
                                        size_t points,
                                        double *h_out,
                                        double *j_out,
                                        double *abscissa_out);

/**
 * Solve `A P + P A^T + W = 0` for `n x n` row-major matrices.
 * `residual` may be null.
 *
 * # Safety
 * `a`, `w` and `p_out` must hold `n * n` doubles.
 */
enum QlqgStatus qlqg_lyap_solve(size_t n,
                                const double *a,
                                const double *w,
                                double *p_out,
                                double *residual);

/**
 * Cost floor `2 + Tr(CK^T CK)` for a `rows x 2` controller output matrix.
 *
 * # Safety
 * `ck` must hold `2 * rows` doubles and `out` must be valid.
 */
enum QlqgStatus qlqg_vacuum_bound(const double *ck, size_t rows, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QLQG_H */
