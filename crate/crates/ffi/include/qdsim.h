#ifndef QDSIM_H
#define QDSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum QdsimStatus {
  QDSIM_STATUS_OK = 0,
  QDSIM_STATUS_NULL_POINTER = 1,
  QDSIM_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad input or config; the message names the field.
   */
  QDSIM_STATUS_VALIDATION = 3,
  /**
   * A solver failed at run time.
   */
  QDSIM_STATUS_RUNTIME = 4,
  QDSIM_STATUS_IO = 5,
  /**
   * Output buffer too small; the required size was still reported.
   */
  QDSIM_STATUS_BUFFER_TOO_SMALL = 6,
  QDSIM_STATUS_PANIC = 7,
} QdsimStatus;

/**
 * Results of one scenario run.
 */
typedef struct QdsimRun QdsimRun;

/**
 * A parsed scenario file.
 */
typedef struct QdsimScenario QdsimScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qdsim_version(void);

/**
 * Copies the last error message of this thread, NUL-terminated, into
 * `buf`. Returns the message length without the terminator; nothing is
 * written when `cap` is too small.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or null with `cap == 0`.
 */
size_t qdsim_last_error(char *buf, size_t cap);

/**
 * Parses a scenario from JSON text. Relative paths inside it resolve
 * against `base_dir`, which may be null.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum QdsimStatus qdsim_scenario_from_json(const char *json,
                                          const char *base_dir,
                                          struct QdsimScenario **out);

/**
 * Reads a scenario file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum QdsimStatus qdsim_scenario_from_path(const char *path, struct QdsimScenario **out);

/**
 * Replaces the master seed.
 *
 * # Safety
 * `s` must be a live scenario handle.
 */
enum QdsimStatus qdsim_scenario_set_seed(struct QdsimScenario *s, uint64_t seed);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void qdsim_scenario_free(struct QdsimScenario *s);

/**
 * Runs the scenario without writing files.
 *
 * # Safety
 * `s` must be a live scenario handle; `out` must be writable.
 */
enum QdsimStatus qdsim_scenario_run(const struct QdsimScenario *s, struct QdsimRun **out);

/**
 * Writes the run's files into `out_dir`, or the configured directory when
 * `out_dir` is null.
 *
 * # Safety
 * `r` must be a live run handle; `out_dir` null or NUL-terminated.
 */
enum QdsimStatus qdsim_run_emit(struct QdsimRun *r, const char *out_dir);

/**
 * Number of bound states, or 0 when the run had no eigen stage.
 *
 * # Safety
 * `r` must be a live run handle or null.
 */
size_t qdsim_run_n_bound(const struct QdsimRun *r);

/**
 * Final dot probabilities of the SOM run (`solver == 0`) or the TB run
 * (`solver == 1`), one per dot.
 *
 * # Safety
 * `r` must be a live run handle; `buf` valid for `cap` doubles; `needed`
 * null or writable.
 */
enum QdsimStatus qdsim_run_final_probabilities(const struct QdsimRun *r,
                                               uint32_t solver,
                                               double *buf,
                                               size_t cap,
                                               size_t *needed);

/**
 * The run report as JSON, NUL-terminated. `needed` receives the length
 * including the terminator.
 *
 * # Safety
 * `r` must be a live run handle; `buf` valid for `cap` bytes; `needed`
 * null or writable.
 */
enum QdsimStatus qdsim_run_report_json(const struct QdsimRun *r,
                                       char *buf,
                                       size_t cap,
                                       size_t *needed);

/**
 * # Safety
 * `r` must come from this library and not be used afterwards. Null is ignored.
 */
void qdsim_run_free(struct QdsimRun *r);

/**
 * Bound energies in `E0` of a piecewise-constant potential with
 * `n_values + 1` breakpoints, placed `margin` from the left wall of a box of
 * width `length`, in an `n_basis` sine basis.
 *
 * # Safety
 * Array arguments must be valid for their lengths; `needed` null or writable.
 */
enum QdsimStatus qdsim_piecewise_spectrum(const double *breakpoints,
                                          const double *values,
                                          size_t n_values,
                                          double margin,
                                          double length,
                                          size_t n_basis,
                                          double *energies,
                                          size_t cap,
                                          size_t *needed);

/**
 * Evolves a chain with constant hoppings (`n_sites - 1` of them, in `E0`)
 * for `horizon` (in `t0`) and writes the final site probabilities into
 * `probs` (`n_sites` doubles). The initial amplitudes must be normalized.
 *
 * # Safety
 * Array arguments must be valid for the lengths implied by `n_sites`.
 */
enum QdsimStatus qdsim_tb_evolve(size_t n_sites,
                                 const double *hoppings,
                                 const double *initial_re,
                                 const double *initial_im,
                                 double horizon,
                                 double *probs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDSIM_H */
