#ifndef ROBIN_COUPLING_H
#define ROBIN_COUPLING_H

/* Generated by cbindgen from the robin-coupling-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_POINTER = 1,
  RC_STATUS_INVALID_ARGUMENT = 2,
  RC_STATUS_RESOURCE_LIMIT = 3,
  RC_STATUS_SINGULAR_SYSTEM = 4,
  RC_STATUS_INTERNAL = 5,
  RC_STATUS_PANIC = 6,
} RcStatus;

/**
 * Opaque run configuration.
 */
typedef struct RcRun RcRun;

/**
 * Error quantities of one run, as defined by the Rust `ErrorReport`.
 */
typedef struct RcReport {
  uint32_t level;
  uint32_t n_steps;
  double dt;
  double h;
  double e_u;
  double e_du;
  double e_dw;
  double e_gdu;
  double e_gdus;
  double e_gdws;
  double e_dls;
  double e_gdu2s;
  double e_ggdus;
} RcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a run for `case` (`example1`, `example2`, `example3`, `zero`) and
 * `variant` (`original`, `improved`, `monolithic`) at level 3 with the
 * default settings. Free with [`rc_run_free`].
 *
 * # Safety
 * `case` and `variant` must be null or NUL-terminated strings; `out` must be
 * null or point to writable storage for a pointer.
 */
enum RcStatus rc_run_new(const char *case_, const char *variant, struct RcRun **out);

/**
 * # Safety
 * `run` must be null or a handle from [`rc_run_new`] not yet freed.
 */
void rc_run_free(struct RcRun *run);

/**
 * Level `k`, giving `Δt = h = 2^-(k+1)`.
 *
 * # Safety
 * `run` must be a live handle.
 */
enum RcStatus rc_run_set_level(struct RcRun *run, uint32_t level);

/**
 * # Safety
 * `run` must be a live handle.
 */
enum RcStatus rc_run_set_alpha(struct RcRun *run, double alpha);

/**
 * # Safety
 * `run` must be a live handle.
 */
enum RcStatus rc_run_set_final_time(struct RcRun *run, double final_time);

/**
 * Finite-element order 1 or 2; 0 restores the case default.
 *
 * # Safety
 * `run` must be a live handle.
 */
enum RcStatus rc_run_set_order(struct RcRun *run, uint32_t order);

/**
 * Permits levels 7 and 8.
 *
 * # Safety
 * `run` must be a live handle.
 */
enum RcStatus rc_run_allow_large(struct RcRun *run, bool allow);

/**
 * Runs the scheme to the final time and fills `report`.
 *
 * # Safety
 * `run` must be a live handle and `report` writable.
 */
enum RcStatus rc_run_execute(struct RcRun *run, struct RcReport *report);

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *rc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBIN_COUPLING_H */
