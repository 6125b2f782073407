#ifndef BACKHAUL_H
#define BACKHAUL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The first four match the command-line exit codes.
 */
typedef enum BhStatus {
  BH_STATUS_OK = 0,
  BH_STATUS_CONFIG_ERROR = 1,
  BH_STATUS_SOLVER_ERROR = 2,
  BH_STATUS_INFEASIBLE = 3,
  BH_STATUS_NULL_POINTER = 4,
  BH_STATUS_INVALID_ARGUMENT = 5,
  BH_STATUS_PANIC = 6,
} BhStatus;

/**
 * A network with its configuration and interference matrix.
 */
typedef struct BhInstance BhInstance;

/**
 * A solved instance: objective, schedule and exact throughput report.
 */
typedef struct BhOutcome BhOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bh_last_error(void);

/**
 * Build an instance from a TOML configuration. Null or empty text selects
 * the defaults.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be a
 * valid pointer to writable storage.
 */
enum BhStatus bh_instance_new(const char *config_toml, struct BhInstance **out);

/**
 * # Safety
 * `inst` must be null or a handle from [`bh_instance_new`] not yet freed.
 */
void bh_instance_free(struct BhInstance *inst);

/**
 * # Safety
 * `inst` must be null or a live instance handle.
 */
uintptr_t bh_instance_num_nodes(const struct BhInstance *inst);

/**
 * # Safety
 * `inst` must be null or a live instance handle.
 */
uintptr_t bh_instance_num_links(const struct BhInstance *inst);

/**
 * Solve with the model and solver settings of the instance configuration.
 * `slots` overrides the slot count when nonzero, `time_limit_s` the time
 * limit when positive.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` a valid pointer.
 */
enum BhStatus bh_solve(const struct BhInstance *inst,
                       uintptr_t slots,
                       double time_limit_s,
                       struct BhOutcome **out);

/**
 * # Safety
 * `o` must be null or a handle from [`bh_solve`] not yet freed.
 */
void bh_outcome_free(struct BhOutcome *o);

/**
 * Max-min service of the model, or NaN for a null handle.
 *
 * # Safety
 * `o` must be null or a live outcome handle.
 */
double bh_outcome_objective(const struct BhOutcome *o);

/**
 * Max-min service of the schedule under exact interference.
 *
 * # Safety
 * `o` must be null or a live outcome handle.
 */
double bh_outcome_max_min(const struct BhOutcome *o);

/**
 * # Safety
 * `o` must be null or a live outcome handle.
 */
double bh_outcome_gap(const struct BhOutcome *o);

/**
 * # Safety
 * `o` must be null or a live outcome handle.
 */
uintptr_t bh_outcome_num_slots(const struct BhOutcome *o);

/**
 * Length and active links of slot `index`. Up to `capacity` link ids are
 * copied to `links`; `num_links` receives the full count, so a call with
 * `capacity = 0` queries the size.
 *
 * # Safety
 * `o` must be a live outcome handle, `length` and `num_links` valid
 * pointers, and `links` valid for `capacity` writes when `capacity > 0`.
 */
enum BhStatus bh_outcome_slot(const struct BhOutcome *o,
                              uintptr_t index,
                              double *length,
                              uintptr_t *links,
                              uintptr_t capacity,
                              uintptr_t *num_links);

/**
 * The full outcome as JSON. Release the string with [`bh_string_free`].
 * Returns null on failure.
 *
 * # Safety
 * `o` must be null or a live outcome handle.
 */
char *bh_outcome_to_json(const struct BhOutcome *o);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void bh_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BACKHAUL_H */
