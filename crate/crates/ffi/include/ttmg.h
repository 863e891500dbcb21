#ifndef TTMG_H
#define TTMG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TtmgStatus {
  TTMG_STATUS_OK = 0,
  TTMG_STATUS_NULL_POINTER = 1,
  TTMG_STATUS_INVALID_ARGUMENT = 2,
  TTMG_STATUS_SIZE_LIMIT = 3,
  TTMG_STATUS_NUMERICAL = 4,
  /**
   * The solve finished without reaching its tolerance. The solution
   * handle is still written.
   */
  TTMG_STATUS_NOT_CONVERGED = 5,
  TTMG_STATUS_PANIC = 6,
} TtmgStatus;

typedef enum TtmgFamily {
  TTMG_FAMILY_OVERFLOW = 0,
  TTMG_FAMILY_KANBAN = 1,
} TtmgFamily;

typedef struct TtmgHierarchy TtmgHierarchy;

typedef struct TtmgModel TtmgModel;

typedef struct TtmgSolution TtmgSolution;

/**
 * Solver settings exposed through the C interface. Obtain defaults with
 * [`ttmg_solver_options_default`] and edit individual fields.
 */
typedef struct TtmgSolverOptions {
  double tolerance;
  uintptr_t max_cycles;
  uintptr_t nu1;
  uintptr_t nu2;
  uintptr_t initial_max_rank;
  uintptr_t rank_limit;
  /**
   * Nonzero selects Gauss-Seidel, zero selects GMRES.
   */
  uint8_t gauss_seidel;
} TtmgSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length without
 * the terminator, or 0 when no error was recorded.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
uintptr_t ttmg_last_error_message(char *buf, uintptr_t len);

/**
 * Overflow network with `queues` queues of `capacity` each and the standard
 * rates `lambda_i = max(1.2 - 0.1 i, 0.1)`, `mu_i = 1`.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum TtmgStatus ttmg_overflow_new(uintptr_t queues, uintptr_t capacity, struct TtmgModel **out);

/**
 * Overflow network with explicit per-queue capacities and rates, each
 * array of length `queues`.
 *
 * # Safety
 * The arrays must hold `queues` elements; `out` must be writable.
 */
enum TtmgStatus ttmg_overflow_new_with_rates(uintptr_t queues,
                                             const uintptr_t *capacities,
                                             const double *arrival_rates,
                                             const double *service_rates,
                                             struct TtmgModel **out);

/**
 * Kanban line of `machines` machines with `tickets` tickets each and
 * uniform processing and transfer rates.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum TtmgStatus ttmg_kanban_new(uintptr_t machines,
                                uintptr_t tickets,
                                double processing_rate,
                                double transfer_rate,
                                struct TtmgModel **out);

/**
 * Number of states, or 0 for a null handle. Saturates at `SIZE_MAX`.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t ttmg_model_state_count(const struct TtmgModel *model);

/**
 * Number of subsystems (queues or machines), or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t ttmg_model_order(const struct TtmgModel *model);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void ttmg_model_free(struct TtmgModel *model);

/**
 * Builds the level hierarchy with the family's coarsening rule, stopping
 * once a level has at most `coarsest_max` states.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum TtmgStatus ttmg_hierarchy_build(const struct TtmgModel *model,
                                     uintptr_t coarsest_max,
                                     struct TtmgHierarchy **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
uintptr_t ttmg_hierarchy_num_levels(const struct TtmgHierarchy *h);

/**
 * Number of states on `level` (0 is the finest).
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum TtmgStatus ttmg_hierarchy_level_size(const struct TtmgHierarchy *h,
                                          uintptr_t level,
                                          uintptr_t *out);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void ttmg_hierarchy_free(struct TtmgHierarchy *h);

struct TtmgSolverOptions ttmg_solver_options_default(enum TtmgFamily family);

/**
 * Runs multigrid V-cycles until `||A x|| < tolerance` or the cycle limit.
 * A null `options` uses the defaults of the model family. Writes the
 * solution handle on `Ok` and on `NotConverged`.
 *
 * # Safety
 * `h` must be a live handle, `options` null or valid, `out` writable.
 */
enum TtmgStatus ttmg_solve(const struct TtmgHierarchy *h,
                           const struct TtmgSolverOptions *options,
                           struct TtmgSolution **out);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
double ttmg_solution_residual(const struct TtmgSolution *s);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
uintptr_t ttmg_solution_cycles(const struct TtmgSolution *s);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
bool ttmg_solution_converged(const struct TtmgSolution *s);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
uintptr_t ttmg_solution_max_rank(const struct TtmgSolution *s);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
double ttmg_solution_effective_rank(const struct TtmgSolution *s);

/**
 * Probability of the state with multi-index `index[0..order]`.
 *
 * # Safety
 * `index` must hold `order` elements and `out` must be writable.
 */
enum TtmgStatus ttmg_solution_entry(const struct TtmgSolution *s,
                                    const uintptr_t *index,
                                    uintptr_t order,
                                    double *out);

/**
 * Writes the full probability vector (mode 1 slowest) into `buf`, which
 * must hold exactly the number of states.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum TtmgStatus ttmg_solution_to_dense(const struct TtmgSolution *s, double *buf, uintptr_t len);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void ttmg_solution_free(struct TtmgSolution *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TTMG_H */
