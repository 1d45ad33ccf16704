#ifndef FOMDP_H
#define FOMDP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FOMDP_SOLVER_FOALP = 0,
  FOMDP_SOLVER_FOAPI = 1,
} FomdpSolver;

typedef enum {
  FOMDP_STATUS_OK = 0,
  FOMDP_STATUS_NULL_POINTER = 1,
  FOMDP_STATUS_INVALID_UTF8 = 2,
  /**
   * Syntax or model error in a domain or instance.
   */
  FOMDP_STATUS_DOMAIN = 3,
  /**
   * LP infeasible, unbounded or numerically unstable.
   */
  FOMDP_STATUS_SOLVER = 4,
  /**
   * Index or argument out of range.
   */
  FOMDP_STATUS_OUT_OF_RANGE = 5,
  FOMDP_STATUS_PANIC = 6,
} FomdpStatus;

/**
 * A parsed instance, tied to the model it was parsed against.
 */
typedef struct FomdpInstanceHandle FomdpInstanceHandle;

/**
 * A parsed domain.
 */
typedef struct FomdpModelHandle FomdpModelHandle;

/**
 * A weighted basis produced by basis generation.
 */
typedef struct FomdpSolutionHandle FomdpSolutionHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into the library on this thread.
 */
const char *fomdp_last_error(void);

/**
 * Parses a domain.
 *
 * # Safety
 * `text` is a nul-terminated string; `out_model` is writable.
 */
FomdpStatus fomdp_model_parse(const char *text_ptr, FomdpModelHandle **out_model);

/**
 * # Safety
 * `model` is null or was returned by `fomdp_model_parse` and not freed.
 */
void fomdp_model_free(FomdpModelHandle *model);

/**
 * Number of action templates, including noop.
 *
 * # Safety
 * `model` is a live handle; `out_count` is writable.
 */
FomdpStatus fomdp_model_num_templates(const FomdpModelHandle *model, size_t *out_count);

/**
 * Parses an instance against a model.
 *
 * # Safety
 * `model` is a live handle; `text` is a nul-terminated string;
 * `out_inst` is writable.
 */
FomdpStatus fomdp_instance_parse(const FomdpModelHandle *model,
                                 const char *text_ptr,
                                 FomdpInstanceHandle **out_inst);

/**
 * # Safety
 * `inst` is null or was returned by `fomdp_instance_parse` and not freed.
 */
void fomdp_instance_free(FomdpInstanceHandle *inst);

/**
 * Generates a basis with at most `iters` solver calls and solves for its
 * weights.
 *
 * # Safety
 * `model` is a live handle; `out_sol` is writable.
 */
FomdpStatus fomdp_solve(const FomdpModelHandle *model,
                        FomdpSolver solver,
                        size_t iters,
                        double tau,
                        FomdpSolutionHandle **out_sol);

/**
 * # Safety
 * `sol` is null or was returned by `fomdp_solve` and not freed.
 */
void fomdp_solution_free(FomdpSolutionHandle *sol);

/**
 * # Safety
 * `sol` is a live handle; `out_count` is writable.
 */
FomdpStatus fomdp_solution_num_bases(const FomdpSolutionHandle *sol, size_t *out_count);

/**
 * # Safety
 * `sol` is a live handle; `out_weight` is writable.
 */
FomdpStatus fomdp_solution_weight(const FomdpSolutionHandle *sol, size_t index, double *out_weight);

/**
 * Whether the solver reported convergence (always true for FOALP).
 *
 * # Safety
 * `sol` is a live handle; `out_flag` is writable.
 */
FomdpStatus fomdp_solution_converged(const FomdpSolutionHandle *sol, bool *out_flag);

/**
 * Value of the solution in the instance's initial state.
 *
 * # Safety
 * `sol` and `inst` are live handles; `out_value` is writable.
 */
FomdpStatus fomdp_solution_value(const FomdpSolutionHandle *sol,
                                 const FomdpInstanceHandle *inst,
                                 double *out_value);

/**
 * `weight<TAB>formula` per basis. Release with `fomdp_string_free`.
 *
 * # Safety
 * `sol` is a live handle; `out_text` is writable.
 */
FomdpStatus fomdp_solution_dump(const FomdpSolutionHandle *sol, char **out_text);

/**
 * # Safety
 * `s` is null or was returned by this library and not freed.
 */
void fomdp_string_free(char *s);

/**
 * 2γφ/(1−γ).
 *
 * # Safety
 * `out_bound` is writable.
 */
FomdpStatus fomdp_loss_bound(double phi, double gamma, double *out_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOMDP_H */
