#ifndef ADASUB_H
#define ADASUB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an FFI call.
 */
typedef enum AdasubStatus {
  AdasubStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  AdasubStatus_NullPointer = 1,
  /**
   * Parameters outside the supported domain.
   */
  AdasubStatus_InvalidArgument = 2,
  /**
   * Observation or policy inconsistent with the instance.
   */
  AdasubStatus_Inconsistent = 3,
  /**
   * The enumeration cap fired before the value was computed.
   */
  AdasubStatus_BudgetExceeded = 4,
  /**
   * A numeric routine failed to converge.
   */
  AdasubStatus_Numeric = 5,
  /**
   * Internal panic caught at the boundary.
   */
  AdasubStatus_Panic = 6,
} AdasubStatus;

/**
 * Tabular instance: a prior over realizations plus its objective.
 */
typedef struct AdasubInstance AdasubInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next `adasub_*` call on the same thread.
 */
const char *adasub_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *adasub_version(void);

/**
 * Linear-threshold star: `k` sources, one unit sink, one live edge.
 */
enum AdasubStatus adasub_star_new(uintptr_t k, struct AdasubInstance **out);

/**
 * Tight adaptivity-gap construction; requires `p = 1/m` and `1 <= a <= m`.
 */
enum AdasubStatus adasub_tight_gap_new(uintptr_t k,
                                       double a,
                                       uintptr_t m,
                                       double p,
                                       struct AdasubInstance **out);

/**
 * Chain of `ell` path vertices with side edges alive w.p. `epsilon`.
 */
enum AdasubStatus adasub_chain_new(uintptr_t ell, double epsilon, struct AdasubInstance **out);

/**
 * Counterexample where greedy earns `k(1+epsilon)` against `1+(k-1)m`.
 */
enum AdasubStatus adasub_kusner_new(uintptr_t k,
                                    uintptr_t m,
                                    double epsilon,
                                    struct AdasubInstance **out);

/**
 * Two-test diagnosis instance with no finite smoothness constant.
 */
enum AdasubStatus adasub_diagnosis_new(struct AdasubInstance **out);

/**
 * Releases an instance. Null is ignored.
 */
void adasub_instance_free(struct AdasubInstance *instance);

/**
 * Ground set size of an instance; 0 when the handle is null.
 */
uintptr_t adasub_n_elements(const struct AdasubInstance *instance);

/**
 * Adaptive submodularity ratio at the empty history for height-`k` trees.
 */
enum AdasubStatus adasub_gamma(const struct AdasubInstance *instance,
                               uintptr_t k,
                               uint64_t cap,
                               double *out);

/**
 * Supermodularity ratio of the expected set function at size `k`.
 */
enum AdasubStatus adasub_beta(const struct AdasubInstance *instance,
                              uintptr_t k,
                              uint64_t cap,
                              double *out);

/**
 * Weak adaptive submodularity constant; `+inf` when unbounded.
 */
enum AdasubStatus adasub_zeta_star(const struct AdasubInstance *instance,
                                   uint64_t cap,
                                   double *out);

/**
 * Exact adaptivity gap at size `k`.
 */
enum AdasubStatus adasub_adaptivity_gap(const struct AdasubInstance *instance,
                                        uintptr_t k,
                                        uint64_t cap,
                                        double *out);

/**
 * Expected value of the height-`ell` adaptive greedy policy.
 */
enum AdasubStatus adasub_greedy_value(const struct AdasubInstance *instance,
                                      uintptr_t ell,
                                      double *out);

/**
 * Expected value of the exhaustively optimal height-`k` policy.
 */
enum AdasubStatus adasub_optimal_value(const struct AdasubInstance *instance,
                                       uintptr_t k,
                                       uint64_t cap,
                                       double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ADASUB_H */
