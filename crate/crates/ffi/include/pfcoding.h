#ifndef PFCODING_H
#define PFCODING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfcStatus {
  PFC_STATUS_OK = 0,
  PFC_STATUS_NULL_POINTER = 1,
  PFC_STATUS_INVALID_UTF8 = 2,
  PFC_STATUS_PARSE = 3,
  PFC_STATUS_INVALID_NETWORK = 4,
  PFC_STATUS_DOMAIN = 5,
  PFC_STATUS_NON_CONVERGENCE = 6,
  PFC_STATUS_OUT_OF_RANGE = 7,
  PFC_STATUS_INTERNAL = 8,
} PfcStatus;

/**
 * Opaque validated network.
 */
typedef struct PfcNetwork PfcNetwork;

/**
 * Opaque converged solution.
 */
typedef struct PfcSolution PfcSolution;

/**
 * Solver settings. Obtain defaults from [`pfc_config_default`].
 */
typedef struct PfcConfig {
  /**
   * Subgradient step; `<= 0` selects the automatic step.
   */
  double step_size;
  bool diminishing;
  uint64_t max_iterations;
  double tol_price;
  double tol_slack;
  double tol_kkt;
  double epsilon_di;
  double x_margin;
} PfcConfig;

/**
 * Per-flow result.
 */
typedef struct PfcFlowResult {
  double n;
  double x;
  double rate;
  double error_bound;
  double throughput;
  double airtime_fraction;
} PfcFlowResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pfc_last_error_message(void);

/**
 * Parses and validates a JSON scenario.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum PfcStatus pfc_network_from_json(const char *json, struct PfcNetwork **out);

/**
 * # Safety
 * `net` must come from [`pfc_network_from_json`] and not be used afterwards.
 */
void pfc_network_free(struct PfcNetwork *net);

/**
 * # Safety
 * `net` must be a live network handle.
 */
size_t pfc_network_flow_count(const struct PfcNetwork *net);

struct PfcConfig pfc_config_default(void);

/**
 * Solves `net`. A null `cfg` uses the defaults.
 *
 * # Safety
 * `net` must be a live handle, `cfg` null or valid, `out` valid.
 */
enum PfcStatus pfc_solve(const struct PfcNetwork *net,
                         const struct PfcConfig *cfg,
                         struct PfcSolution **out);

/**
 * # Safety
 * `sol` must be a live solution handle.
 */
size_t pfc_solution_flow_count(const struct PfcSolution *sol);

/**
 * Copies flow `index` of a solution into `out`. Airtime is summed over the
 * route as a fraction of each cell's period.
 *
 * # Safety
 * `net` and `sol` must be live handles from the same solve; `out` valid.
 */
enum PfcStatus pfc_solution_flow(const struct PfcNetwork *net,
                                 const struct PfcSolution *sol,
                                 size_t index,
                                 struct PfcFlowResult *out);

/**
 * Network utility, NaN for a null handle.
 *
 * # Safety
 * `sol` must be null or a live solution handle.
 */
double pfc_solution_utility(const struct PfcSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live solution handle.
 */
uint64_t pfc_solution_iterations(const struct PfcSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live solution handle.
 */
double pfc_solution_duality_gap(const struct PfcSolution *sol);

/**
 * # Safety
 * `sol` must come from [`pfc_solve`] and not be used afterwards.
 */
void pfc_solution_free(struct PfcSolution *sol);

/**
 * Binary KL divergence `I(x || beta)` in nats.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PfcStatus pfc_rate_function(double x, double beta, double *out);

/**
 * Chernoff upper bound `exp(-D n I(x || beta))`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PfcStatus pfc_chernoff_upper(uint32_t deadline, double n, double x, double beta, double *out);

/**
 * Lower bound on the decoding failure probability.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PfcStatus pfc_lower_bound(uint32_t deadline, double n, double x, double beta, double *out);

/**
 * Exact MDS decoding failure probability for integer block parameters.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PfcStatus pfc_exact_error(uint64_t deadline, uint64_t n, uint64_t k, double beta, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PFCODING_H */
