#ifndef HQC_H
#define HQC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define HQC_OK 0

#define HQC_ERR_NULL_POINTER 1

#define HQC_ERR_INVALID_ARGUMENT 2

#define HQC_ERR_SCENARIO 3

#define HQC_ERR_NUMERICAL 4

#define HQC_ERR_ENCODING 5

#define HQC_ERR_BUFFER_TOO_SMALL 6

#define HQC_ERR_PANIC 7

#define HQC_SCHEME_OPTICAL 0

#define HQC_SCHEME_MOTIONAL 1

#define HQC_SCHEME_MOTIONAL_FULL 2

#define HQC_SCHEME_MODIFIED_OPTICAL 3

#define HQC_GATE_RY 0

#define HQC_GATE_RZ 1

#define HQC_GATE_PHASE4 2

/**
 * The holonomy of a synthesized gate loop.
 */
typedef struct HqcHolonomy HqcHolonomy;

/**
 * Physical parameters of a transfer.
 */
typedef struct HqcParams HqcParams;

/**
 * A parsed scenario file.
 */
typedef struct HqcScenario HqcScenario;

/**
 * Figures of merit of one transfer.
 */
typedef struct {
  double fidelity;
  double max_p1ph;
  double int_p1ph;
  double max_pe;
  double int_pe;
  double norm_loss;
} HqcTransferResult;

/**
 * Admissible transfer times `t_min < T < t_max`.
 */
typedef struct {
  double t_min;
  double t_max;
  double kappa_gamma_limit;
} HqcTimeWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` (NUL terminated,
 * truncated to `cap` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t hqc_last_error(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hqc_version(void);

/**
 * Default parameters.
 */
HqcParams *hqc_params_new(void);

/**
 * Parameters from a JSON object; missing fields take their defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t hqc_params_from_json(const char *json, HqcParams **out);

/**
 * # Safety
 * `params` must be null or a handle from this library, freed at most once.
 */
void hqc_params_free(HqcParams *params);

/**
 * Sets one field by name. Flags take `0` or `1`; cutoffs take
 * non-negative integers.
 *
 * # Safety
 * `params` must be a valid handle and `key` a NUL-terminated string.
 */
int32_t hqc_params_set(HqcParams *params, const char *key, double value);

/**
 * Reads one field by name; flags read as `0` or `1`.
 *
 * # Safety
 * `params` must be a valid handle, `key` a NUL-terminated string and `out`
 * a valid pointer.
 */
int32_t hqc_params_get(const HqcParams *params, const char *key, double *out);

/**
 * Transfers the logical word `(alpha, beta)` from atom 1 to atom 2.
 *
 * # Safety
 * `params` must be a valid handle and `out` a valid pointer.
 */
int32_t hqc_transfer(const HqcParams *params,
                     int32_t scheme,
                     uint8_t alpha,
                     uint8_t beta,
                     HqcTransferResult *out);

/**
 * Transfer-time window at safety factor `alpha`.
 *
 * # Safety
 * `params` must be a valid handle and `out` a valid pointer.
 */
int32_t hqc_time_window(const HqcParams *params, int32_t scheme, double alpha, HqcTimeWindow *out);

/**
 * Synthesizes the loop for `angle` and evaluates its holonomy with
 * `n_steps` midpoint factors.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t hqc_gate_new(int32_t kind, double angle, size_t n_steps, HqcHolonomy **out);

/**
 * # Safety
 * `hol` must be null or a handle from this library, freed at most once.
 */
void hqc_holonomy_free(HqcHolonomy *hol);

/**
 * Matrix dimension, or 0 for a null handle.
 *
 * # Safety
 * `hol` must be null or a valid handle.
 */
size_t hqc_holonomy_dim(const HqcHolonomy *hol);

/**
 * Copies the `dim × dim` unitary, row-major, into `re` and `im`.
 *
 * # Safety
 * `hol` must be a valid handle; `re` and `im` must point to `cap`
 * writable doubles each.
 */
int32_t hqc_holonomy_entries(const HqcHolonomy *hol, double *re, double *im, size_t cap);

/**
 * Stokes angle, max-entry discrepancy to the target gate and the
 * discretization error estimate. Any output pointer may be null.
 *
 * # Safety
 * `hol` must be a valid handle; non-null outputs must be valid pointers.
 */
int32_t hqc_holonomy_diagnostics(const HqcHolonomy *hol,
                                 double *stokes_angle,
                                 double *discrepancy,
                                 double *error_estimate);

/**
 * Parses and validates a scenario. Relative loop files resolve against
 * the working directory.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t hqc_scenario_from_json(const char *json, HqcScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library, freed at most once.
 */
void hqc_scenario_free(HqcScenario *scenario);

/**
 * Runs the scenario and returns its CSV (the same bytes the `hqc` CLI
 * writes) in `*csv`, to be released with [`hqc_string_free`]. `*ok` is set
 * to 0 when a gate discrepancy or self-check fails.
 *
 * # Safety
 * `scenario` must be a valid handle; `csv` and `ok` valid pointers.
 */
int32_t hqc_scenario_run(const HqcScenario *scenario, size_t workers, char **csv, int32_t *ok);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed at most once.
 */
void hqc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HQC_H */
