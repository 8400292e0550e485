/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PCSCALE_H
#define PCSCALE_H

#include <stddef.h>
#include <stdint.h>

typedef enum PcsAlgorithm {
  PCS_ALGORITHM_SFT = 0,
  PCS_ALGORITHM_GRPO = 1,
  PCS_ALGORITHM_DAPO = 2,
  PCS_ALGORITHM_HYBRID = 3,
  PCS_ALGORITHM_UPT = 4,
} PcsAlgorithm;

typedef enum PcsConstraintMode {
  /**
   * Ceiling at or above the starting performance.
   */
  PCS_CONSTRAINT_MODE_HEADROOM = 0,
  PCS_CONSTRAINT_MODE_UNCONSTRAINED = 1,
} PcsConstraintMode;

typedef enum PcsPhaseLabel {
  PCS_PHASE_LABEL_ADAPTIVE = 0,
  PCS_PHASE_LABEL_STABLE = 1,
  PCS_PHASE_LABEL_MILD_OVERFIT = 2,
  PCS_PHASE_LABEL_SEVERE_OVERFIT = 3,
  PCS_PHASE_LABEL_INDETERMINATE = 4,
} PcsPhaseLabel;

typedef enum PcsStatus {
  PCS_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  PCS_STATUS_NULL_POINTER = 1,
  /**
   * An argument is outside its documented range.
   */
  PCS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The computation could not be carried out on this input.
   */
  PCS_STATUS_DOMAIN = 3,
  /**
   * A fit failed or the data were insufficient.
   */
  PCS_STATUS_FIT = 4,
  /**
   * A caller buffer was too small; the needed size was reported.
   */
  PCS_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * Internal panic; the message holds the payload.
   */
  PCS_STATUS_PANIC = 6,
} PcsStatus;

/**
 * Opaque fit result.
 */
typedef struct PcsFitResult PcsFitResult;

/**
 * Opaque model architecture.
 */
typedef struct PcsModelConfig PcsModelConfig;

/**
 * One training step. Fields that do not apply to `algorithm` are ignored.
 */
typedef struct PcsStepSpec {
  enum PcsAlgorithm algorithm;
  /**
   * Batch size; the generation batch for DAPO.
   */
  uint64_t batch;
  /**
   * DAPO training batch.
   */
  uint64_t update_batch;
  /**
   * DAPO sampling rounds.
   */
  uint64_t sampling_rounds;
  uint64_t group_size;
  uint64_t expert_per_prompt;
  uint64_t on_policy_kept;
  uint64_t off_policy_kept;
  uint64_t avg_seq_len;
  uint64_t avg_on_len;
  uint64_t avg_off_len;
} PcsStepSpec;

/**
 * Sigmoid curve parameters; compute is in exaFLOPs.
 */
typedef struct PcsSigmoidParams {
  double p_start;
  double ceiling;
  double c_mid;
  double steepness;
} PcsSigmoidParams;

/**
 * Fit settings. Start from [`pcs_fit_options_default`].
 */
typedef struct PcsFitOptions {
  double train_fraction;
  double z_threshold;
  /**
   * Nonzero enables least trimmed squares after outlier removal.
   */
  int use_lts;
  double lts_alpha;
  uint32_t max_outlier_rounds;
  uint32_t nls_max_iters;
  double nls_tolerance;
  uint32_t multistart_count;
  uint64_t seed;
  enum PcsConstraintMode mode;
  /**
   * Nonzero holds `p_start` at `pin_p_start_value`.
   */
  int pin_p_start;
  double pin_p_start_value;
} PcsFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next library call on the same thread.
 */
const char *pcs_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *pcs_status_name(enum PcsStatus status);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pcs_string_free(char *s);

/**
 * Library version, static.
 */
const char *pcs_version(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum PcsStatus pcs_model_config_new(uint64_t num_layers,
                                    uint64_t hidden_size,
                                    uint64_t ffn_intermediate,
                                    uint64_t vocab_size,
                                    uint64_t kv_total_dim,
                                    struct PcsModelConfig **out);

/**
 * # Safety
 * `cfg` must come from [`pcs_model_config_new`] or be null.
 */
void pcs_model_config_free(struct PcsModelConfig *cfg);

/**
 * Forward FLOPs per token at average sequence length `seq_len`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_forward_flops_per_token(const struct PcsModelConfig *cfg,
                                           uint64_t seq_len,
                                           double *out);

/**
 * FLOPs of one training step, as a double.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_step_flops(const struct PcsModelConfig *cfg,
                              const struct PcsStepSpec *spec,
                              double *out);

/**
 * Exact FLOPs of one training step as a 128-bit integer split into high
 * and low 64-bit halves.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_step_flops_exact(const struct PcsModelConfig *cfg,
                                    const struct PcsStepSpec *spec,
                                    uint64_t *out_hi,
                                    uint64_t *out_lo);

/**
 * Cumulative exaFLOPs after each of `n` steps, written to `out[0..n]`.
 *
 * # Safety
 * `steps` and `out` must hold `n` elements.
 */
enum PcsStatus pcs_cumulative_exaflops(const struct PcsModelConfig *cfg,
                                       const struct PcsStepSpec *steps,
                                       size_t n,
                                       double *out);

/**
 * Curve value at compute `x` (exaFLOPs, `>= 0`).
 *
 * # Safety
 * `out` must be valid.
 */
enum PcsStatus pcs_sigmoid_eval(struct PcsSigmoidParams params, double x, double *out);

/**
 * Curve value and its gradient with respect to
 * `(p_start, ceiling, c_mid, steepness)`; `grad` receives 4 values.
 *
 * # Safety
 * `value` must be valid and `grad` must hold 4 doubles.
 */
enum PcsStatus pcs_sigmoid_gradient(struct PcsSigmoidParams params,
                                    double x,
                                    double *value,
                                    double *grad);

struct PcsFitOptions pcs_fit_options_default(void);

/**
 * Robust fit of the curve to `(xs[i], ys[i])`, `xs` ascending in exaFLOPs.
 *
 * # Safety
 * `xs` and `ys` must hold `n` doubles; `options` may be null for defaults.
 */
enum PcsStatus pcs_fit(const double *xs,
                       const double *ys,
                       size_t n,
                       const struct PcsFitOptions *options,
                       struct PcsFitResult **out);

/**
 * # Safety
 * `r` must come from [`pcs_fit`] or be null.
 */
void pcs_fit_result_free(struct PcsFitResult *r);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_fit_result_params(const struct PcsFitResult *r, struct PcsSigmoidParams *out);

/**
 * Training R² over the final inliers. `has_value` is set to 0 when it is
 * undefined (constant targets), in which case `out` is left untouched.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_fit_result_r2_train(const struct PcsFitResult *r, int *has_value, double *out);

/**
 * Validation RMSE; `has_value` is 0 when the validation split is empty.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_fit_result_rmse_val(const struct PcsFitResult *r, int *has_value, double *out);

/**
 * Nonzero when the optimizer reported convergence.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_fit_result_converged(const struct PcsFitResult *r, int *out);

/**
 * Training-split indices of removed points. Call with `buf = NULL` to get
 * the count in `len`; otherwise `len` is the capacity on input and the
 * count on output.
 *
 * # Safety
 * `buf` must hold `*len` elements when not null.
 */
enum PcsStatus pcs_fit_result_removed(const struct PcsFitResult *r, size_t *buf, size_t *len);

/**
 * Fit artifact JSON, as written by `pcscale fit`. Release with
 * [`pcs_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum PcsStatus pcs_fit_result_to_json(const struct PcsFitResult *r, char **out);

/**
 * Label each point of a validation-loss curve. `out` receives `n` labels.
 *
 * # Safety
 * `xs`, `losses` and `out` must hold `n` elements.
 */
enum PcsStatus pcs_classify_phases(const double *xs,
                                   const double *losses,
                                   size_t n,
                                   double delta,
                                   double delta2,
                                   enum PcsPhaseLabel *out);

/**
 * Pearson correlation of `n` pairs.
 *
 * # Safety
 * `xs` and `ys` must hold `n` doubles.
 */
enum PcsStatus pcs_pearson(const double *xs, const double *ys, size_t n, double *out);

/**
 * Median absolute deviation (unscaled).
 *
 * # Safety
 * `values` must hold `n` doubles.
 */
enum PcsStatus pcs_mad(const double *values, size_t n, double *out);

/**
 * `successes / attempts`.
 *
 * # Safety
 * `out` must be valid.
 */
enum PcsStatus pcs_win_rate(uint64_t successes, uint64_t attempts, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCSCALE_H */
