/* C interface for the hier-esn reservoir computing library. */

#ifndef HIER_ESN_H
#define HIER_ESN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HierEsnStatus {
  HierEsnStatus_Ok = 0,
  HierEsnStatus_NullPointer = 1,
  HierEsnStatus_InvalidArgument = 2,
  HierEsnStatus_Dimension = 3,
  HierEsnStatus_Convergence = 4,
  HierEsnStatus_Singular = 5,
  HierEsnStatus_Degenerate = 6,
  HierEsnStatus_InsufficientData = 7,
  HierEsnStatus_DataFormat = 8,
  HierEsnStatus_Io = 9,
  /**
   * Unexpected internal failure (a panic caught at the boundary).
   */
  HierEsnStatus_Internal = 10,
} HierEsnStatus;

/**
 * A built reservoir network.
 */
typedef struct HierEsnNetwork HierEsnNetwork;

/**
 * A trained readout.
 */
typedef struct HierEsnReadout HierEsnReadout;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hier_esn_version(void);

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hier_esn_last_error(void);

/**
 * Free a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned by a `hier_esn_*` call that
 * documents this deallocator, and must not be used afterwards.
 */
void hier_esn_string_free(char *s);

/**
 * Build a network.
 *
 * `sub_sizes` holds `n_subs` node counts; `hyper` holds `3 * n_subs`
 * values laid out as (input scaling, spectral radius, leaky rate) per
 * sub-reservoir, each in (0, 1].
 *
 * # Safety
 * `sub_sizes` must point to `n_subs` readable elements, `hyper` to
 * `3 * n_subs`, and `out` must be a valid destination pointer.
 */
enum HierEsnStatus hier_esn_network_new(uint32_t kind,
                                        const size_t *sub_sizes,
                                        size_t n_subs,
                                        size_t input_dim,
                                        const double *hyper,
                                        uint64_t seed,
                                        struct HierEsnNetwork **out);

/**
 * Rebuild a network from the JSON document produced by
 * [`hier_esn_network_to_json`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid destination.
 */
enum HierEsnStatus hier_esn_network_from_json(const char *json, struct HierEsnNetwork **out);

/**
 * Serialize a network as JSON (topology, hyperparameters and build seed).
 * The returned string must be freed with [`hier_esn_string_free`].
 *
 * # Safety
 * `net` must be a live handle from this library and `out` a valid
 * destination pointer.
 */
enum HierEsnStatus hier_esn_network_to_json(const struct HierEsnNetwork *net, char **out);

/**
 * Destroy a network handle.
 *
 * # Safety
 * `net` must be a pointer from `hier_esn_network_new`/`_from_json` that
 * has not been freed yet; it must not be used afterwards.
 */
void hier_esn_network_free(struct HierEsnNetwork *net);

/**
 * Total node count across all sub-reservoirs.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid destination.
 */
enum HierEsnStatus hier_esn_network_total_nodes(const struct HierEsnNetwork *net, size_t *out);

/**
 * Input dimension the network expects.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid destination.
 */
enum HierEsnStatus hier_esn_network_input_dim(const struct HierEsnNetwork *net, size_t *out);

/**
 * Zero every sub-reservoir state.
 *
 * # Safety
 * `net` must be a live handle.
 */
enum HierEsnStatus hier_esn_network_reset(struct HierEsnNetwork *net);

/**
 * Advance the network one step and write the concatenated state.
 *
 * # Safety
 * `input` must hold `input_len` readable doubles and `state_out` must
 * have room for `state_len == total_nodes` doubles.
 */
enum HierEsnStatus hier_esn_network_step(struct HierEsnNetwork *net,
                                         const double *input,
                                         size_t input_len,
                                         double *state_out,
                                         size_t state_len);

/**
 * Drive the network over `steps` rows of input (row-major
 * `steps x input_dim`) and write every concatenated state (row-major
 * `steps x total_nodes`).
 *
 * # Safety
 * `inputs` must hold `steps * input_dim` readable doubles and
 * `states_out` must have room for `states_len == steps * total_nodes`.
 */
enum HierEsnStatus hier_esn_network_run(struct HierEsnNetwork *net,
                                        const double *inputs,
                                        size_t steps,
                                        size_t input_dim,
                                        bool reset,
                                        double *states_out,
                                        size_t states_len);

/**
 * Run the network from a zero state over a training sequence and fit a
 * ridge readout on the rows at and after `washout`.
 *
 * `targets` is row-major `steps x n_outputs`.
 *
 * # Safety
 * `inputs` must hold `steps * input_dim` doubles, `targets`
 * `steps * n_outputs`, and `out` must be a valid destination.
 */
enum HierEsnStatus hier_esn_readout_train(struct HierEsnNetwork *net,
                                          const double *inputs,
                                          size_t steps,
                                          size_t input_dim,
                                          const double *targets,
                                          size_t n_outputs,
                                          size_t washout,
                                          bool append_raw_input,
                                          bool append_bias,
                                          double lambda,
                                          struct HierEsnReadout **out);

/**
 * Number of outputs a readout produces per step.
 *
 * # Safety
 * `readout` must be a live handle and `out` a valid destination.
 */
enum HierEsnStatus hier_esn_readout_outputs(const struct HierEsnReadout *readout, size_t *out);

/**
 * Drive the network over an input sequence and apply the readout to every
 * step. `predictions_out` is row-major `steps x n_outputs`.
 *
 * # Safety
 * `inputs` must hold `steps * input_dim` doubles and `predictions_out`
 * room for `predictions_len == steps * n_outputs`.
 */
enum HierEsnStatus hier_esn_readout_predict(const struct HierEsnReadout *readout,
                                            struct HierEsnNetwork *net,
                                            const double *inputs,
                                            size_t steps,
                                            size_t input_dim,
                                            bool reset,
                                            double *predictions_out,
                                            size_t predictions_len);

/**
 * Destroy a readout handle.
 *
 * # Safety
 * `readout` must be a pointer from `hier_esn_readout_train` not yet
 * freed; it must not be used afterwards.
 */
void hier_esn_readout_free(struct HierEsnReadout *readout);

/**
 * Normalized root mean squared error between two series.
 *
 * # Safety
 * `predicted` and `target` must each hold `len` readable doubles and
 * `out` must be a valid destination.
 */
enum HierEsnStatus hier_esn_nrmse(const double *predicted,
                                  const double *target,
                                  size_t len,
                                  double *out);

/**
 * Generate a NARMA10 input/target pair. `u_out` receives the drive and
 * `target_out` the one-step-ahead system output, `length` values each.
 *
 * # Safety
 * `u_out` and `target_out` must each have room for `length` doubles.
 */
enum HierEsnStatus hier_esn_narma10(size_t length,
                                    uint64_t seed,
                                    double *u_out,
                                    double *target_out);

/**
 * Generate the MSO12 series (sum of twelve sinusoids).
 *
 * # Safety
 * `out` must have room for `length` doubles.
 */
enum HierEsnStatus hier_esn_mso12(size_t length, double *out);

/**
 * Generate a Mackey-Glass series at unit sampling (RK4, dt = 0.1).
 *
 * # Safety
 * `out` must have room for `length` doubles.
 */
enum HierEsnStatus hier_esn_mackey_glass(size_t length, double tau, uint64_t seed, double *out);

/**
 * Estimate the spectral radius of a square row-major `n x n` matrix.
 *
 * # Safety
 * `matrix` must hold `n * n` readable doubles and `out` must be a valid
 * destination.
 */
enum HierEsnStatus hier_esn_spectral_radius(const double *matrix, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIER_ESN_H */
