#ifndef SPLINENET_H
#define SPLINENET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every API call.
 */
typedef enum {
  SnStatusOk = 0,
  SnStatusNullArgument = 1,
  SnStatusInvalidArgument = 2,
  SnStatusUnsupported = 3,
  SnStatusNumeric = 4,
  SnStatusParse = 5,
  SnStatusIo = 6,
  SnStatusPanic = 7,
} SnStatus;

/**
 * Opaque compiled network.
 */
typedef struct SnNetwork SnNetwork;

/**
 * Opaque quasi-interpolant (a spline space plus fitted coefficients).
 */
typedef struct SnQuasiInterpolant SnQuasiInterpolant;

/**
 * Opaque tensor-product spline space.
 */
typedef struct SnSpace SnSpace;

/**
 * Scalar target function supplied by the caller: receives `dim` coordinates
 * and the caller's context pointer, returns f(x).
 */
typedef double (*SnTargetFn)(const double *x, size_t dim, void *ctx);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the most recent error message (NUL-terminated) into `buf`. Returns
 * the full length in bytes including the terminator; when `buf` is null or
 * `cap` is 0, nothing is copied and the required length is returned.
 */
size_t sn_last_error(char *buf, size_t cap);

/**
 * Create a spline space on [0,1]^dim with n knot intervals per axis and
 * B-spline order k.
 */
SnStatus sn_space_new(size_t dim, size_t n, size_t k, SnSpace **out);

void sn_space_free(SnSpace *space);

/**
 * Fit the quasi-interpolant of the caller's target over the space.
 */
SnStatus sn_quasi_interpolate(const SnSpace *space,
                              SnTargetFn target,
                              void *ctx,
                              SnQuasiInterpolant **out);

void sn_qi_free(SnQuasiInterpolant *qi);

/**
 * Evaluate the quasi-interpolant (or, with a non-null `alpha` multi-index of
 * length `dim`, one of its partial derivatives) at `x`.
 */
SnStatus sn_qi_eval(const SnQuasiInterpolant *qi,
                    const double *x,
                    size_t dim,
                    const size_t *alpha,
                    double *out);

/**
 * Compile the quasi-interpolant into an exact network; `bounded` selects the
 * unit-ball parameter mode.
 */
SnStatus sn_net_compile(const SnQuasiInterpolant *qi, bool bounded, SnNetwork **out);

void sn_net_free(SnNetwork *net);

/**
 * Evaluate a single-output network at `x` (length `dim`).
 */
SnStatus sn_net_eval(const SnNetwork *net, const double *x, size_t dim, double *out);

/**
 * Build the exact ∂/∂x_axis network of a compiled single-exponent network.
 */
SnStatus sn_net_derivative(const SnNetwork *net, size_t axis, SnNetwork **out);

/**
 * Number of nonzero parameters.
 */
SnStatus sn_net_param_count(const SnNetwork *net, size_t *out);

/**
 * Number of hidden layers.
 */
SnStatus sn_net_depth(const SnNetwork *net, size_t *out);

/**
 * Largest parameter magnitude over all weights and biases.
 */
SnStatus sn_net_max_abs_param(const SnNetwork *net, double *out);

/**
 * Serialize the network to the textual format. The returned string must be
 * released with `sn_string_free`.
 */
SnStatus sn_net_to_text(const SnNetwork *net, char **out);

/**
 * Parse a network from the textual format.
 */
SnStatus sn_net_from_text(const char *text, SnNetwork **out);

/**
 * Release a string returned by this library.
 */
void sn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLINENET_H */
