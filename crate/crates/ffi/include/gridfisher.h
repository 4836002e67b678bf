/* C interface to the gridfisher lattice Fisher-information library. */

#ifndef GRIDFISHER_H
#define GRIDFISHER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum gf_status {
  GF_OK = 0,
  GF_ERR_INVALID_ARGUMENT = 1,
  GF_ERR_TRUNCATION = 2,
  GF_ERR_NUMERICAL = 3,
  GF_ERR_NULL_POINTER = 4,
} gf_status;

/**
 * Opaque lattice handle (dimension 2 or 3).
 */
typedef struct gf_lattice gf_lattice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (UTF-8, NUL-terminated, truncated to `len`)
 * of the calling thread into `buf`; returns the full message length.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
size_t gf_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gf_version(void);

/**
 * Builds a named lattice: "A2", "Z2", "Z3", "D3" or "D3star".
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum gf_status gf_lattice_named(const char *name, struct gf_lattice **out);

/**
 * Unit-covolume 2D lattice from fundamental-domain coordinates.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum gf_status gf_lattice_from_params2d(double x, double y, struct gf_lattice **out);

/**
 * Unit-covolume 3D lattice from the five-parameter chart.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum gf_status gf_lattice_from_params3d(double u,
                                        double v,
                                        double x,
                                        double y,
                                        double z,
                                        struct gf_lattice **out);

/**
 * Dual lattice `L*` (basis: inverse transpose).
 *
 * # Safety
 * `lattice` must come from a gf_lattice constructor; `out` must be valid.
 */
enum gf_status gf_lattice_dual(const struct gf_lattice *lattice, struct gf_lattice **out);

/**
 * Releases a lattice handle; null is a no-op.
 *
 * # Safety
 * `lattice` must come from a gf_lattice constructor and not be freed twice.
 */
void gf_lattice_free(struct gf_lattice *lattice);

/**
 * Lattice dimension (2 or 3); 0 for a null handle.
 *
 * # Safety
 * `lattice` must be a valid handle or null.
 */
int gf_lattice_dim(const struct gf_lattice *lattice);

/**
 * Covolume |det basis|; NaN for a null handle.
 *
 * # Safety
 * `lattice` must be a valid handle or null.
 */
double gf_lattice_covolume(const struct gf_lattice *lattice);

/**
 * Copies the basis matrix into `out` (dim*dim entries, column-major).
 *
 * # Safety
 * `out` must point to at least dim*dim writable doubles.
 */
enum gf_status gf_lattice_basis(const struct gf_lattice *lattice, double *out);

/**
 * Translated theta sum at `y` (dim entries): value and, when `gradient` is
 * not null, the analytic gradient (dim entries).
 *
 * # Safety
 * `y` must point to dim doubles; `value` must be valid; `gradient` must be
 * null or point to dim writable doubles.
 */
enum gf_status gf_theta(const struct gf_lattice *lattice,
                        const double *y,
                        double alpha,
                        double *value,
                        double *gradient);

/**
 * Per-point Fisher density `Q(y) = |grad theta|^2 / (4 theta)`.
 *
 * # Safety
 * `y` must point to dim doubles; `out` must be valid.
 */
enum gf_status gf_q_value(const struct gf_lattice *lattice,
                          const double *y,
                          double alpha,
                          double *out);

/**
 * Fisher functional over the uniform ball field `B_radius` with the default
 * quadrature rule; `normalize != 0` divides by the field mass.
 *
 * # Safety
 * `out` must be valid.
 */
enum gf_status gf_fisher(const struct gf_lattice *lattice,
                         double radius,
                         double alpha,
                         int normalize,
                         double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GRIDFISHER_H */
