#ifndef SE3_DIFFUSE_H
#define SE3_DIFFUSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum Se3dStatus {
  SE3D_STATUS_OK = 0,
  SE3D_STATUS_INVALID_INPUT = 1,
  SE3D_STATUS_NUMERICAL = 2,
  SE3D_STATUS_IO = 3,
  SE3D_STATUS_NULL_POINTER = 4,
  SE3D_STATUS_PANIC = 5,
} Se3dStatus;

/**
 * Opaque IGSO3 sampling table for one diffusion time.
 */
typedef struct Se3dIgso3Table Se3dIgso3Table;

/**
 * Opaque random stream.
 */
typedef struct Se3dRng Se3dRng;

/**
 * Schedule parameters; `logarithmic` nonzero selects the logarithmic
 * rotation schedule.
 */
typedef struct Se3dScheduleParams {
  double beta_min;
  double beta_max;
  double sigma_min;
  double sigma_max;
  int32_t logarithmic;
} Se3dScheduleParams;

/**
 * Both schedules evaluated at one time.
 */
typedef struct Se3dScheduleValues {
  double beta;
  double g_x;
  double trans_var;
  double sigma_r;
  double rot_var;
  double g_r;
} Se3dScheduleValues;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread (empty after success).
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *se3d_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *se3d_version(void);

/**
 * `exp(hat(v))` for a rotation vector `v`.
 *
 * # Safety
 * `v` must point to 3 doubles and `out` to 9 writable doubles.
 */
enum Se3dStatus se3d_so3_exp(const double *v, double *out);

/**
 * Rotation vector of `r` with norm in `[0, π]`.
 *
 * # Safety
 * `r` must point to 9 doubles and `out` to 3 writable doubles.
 */
enum Se3dStatus se3d_so3_log(const double *r, double *out);

/**
 * Rotation angle of `r` in `[0, π]`.
 *
 * # Safety
 * `r` must point to 9 doubles and `out` to one writable double.
 */
enum Se3dStatus se3d_so3_angle(const double *r, double *out);

/**
 * Heat-kernel density `f(ω, t)` and `∂f/∂ω`. `terms = 0` selects the
 * default truncation.
 *
 * # Safety
 * `f` and `df` must each point to one writable double.
 */
enum Se3dStatus se3d_igso3_f(double omega, double t, size_t terms, double *f, double *df);

/**
 * Conditional score `∇_{rt} log IGSO3(rt; r0, t)`, a 3×3 tangent at `rt`.
 *
 * # Safety
 * `r0` and `rt` must point to 9 doubles, `out` to 9 writable doubles.
 */
enum Se3dStatus se3d_igso3_score(const double *r0,
                                 const double *rt,
                                 double t,
                                 size_t terms,
                                 double *out);

/**
 * Stream `index` of `seed`. Never null.
 */
struct Se3dRng *se3d_rng_new(uint64_t seed, uint64_t index);

/**
 * # Safety
 * `rng` must come from [`se3d_rng_new`] and not be used afterwards; null
 * is ignored.
 */
void se3d_rng_free(struct Se3dRng *rng);

/**
 * Builds a table at time `t` with `terms` series terms and `grid` angles
 * (0 selects the defaults).
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum Se3dStatus se3d_igso3_table_build(double t,
                                       size_t terms,
                                       size_t grid,
                                       struct Se3dIgso3Table **out);

/**
 * # Safety
 * `table` must come from [`se3d_igso3_table_build`] and not be used
 * afterwards; null is ignored.
 */
void se3d_igso3_table_free(struct Se3dIgso3Table *table);

/**
 * Draw from IGSO3 centred at `r0`.
 *
 * # Safety
 * `table` and `rng` must be live handles, `r0` 9 doubles, `out` 9
 * writable doubles.
 */
enum Se3dStatus se3d_igso3_table_sample(const struct Se3dIgso3Table *table,
                                        const double *r0,
                                        struct Se3dRng *rng,
                                        double *out);

/**
 * Interpolated density `f(ω)` from the table.
 *
 * # Safety
 * `table` must be a live handle and `out` one writable double.
 */
enum Se3dStatus se3d_igso3_table_density(const struct Se3dIgso3Table *table,
                                         double omega,
                                         double *out);

/**
 * `E‖∇ log p_{t|0}‖²` under the table's law.
 *
 * # Safety
 * `table` must be a live handle and `out` one writable double.
 */
enum Se3dStatus se3d_igso3_table_expected_score_norm_sq(const struct Se3dIgso3Table *table,
                                                        double *out);

struct Se3dScheduleParams se3d_schedule_default_params(void);

/**
 * Evaluates the schedules at `s ∈ [0, 1]`.
 *
 * # Safety
 * `params` must point to a parameter struct and `out` to a writable one.
 */
enum Se3dStatus se3d_schedule_eval(const struct Se3dScheduleParams *params,
                                   double s,
                                   struct Se3dScheduleValues *out);

/**
 * Residue frame from N, CA, C positions (nm).
 *
 * # Safety
 * `n`, `ca`, `c` must point to 3 doubles; `rotation` to 9 and
 * `translation` to 3 writable doubles.
 */
enum Se3dStatus se3d_atom2frame(const double *n,
                                const double *ca,
                                const double *c,
                                double *rotation,
                                double *translation);

/**
 * N, CA, C, O positions (12 doubles, in that order) of the bundled ideal
 * residue placed by the frame, with the oxygen turned by `psi` radians.
 *
 * # Safety
 * `rotation` must point to 9 doubles, `translation` to 3, `out` to 12
 * writable doubles.
 */
enum Se3dStatus se3d_frame_to_atoms(const double *rotation,
                                    const double *translation,
                                    double psi,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SE3_DIFFUSE_H */
