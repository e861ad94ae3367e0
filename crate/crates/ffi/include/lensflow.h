/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef LENSFLOW_H
#define LENSFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LfStatus {
  LfStatus_Ok = 0,
  LfStatus_NullPointer = 1,
  LfStatus_InvalidParams = 2,
  LfStatus_Domain = 3,
  LfStatus_NoConvergence = 4,
  LfStatus_Integration = 5,
  LfStatus_Validation = 6,
  LfStatus_OutOfRange = 7,
  LfStatus_Panic = 8,
  LfStatus_Other = 9,
} LfStatus;

typedef enum LfFlowMode {
  LfFlowMode_Rmcf = 0,
  LfFlowMode_Mcf = 1,
} LfFlowMode;

typedef enum LfTarget {
  LfTarget_S0 = 0,
  LfTarget_SInfinity = 1,
  LfTarget_Stationary = 2,
} LfTarget;

/*
 A solved soliton profile with its critical radii.
 */
typedef struct LfProfile LfProfile;

typedef struct LfTrajectory LfTrajectory;

typedef struct LfCriticalRadii {
  double r1;
  double r2;
  double w1;
  double w2;
  double dlambda_dr_at_r1;
  double dlambda_dr_at_r2;
} LfCriticalRadii;

/*
 Summary of one trajectory. Infinite maximal times are `INFINITY`, a
 missing Type-I constant is `NAN`.
 */
typedef struct LfFlowSummary {
  enum LfTarget target;
  double t_prime_ode;
  double t_prime_quadrature;
  double type_i_constant;
  size_t sample_count;
} LfFlowSummary;

/*
 One trajectory sample; `sigma` is `NAN` for MCF.
 */
typedef struct LfSample {
  double t;
  double sigma;
  double r;
  double h;
  double lambda;
  double a2;
} LfSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *lf_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *lf_version(void);

/*
 Solves the profile for `(n, k)`. `grid = 0` selects the default grid.

 # Safety
 `out` must be valid for writing one pointer.
 */
enum LfStatus lf_profile_new(uint32_t n, uint32_t k, size_t grid, struct LfProfile **out);

/*
 # Safety
 `profile` must come from [`lf_profile_new`] and not be used afterwards.
 */
void lf_profile_free(struct LfProfile *profile);

/*
 # Safety
 `profile` must be a live handle and `out` valid for writing.
 */
enum LfStatus lf_profile_constant(const struct LfProfile *profile, double *out);

/*
 # Safety
 `profile` must be a live handle and `out` valid for writing.
 */
enum LfStatus lf_profile_critical_radii(const struct LfProfile *profile,
                                        struct LfCriticalRadii *out);

/*
 `λ(r)` and `|A(ι_r)|²`; either output may be null.

 # Safety
 `profile` must be a live handle; non-null outputs must be valid for writing.
 */
enum LfStatus lf_profile_lambda(const struct LfProfile *profile,
                                double r,
                                double *lambda,
                                double *norm_a2);

/*
 Integrates one trajectory. `t_horizon` is ignored for MCF.

 # Safety
 `profile` must be a live handle and `out` valid for writing one pointer.
 */
enum LfStatus lf_flow_integrate(const struct LfProfile *profile,
                                enum LfFlowMode mode,
                                double r0,
                                double t_horizon,
                                struct LfTrajectory **out);

/*
 Closed-form maximal time without integrating.

 # Safety
 `profile` must be a live handle and `out` valid for writing.
 */
enum LfStatus lf_flow_maximal_time(const struct LfProfile *profile,
                                   enum LfFlowMode mode,
                                   double r0,
                                   double t_horizon,
                                   double *out);

/*
 # Safety
 `traj` must come from [`lf_flow_integrate`] and not be used afterwards.
 */
void lf_trajectory_free(struct LfTrajectory *traj);

/*
 # Safety
 `traj` must be a live handle and `out` valid for writing.
 */
enum LfStatus lf_trajectory_summary(const struct LfTrajectory *traj, struct LfFlowSummary *out);

/*
 Copies sample `index` into `out`.

 # Safety
 `traj` must be a live handle and `out` valid for writing.
 */
enum LfStatus lf_trajectory_sample(const struct LfTrajectory *traj,
                                   size_t index,
                                   struct LfSample *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LENSFLOW_H */
