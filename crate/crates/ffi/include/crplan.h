/* C interface for the crplan motion-planning library.
 *
 * Every function returns a CrpStatus; out-parameters are written only when
 * the status is CRP_STATUS_OK. Handles are opaque: create them with the
 * corresponding *_load / *_run call and release them with the matching
 * *_free call exactly once. All angles are radians and all distances are
 * millimetres.
 */

#ifndef CRPLAN_H
#define CRPLAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code returned by every fallible function.
 */
typedef enum CrpStatus {
  /**
   * The call succeeded and all out-parameters were written.
   */
  CRP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CRP_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  CRP_STATUS_INVALID_UTF8 = 2,
  /**
   * A scenario file could not be parsed.
   */
  CRP_STATUS_PARSE_ERROR = 3,
  /**
   * A scenario file parsed but violates a semantic constraint.
   */
  CRP_STATUS_VALIDATION_ERROR = 4,
  /**
   * Planning failed (no path found, singular task, undefined escape).
   */
  CRP_STATUS_PLANNING_FAILED = 5,
  /**
   * A file could not be read or written.
   */
  CRP_STATUS_IO_ERROR = 6,
  /**
   * An index argument was out of range.
   */
  CRP_STATUS_OUT_OF_RANGE = 7,
  /**
   * An argument value was outside its documented domain.
   */
  CRP_STATUS_INVALID_ARGUMENT = 8,
  /**
   * An internal invariant failed; the library caught a panic.
   */
  CRP_STATUS_INTERNAL = 9,
} CrpStatus;

/**
 * Planner selector accepted by [`crp_scenario_run_with`].
 *
 * Passed as a plain `uint32_t` so that out-of-range values can be rejected
 * with [`CrpStatus::InvalidArgument`] instead of being undefined behavior.
 */
typedef enum CrpPlanner {
  /**
   * Workspace path tracking with null-space obstacle avoidance.
   */
  CRP_PLANNER_AVOIDANCE = 0,
  /**
   * Pure tracking; the avoidance term is disabled.
   */
  CRP_PLANNER_NO_AVOIDANCE = 1,
  /**
   * Tracking plus a random null-space perturbation (baseline).
   */
  CRP_PLANNER_RANDOM_NULLSPACE = 2,
  /**
   * Configuration-space sampling search (baseline).
   */
  CRP_PLANNER_CSPACE_RRT_STAR = 3,
} CrpPlanner;

/**
 * Failure classification reported by [`crp_report_failure_reason`].
 */
typedef enum CrpFailureReason {
  /**
   * Every redraw of the random null-space vector produced a collision.
   */
  CRP_FAILURE_REASON_STALLED = 0,
  /**
   * The run entered a colliding state.
   */
  CRP_FAILURE_REASON_COLLISION = 1,
  /**
   * The iteration budget ran out before the goal test passed.
   */
  CRP_FAILURE_REASON_ITERATIONS_EXHAUSTED = 2,
} CrpFailureReason;

/**
 * Opaque handle to the outcome of a run.
 */
typedef struct CrpReport CrpReport;

/**
 * Opaque handle to a loaded scenario.
 */
typedef struct CrpScenario CrpScenario;

/**
 * Wall-clock timing breakdown of a run, read with [`crp_report_timings`].
 */
typedef struct CrpTimings {
  /**
   * Seconds spent building the end-effector path.
   */
  double path_planning_s;
  /**
   * Seconds spent executing planner steps.
   */
  double motion_planning_s;
  /**
   * Sum of the two.
   */
  double total_s;
} CrpTimings;

/**
 * One recorded planner step, read with [`crp_report_step`].
 */
typedef struct CrpStepView {
  /**
   * Configuration after the step: `theta1, delta1, theta2, delta2`.
   */
  double config[4];
  /**
   * End-effector position actually reached, mm.
   */
  double ee_actual[3];
  /**
   * Waypoint the step was asked to reach, mm.
   */
  double ee_expected[3];
  /**
   * Distance between the two, mm.
   */
  double tracking_error;
  /**
   * Smallest clearance to any obstacle, mm; +inf when there are none.
   */
  double min_clearance;
  /**
   * Tracking-gain value in effect during the step.
   */
  double g_h;
  /**
   * Escape-gain value in effect during the step.
   */
  double g_v;
  /**
   * Whether the avoidance term contributed to this step.
   */
  bool avoidance_active;
  /**
   * Index of the link closest to an obstacle (0-3 from the base), or -1
   * when there are no obstacles.
   */
  int32_t closest_link;
} CrpStepView;

/**
 * Manipulator geometry accepted by the stateless kernels.
 *
 * Bend-angle limits and the straight-segment threshold always use the
 * library defaults; only the lengths and the body radius vary here.
 */
typedef struct CrpParams {
  /**
   * Arc length of each continuum segment, mm.
   */
  double spring_length;
  /**
   * Length of the first rigid link, mm.
   */
  double rigid_length_1;
  /**
   * Length of the second rigid link, mm.
   */
  double rigid_length_2;
  /**
   * Radius of the body tube, mm.
   */
  double body_radius;
} CrpParams;

/**
 * Spherical obstacle accepted by [`crp_min_clearance`].
 */
typedef struct CrpSphere {
  /**
   * Obstacle center, mm.
   */
  double center[3];
  /**
   * Obstacle radius, mm.
   */
  double radius;
} CrpSphere;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the message describing the most recent failure on the calling
 * thread, or null when the last call on this thread succeeded.
 *
 * The pointer stays valid until the next crplan call on the same thread;
 * copy the string before calling anything else.
 */
const char *crp_last_error_message(void);

/**
 * Returns the library version as a static nul-terminated string.
 */
const char *crp_version(void);

/**
 * Loads a scenario file and hands back an owned handle.
 *
 * # Safety
 * `path` must point to a nul-terminated string and `out` to a writable
 * pointer slot. On success the slot receives a handle that must be released
 * with [`crp_scenario_free`].
 */
enum CrpStatus crp_scenario_load(const char *path, struct CrpScenario **out);

/**
 * Releases a scenario handle. Passing null is a no-op.
 *
 * # Safety
 * `scenario` must be null or a handle obtained from [`crp_scenario_load`]
 * that has not been freed yet.
 */
void crp_scenario_free(struct CrpScenario *scenario);

/**
 * Runs a scenario with its bundled seed and planner.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a writable pointer slot. On
 * success the slot receives a handle that must be released with
 * [`crp_report_free`].
 */
enum CrpStatus crp_scenario_run(const struct CrpScenario *scenario, struct CrpReport **out);

/**
 * Runs a scenario with an explicit seed and planner (one of the
 * [`CrpPlanner`] values).
 *
 * # Safety
 * Same contract as [`crp_scenario_run`].
 */
enum CrpStatus crp_scenario_run_with(const struct CrpScenario *scenario,
                                     uint64_t seed,
                                     uint32_t planner,
                                     struct CrpReport **out);

/**
 * Releases a report handle. Passing null is a no-op.
 *
 * # Safety
 * `report` must be null or a handle obtained from a run call that has not
 * been freed yet.
 */
void crp_report_free(struct CrpReport *report);

/**
 * Whether the run reached its goal.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_succeeded(const struct CrpReport *report, bool *out);

/**
 * Whether any step of the run touched an obstacle.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_collided(const struct CrpReport *report, bool *out);

/**
 * Failure classification as a [`CrpFailureReason`] value, or -1 when the
 * run succeeded.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_failure_reason(const struct CrpReport *report, int32_t *out);

/**
 * Number of recorded steps (including the initial state).
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_step_count(const struct CrpReport *report, size_t *out);

/**
 * Smallest clearance over the whole run, mm; +inf when the scenario has no
 * obstacles.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_min_clearance(const struct CrpReport *report, double *out);

/**
 * Tracking error of the final step, mm.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_final_tracking_error(const struct CrpReport *report, double *out);

/**
 * Wall-clock timing breakdown of the run.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_timings(const struct CrpReport *report, struct CrpTimings *out);

/**
 * Copies the step at `index` (0-based, `< crp_report_step_count`) into
 * `out`.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum CrpStatus crp_report_step(const struct CrpReport *report,
                               size_t index,
                               struct CrpStepView *out);

/**
 * Writes the full per-step trace of a run to `path` as CSV.
 *
 * # Safety
 * `report` must be a live handle and `path` a nul-terminated string.
 */
enum CrpStatus crp_report_write_csv(const struct CrpReport *report, const char *path);

/**
 * Writes the calibrated default manipulator geometry into `out`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CrpStatus crp_default_params(struct CrpParams *out);

/**
 * Computes the five joint positions of the kinematic chain for a
 * configuration: base, first segment end, first link end, second segment
 * end, end-effector. Writes 15 doubles (five x,y,z triples) to
 * `out_joints`.
 *
 * # Safety
 * `config` must point to four readable doubles, `params` must be null
 * (library defaults) or point to a valid [`CrpParams`], and `out_joints`
 * must point to 15 writable doubles.
 */
enum CrpStatus crp_forward_kinematics(const double *config,
                                      const struct CrpParams *params,
                                      double *out_joints);

/**
 * Computes the smallest distance from the manipulator body surface to any
 * obstacle surface. With zero obstacles the clearance is +inf.
 *
 * # Safety
 * `config` must point to four readable doubles, `params` must be null
 * (library defaults) or valid, `obstacles` must point to `n_obstacles`
 * readable [`CrpSphere`] values (null is allowed when `n_obstacles` is 0),
 * and `out_clearance` must be writable.
 */
enum CrpStatus crp_min_clearance(const double *config,
                                 const struct CrpParams *params,
                                 const struct CrpSphere *obstacles,
                                 size_t n_obstacles,
                                 double *out_clearance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRPLAN_H */
