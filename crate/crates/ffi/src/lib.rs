//! C ABI for the crplan motion-planning library.
//!
//! Conventions, enforced by every function in this crate:
//!
//! * Handles ([`CrpScenario`], [`CrpReport`]) are opaque. C code only ever
//!   holds pointers to them and releases each one exactly once with the
//!   matching `*_free` call.
//! * Every fallible function returns a [`CrpStatus`] and writes its result
//!   through an out-pointer only on success.
//! * No panic crosses the boundary: each entry point runs under
//!   `catch_unwind` and reports a caught panic as [`CrpStatus::Internal`].
//! * After any failure, [`crp_last_error_message`] returns a human-readable
//!   description of what went wrong on the current thread.
//!
//! Units are millimetres and radians throughout; configurations are passed
//! as four doubles in the order `theta1, delta1, theta2, delta2`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use crplan::baselines::FailureReason;
use crplan::kinematics::{forward_kinematics, Config, LinkId, ManipulatorParams};
use crplan::proximity::{manipulator_min_distance, SphereObstacle};
use crplan::report::{write_csv, RunReport};
use crplan::scenario::{load_scenario, run_scenario, Planner, Scenario};

/// Result code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrpStatus {
    /// The call succeeded and all out-parameters were written.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A scenario file could not be parsed.
    ParseError = 3,
    /// A scenario file parsed but violates a semantic constraint.
    ValidationError = 4,
    /// Planning failed (no path found, singular task, undefined escape).
    PlanningFailed = 5,
    /// A file could not be read or written.
    IoError = 6,
    /// An index argument was out of range.
    OutOfRange = 7,
    /// An argument value was outside its documented domain.
    InvalidArgument = 8,
    /// An internal invariant failed; the library caught a panic.
    Internal = 9,
}

/// Planner selector accepted by [`crp_scenario_run_with`].
///
/// Passed as a plain `uint32_t` so that out-of-range values can be rejected
/// with [`CrpStatus::InvalidArgument`] instead of being undefined behavior.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrpPlanner {
    /// Workspace path tracking with null-space obstacle avoidance.
    Avoidance = 0,
    /// Pure tracking; the avoidance term is disabled.
    NoAvoidance = 1,
    /// Tracking plus a random null-space perturbation (baseline).
    RandomNullspace = 2,
    /// Configuration-space sampling search (baseline).
    CspaceRrtStar = 3,
}

/// Failure classification reported by [`crp_report_failure_reason`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrpFailureReason {
    /// Every redraw of the random null-space vector produced a collision.
    Stalled = 0,
    /// The run entered a colliding state.
    Collision = 1,
    /// The iteration budget ran out before the goal test passed.
    IterationsExhausted = 2,
}

/// Manipulator geometry accepted by the stateless kernels.
///
/// Bend-angle limits and the straight-segment threshold always use the
/// library defaults; only the lengths and the body radius vary here.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrpParams {
    /// Arc length of each continuum segment, mm.
    pub spring_length: f64,
    /// Length of the first rigid link, mm.
    pub rigid_length_1: f64,
    /// Length of the second rigid link, mm.
    pub rigid_length_2: f64,
    /// Radius of the body tube, mm.
    pub body_radius: f64,
}

/// Spherical obstacle accepted by [`crp_min_clearance`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrpSphere {
    /// Obstacle center, mm.
    pub center: [f64; 3],
    /// Obstacle radius, mm.
    pub radius: f64,
}

/// One recorded planner step, read with [`crp_report_step`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CrpStepView {
    /// Configuration after the step: `theta1, delta1, theta2, delta2`.
    pub config: [f64; 4],
    /// End-effector position actually reached, mm.
    pub ee_actual: [f64; 3],
    /// Waypoint the step was asked to reach, mm.
    pub ee_expected: [f64; 3],
    /// Distance between the two, mm.
    pub tracking_error: f64,
    /// Smallest clearance to any obstacle, mm; +inf when there are none.
    pub min_clearance: f64,
    /// Tracking-gain value in effect during the step.
    pub g_h: f64,
    /// Escape-gain value in effect during the step.
    pub g_v: f64,
    /// Whether the avoidance term contributed to this step.
    pub avoidance_active: bool,
    /// Index of the link closest to an obstacle (0-3 from the base), or -1
    /// when there are no obstacles.
    pub closest_link: i32,
}

/// Wall-clock timing breakdown of a run, read with [`crp_report_timings`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CrpTimings {
    /// Seconds spent building the end-effector path.
    pub path_planning_s: f64,
    /// Seconds spent executing planner steps.
    pub motion_planning_s: f64,
    /// Sum of the two.
    pub total_s: f64,
}

/// Opaque handle to a loaded scenario.
pub struct CrpScenario(Scenario);

/// Opaque handle to the outcome of a run.
pub struct CrpReport(RunReport);

// ---------------------------------------------------------------------------
// Error reporting.

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

fn fail(status: CrpStatus, message: impl std::fmt::Display) -> CrpStatus {
    let text = message.to_string();
    let cstring = CString::new(text.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("error message unavailable").expect("static message"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
    status
}

fn status_of(e: &crplan::Error) -> CrpStatus {
    match e {
        crplan::Error::Parse { .. } => CrpStatus::ParseError,
        crplan::Error::Validation(_) => CrpStatus::ValidationError,
        crplan::Error::NoPathFound(_)
        | crplan::Error::SingularTask
        | crplan::Error::CoincidentEscape => CrpStatus::PlanningFailed,
        crplan::Error::Io(_) => CrpStatus::IoError,
    }
}

fn guard<F: FnOnce() -> CrpStatus>(body: F) -> CrpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(CrpStatus::Internal, "internal error: panic caught at the C boundary"),
    }
}

/// Returns the message describing the most recent failure on the calling
/// thread, or null when the last call on this thread succeeded.
///
/// The pointer stays valid until the next crplan call on the same thread;
/// copy the string before calling anything else.
#[no_mangle]
pub extern "C" fn crp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |msg| msg.as_ptr())
    })
}

/// Returns the library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn crp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Shared conversion helpers.

/// # Safety
/// `params` must be null or point to a valid `CrpParams`.
unsafe fn params_from(params: *const CrpParams) -> Result<ManipulatorParams, CrpStatus> {
    let mut out = ManipulatorParams::default();
    if !params.is_null() {
        let p = &*params;
        if !(p.spring_length > 0.0
            && p.rigid_length_1 > 0.0
            && p.rigid_length_2 > 0.0
            && p.body_radius >= 0.0)
        {
            return Err(fail(
                CrpStatus::InvalidArgument,
                "lengths must be positive and the body radius non-negative",
            ));
        }
        out.spring_length = p.spring_length;
        out.rigid_lengths = [p.rigid_length_1, p.rigid_length_2];
        out.body_radius = p.body_radius;
    }
    Ok(out)
}

/// # Safety
/// `config` must be null or point to four readable doubles.
unsafe fn config_from(config: *const f64) -> Result<Config, CrpStatus> {
    if config.is_null() {
        return Err(fail(CrpStatus::NullPointer, "config pointer is null"));
    }
    let q = std::slice::from_raw_parts(config, 4);
    if q.iter().any(|v| !v.is_finite()) {
        return Err(fail(CrpStatus::InvalidArgument, "config entries must be finite"));
    }
    Ok(Config::new(q[0], q[1], q[2], q[3]))
}

/// # Safety
/// `path` must be null or point to a nul-terminated string.
unsafe fn path_from<'a>(path: *const c_char) -> Result<&'a Path, CrpStatus> {
    if path.is_null() {
        return Err(fail(CrpStatus::NullPointer, "path pointer is null"));
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail(CrpStatus::InvalidUtf8, "path is not valid UTF-8")),
    }
}

fn link_index(link: LinkId) -> i32 {
    match link {
        LinkId::Continuum1 => 0,
        LinkId::Rigid1 => 1,
        LinkId::Continuum2 => 2,
        LinkId::Rigid2 => 3,
    }
}

fn planner_from(value: u32) -> Option<Planner> {
    match value {
        x if x == CrpPlanner::Avoidance as u32 => Some(Planner::Avoidance),
        x if x == CrpPlanner::NoAvoidance as u32 => Some(Planner::NoAvoidance),
        x if x == CrpPlanner::RandomNullspace as u32 => Some(Planner::RandomNullspace),
        x if x == CrpPlanner::CspaceRrtStar as u32 => Some(Planner::CspaceRrtStar),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Scenario lifecycle.

/// Loads a scenario file and hands back an owned handle.
///
/// # Safety
/// `path` must point to a nul-terminated string and `out` to a writable
/// pointer slot. On success the slot receives a handle that must be released
/// with [`crp_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn crp_scenario_load(
    path: *const c_char,
    out: *mut *mut CrpScenario,
) -> CrpStatus {
    guard(|| {
        if out.is_null() {
            return fail(CrpStatus::NullPointer, "out pointer is null");
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_scenario(path) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(CrpScenario(s)));
                CrpStatus::Ok
            }
            Err(e) => fail(status_of(&e), e),
        }
    })
}

/// Releases a scenario handle. Passing null is a no-op.
///
/// # Safety
/// `scenario` must be null or a handle obtained from [`crp_scenario_load`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn crp_scenario_free(scenario: *mut CrpScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs a scenario with its bundled seed and planner.
///
/// # Safety
/// `scenario` must be a live handle and `out` a writable pointer slot. On
/// success the slot receives a handle that must be released with
/// [`crp_report_free`].
#[no_mangle]
pub unsafe extern "C" fn crp_scenario_run(
    scenario: *const CrpScenario,
    out: *mut *mut CrpReport,
) -> CrpStatus {
    run_impl(scenario, None, None, out)
}

/// Runs a scenario with an explicit seed and planner (one of the
/// [`CrpPlanner`] values).
///
/// # Safety
/// Same contract as [`crp_scenario_run`].
#[no_mangle]
pub unsafe extern "C" fn crp_scenario_run_with(
    scenario: *const CrpScenario,
    seed: u64,
    planner: u32,
    out: *mut *mut CrpReport,
) -> CrpStatus {
    let Some(planner) = planner_from(planner) else {
        return fail(
            CrpStatus::InvalidArgument,
            format!("unknown planner selector {planner}"),
        );
    };
    run_impl(scenario, Some(seed), Some(planner), out)
}

/// # Safety
/// See [`crp_scenario_run`].
unsafe fn run_impl(
    scenario: *const CrpScenario,
    seed: Option<u64>,
    planner: Option<Planner>,
    out: *mut *mut CrpReport,
) -> CrpStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(CrpStatus::NullPointer, "scenario and out pointers must be non-null");
        }
        match run_scenario(&(*scenario).0, seed, planner) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(CrpReport(report)));
                CrpStatus::Ok
            }
            Err(e) => fail(status_of(&e), e),
        }
    })
}

// ---------------------------------------------------------------------------
// Report accessors.

/// Releases a report handle. Passing null is a no-op.
///
/// # Safety
/// `report` must be null or a handle obtained from a run call that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn crp_report_free(report: *mut CrpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle; dereferenced immediately.
unsafe fn report_ref<'a>(report: *const CrpReport) -> Result<&'a RunReport, CrpStatus> {
    if report.is_null() {
        return Err(fail(CrpStatus::NullPointer, "report pointer is null"));
    }
    Ok(&(*report).0)
}

/// Shared body of the scalar report getters: null-checks, then stores the
/// projected value. Not a macro so that the exported functions stay visible
/// to the header generator.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
unsafe fn report_get<T, F: FnOnce(&RunReport) -> T>(
    report: *const CrpReport,
    out: *mut T,
    project: F,
) -> CrpStatus {
    if out.is_null() {
        return fail(CrpStatus::NullPointer, "out pointer is null");
    }
    match report_ref(report) {
        Ok(rep) => {
            *out = project(rep);
            CrpStatus::Ok
        }
        Err(status) => status,
    }
}

/// Whether the run reached its goal.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_succeeded(
    report: *const CrpReport,
    out: *mut bool,
) -> CrpStatus {
    guard(|| report_get(report, out, |rep| rep.outcome.succeeded))
}

/// Whether any step of the run touched an obstacle.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_collided(
    report: *const CrpReport,
    out: *mut bool,
) -> CrpStatus {
    guard(|| report_get(report, out, |rep| rep.trajectory.collided()))
}

/// Failure classification as a [`CrpFailureReason`] value, or -1 when the
/// run succeeded.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_failure_reason(
    report: *const CrpReport,
    out: *mut i32,
) -> CrpStatus {
    guard(|| {
        report_get(report, out, |rep| match rep.outcome.failure_reason {
            None => -1,
            Some(FailureReason::Stalled) => CrpFailureReason::Stalled as i32,
            Some(FailureReason::Collision) => CrpFailureReason::Collision as i32,
            Some(FailureReason::IterationsExhausted) => {
                CrpFailureReason::IterationsExhausted as i32
            }
        })
    })
}

/// Number of recorded steps (including the initial state).
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_step_count(
    report: *const CrpReport,
    out: *mut usize,
) -> CrpStatus {
    guard(|| report_get(report, out, |rep| rep.trajectory.steps.len()))
}

/// Smallest clearance over the whole run, mm; +inf when the scenario has no
/// obstacles.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_min_clearance(
    report: *const CrpReport,
    out: *mut f64,
) -> CrpStatus {
    guard(|| {
        report_get(report, out, |rep| {
            rep.trajectory.min_clearance().unwrap_or(f64::INFINITY)
        })
    })
}

/// Tracking error of the final step, mm.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_final_tracking_error(
    report: *const CrpReport,
    out: *mut f64,
) -> CrpStatus {
    guard(|| report_get(report, out, |rep| rep.trajectory.final_tracking_error()))
}

/// Wall-clock timing breakdown of the run.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_timings(
    report: *const CrpReport,
    out: *mut CrpTimings,
) -> CrpStatus {
    guard(|| {
        report_get(report, out, |rep| CrpTimings {
            path_planning_s: rep.timings.path_planning,
            motion_planning_s: rep.timings.motion_planning,
            total_s: rep.timings.total(),
        })
    })
}

/// Copies the step at `index` (0-based, `< crp_report_step_count`) into
/// `out`.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crp_report_step(
    report: *const CrpReport,
    index: usize,
    out: *mut CrpStepView,
) -> CrpStatus {
    guard(|| {
        if out.is_null() {
            return fail(CrpStatus::NullPointer, "out pointer is null");
        }
        let rep = match report_ref(report) {
            Ok(r) => r,
            Err(status) => return status,
        };
        let steps = &rep.trajectory.steps;
        let Some(step) = steps.get(index) else {
            return fail(
                CrpStatus::OutOfRange,
                format!("step index {index} out of range (count {})", steps.len()),
            );
        };
        let q = step.config.as_vector();
        *out = CrpStepView {
            config: [q[0], q[1], q[2], q[3]],
            ee_actual: step.ee_actual.into(),
            ee_expected: step.ee_expected.into(),
            tracking_error: step.tracking_error,
            min_clearance: step
                .clearances
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            g_h: step.g_h,
            g_v: step.g_v,
            avoidance_active: step.avoidance_active,
            closest_link: step.closest_link.map_or(-1, link_index),
        };
        CrpStatus::Ok
    })
}

/// Writes the full per-step trace of a run to `path` as CSV.
///
/// # Safety
/// `report` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn crp_report_write_csv(
    report: *const CrpReport,
    path: *const c_char,
) -> CrpStatus {
    guard(|| {
        let rep = match report_ref(report) {
            Ok(r) => r,
            Err(status) => return status,
        };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match write_csv(rep, path) {
            Ok(()) => CrpStatus::Ok,
            Err(e) => fail(status_of(&e), e),
        }
    })
}

// ---------------------------------------------------------------------------
// Stateless kernels.

/// Writes the calibrated default manipulator geometry into `out`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crp_default_params(out: *mut CrpParams) -> CrpStatus {
    guard(|| {
        if out.is_null() {
            return fail(CrpStatus::NullPointer, "out pointer is null");
        }
        let p = ManipulatorParams::default();
        *out = CrpParams {
            spring_length: p.spring_length,
            rigid_length_1: p.rigid_lengths[0],
            rigid_length_2: p.rigid_lengths[1],
            body_radius: p.body_radius,
        };
        CrpStatus::Ok
    })
}

/// Computes the five joint positions of the kinematic chain for a
/// configuration: base, first segment end, first link end, second segment
/// end, end-effector. Writes 15 doubles (five x,y,z triples) to
/// `out_joints`.
///
/// # Safety
/// `config` must point to four readable doubles, `params` must be null
/// (library defaults) or point to a valid [`CrpParams`], and `out_joints`
/// must point to 15 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn crp_forward_kinematics(
    config: *const f64,
    params: *const CrpParams,
    out_joints: *mut f64,
) -> CrpStatus {
    guard(|| {
        if out_joints.is_null() {
            return fail(CrpStatus::NullPointer, "out_joints pointer is null");
        }
        let q = match config_from(config) {
            Ok(q) => q,
            Err(status) => return status,
        };
        let p = match params_from(params) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let chain = forward_kinematics(&q, &p);
        let out = std::slice::from_raw_parts_mut(out_joints, 15);
        for (i, joint) in chain.joints.iter().enumerate() {
            out[3 * i] = joint.x;
            out[3 * i + 1] = joint.y;
            out[3 * i + 2] = joint.z;
        }
        CrpStatus::Ok
    })
}

/// Computes the smallest distance from the manipulator body surface to any
/// obstacle surface. With zero obstacles the clearance is +inf.
///
/// # Safety
/// `config` must point to four readable doubles, `params` must be null
/// (library defaults) or valid, `obstacles` must point to `n_obstacles`
/// readable [`CrpSphere`] values (null is allowed when `n_obstacles` is 0),
/// and `out_clearance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crp_min_clearance(
    config: *const f64,
    params: *const CrpParams,
    obstacles: *const CrpSphere,
    n_obstacles: usize,
    out_clearance: *mut f64,
) -> CrpStatus {
    guard(|| {
        if out_clearance.is_null() {
            return fail(CrpStatus::NullPointer, "out_clearance pointer is null");
        }
        if obstacles.is_null() && n_obstacles > 0 {
            return fail(CrpStatus::NullPointer, "obstacles pointer is null");
        }
        let q = match config_from(config) {
            Ok(q) => q,
            Err(status) => return status,
        };
        let p = match params_from(params) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let spheres: Vec<SphereObstacle> = if n_obstacles == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(obstacles, n_obstacles)
                .iter()
                .map(|s| SphereObstacle {
                    center: nalgebra::Vector3::new(s.center[0], s.center[1], s.center[2]),
                    radius: s.radius,
                })
                .collect()
        };
        *out_clearance = manipulator_min_distance(&q, &p, &spheres)
            .map_or(f64::INFINITY, |r| r.clearance);
        CrpStatus::Ok
    })
}
