//! Inverse instantaneous kinematics (IIK) and the step-by-step motion
//! planner built on it.
//!
//! Given an end-effector path sampled as a sequence of waypoints, the
//! planner advances one waypoint per step with a resolved-rate update:
//!
//! ```text
//! q_new = q_old + W^{-1/2} (J_e W^{-1/2})^+ p_f
//!               + g_h (I - J_e^+ J_e) [J_co (I - J_e^+ J_e)]^+
//!                 (g_v p_o - J_co W^{-1/2} (J_e W^{-1/2})^+ p_e)
//! ```
//!
//! * the first term tracks the task velocity `p_e` with joint-limit
//!   weighting `W` and a drift correction folded into `p_f`;
//! * the second term lives in the null space of the end-effector Jacobian
//!   `J_e`, so it never disturbs tracking to first order. It drives the
//!   point of the body closest to an obstacle (`J_co` is that point's
//!   Jacobian) along an escape velocity `p_o`, blended in by two gains
//!   `g_h`/`g_v` that rise smoothly as clearance shrinks.
//!
//! The avoidance term only engages when the tentative step would actually
//! move the closest point towards the obstacle and the closest point is not
//! the end-effector itself (the tip must stay free to follow the task).

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::jacobian::{
    damped_pseudo_inverse, end_effector_jacobian, inv_sqrt_weights, is_task_singular,
    joint_limit_weights, point_jacobian, pseudo_inverse, pseudo_inverse_scaled, PointDescriptor,
    WeightState, PINV_REL_TOL, TASK_SINGULAR_FLOOR,
};
use crate::kinematics::{forward_kinematics, Config, LinkId, ManipulatorParams};
use crate::proximity::{chain_proximity, ChainProximity, ProximityResult, SphereObstacle};

/// Closest points with less than this much of the obstacle-center distance
/// are treated as coincident and produce [`Error::CoincidentEscape`].
pub const COINCIDENT_EPS: f64 = 1e-9;

/// Fraction of rigid link 2 beyond which the closest point counts as "the
/// end-effector" and avoidance is suppressed.
pub const TIP_FRACTION: f64 = 0.95;

/// Maximum Euclidean norm (radians) of the null-space avoidance term in one
/// step. Keeps commanded joint excursions inside the range where the
/// first-order model is trustworthy; well-conditioned escapes sit an order
/// of magnitude below this.
pub const AVOIDANCE_STEP_LIMIT: f64 = 0.3;

/// Maximum Euclidean norm (radians) of the tracking term in one step. Near
/// task singularities the pseudoinverse can demand a joint swing whose
/// true end-effector displacement bears no resemblance to the commanded
/// one; limiting the step keeps the model honest, and the next step's
/// drift correction makes up the task-space shortfall. Ordinary waypoint
/// steps sit far below this.
pub const TRACK_STEP_LIMIT: f64 = 0.3;

/// Margin (radians) the avoidance term keeps between a bending angle and
/// its bounds.
pub const BEND_BOUND_MARGIN: f64 = 0.02;

/// Largest fraction in `[0, 1]` of `delta` such that both bending
/// coordinates of `base + fraction * delta` stay at least
/// [`BEND_BOUND_MARGIN`] inside their bounds. Coordinates that are already
/// within the margin band contribute 0 (no motion deeper). Wrist
/// coordinates are unbounded and ignored.
fn bound_respecting_fraction(
    base: &Vector4<f64>,
    delta: &Vector4<f64>,
    limits: [f64; 2],
) -> f64 {
    let mut frac: f64 = 1.0;
    for i in [0usize, 2] {
        let d = delta[i];
        if d < 0.0 {
            let room = base[i] - (limits[0] + BEND_BOUND_MARGIN);
            frac = frac.min((room / -d).max(0.0));
        } else if d > 0.0 {
            let room = (limits[1] - BEND_BOUND_MARGIN) - base[i];
            frac = frac.min((room / d).max(0.0));
        }
    }
    frac.clamp(0.0, 1.0)
}

/// Keeps a step from carrying a bending angle onto its lower bound. An
/// exactly straight segment has no defined bending plane — the matching
/// wrist coordinate loses all authority and cannot be recovered by any
/// later first-order step — so a bending angle that was outside the margin
/// band stops at its edge instead of entering it. Angles already inside
/// the band (for example an initially straight segment) are left alone: the
/// floor only blocks *entering* the degenerate region, not leaving it.
fn bend_floor(stepped: Config, previous: &Config, limits: [f64; 2]) -> Config {
    let floor = limits[0] + BEND_BOUND_MARGIN;
    let mut v = stepped.as_vector();
    let prev = previous.as_vector();
    for i in [0usize, 2] {
        if prev[i] >= floor && v[i] < floor {
            v[i] = floor;
        }
    }
    Config::from_vector(&v)
}

/// Distance thresholds (mm) and escape speed for the avoidance blend.
///
/// All gains are functions of the surface-to-surface clearance `d`:
///
/// * `g_h` (homogeneous blend): 1 for `d <= r_max`, 0 for `d >= r`, raised
///   cosine in between — scales the whole null-space correction;
/// * `g_v` (escape blend): 1 for `d <= r_min`, 0 for `d >= r_max`,
///   quadratic in between — scales the escape velocity.
///
/// The thresholds must satisfy `0 < r_min < r_max < r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvoidanceGains {
    /// Outer activation radius `r`.
    pub r: f64,
    /// Full-blend radius `r_max`.
    pub r_max: f64,
    /// Full-escape radius `r_min`.
    pub r_min: f64,
    /// Escape speed `k`, mm per step.
    pub escape_speed: f64,
}

impl AvoidanceGains {
    pub fn new(r: f64, r_max: f64, r_min: f64, escape_speed: f64) -> Self {
        Self { r, r_max, r_min, escape_speed }
    }
}

/// Homogeneous gain `g_h(d)`: 1 below `r_max`, raised-cosine blend to 0 at
/// `r`, 0 beyond.
pub fn homogeneous_gain(d: f64, g: &AvoidanceGains) -> f64 {
    if d <= g.r_max {
        1.0
    } else if d >= g.r {
        0.0
    } else {
        0.5 + 0.5 * (std::f64::consts::PI * (d - g.r_max) / (g.r - g.r_max)).cos()
    }
}

/// Escape-velocity gain `g_v(d)`: 1 below `r_min`, quadratic decay to 0 at
/// `r_max`, 0 beyond.
pub fn avoidance_gain(d: f64, g: &AvoidanceGains) -> f64 {
    if d <= g.r_min {
        1.0
    } else if d >= g.r_max {
        0.0
    } else {
        let t = (d - g.r_max) / (g.r_max - g.r_min);
        t * t
    }
}

/// Escape velocity for the closest body point: directed away from the
/// obstacle center with magnitude `speed`.
pub fn escape_velocity(
    closest: &Vector3<f64>,
    obstacle_center: &Vector3<f64>,
    speed: f64,
) -> Result<Vector3<f64>> {
    let to_center = obstacle_center - closest;
    let n = to_center.norm();
    if n < COINCIDENT_EPS {
        return Err(Error::CoincidentEscape);
    }
    Ok(-to_center * (speed / n))
}

/// Drift-corrected task velocity: the commanded step towards the next
/// waypoint plus the residual between where the end-effector should have
/// been and where it actually is.
pub fn corrected_task_velocity(
    pdot_e: &Vector3<f64>,
    expected_prev: &Vector3<f64>,
    actual_prev: &Vector3<f64>,
) -> Vector3<f64> {
    pdot_e + expected_prev - actual_prev
}

/// Which terms of the update a planner applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlannerMode {
    /// Tracking plus null-space obstacle avoidance.
    Avoidance,
    /// Tracking only; the null-space term is never applied.
    NoAvoidance,
}

/// Everything produced by one planner step, including the raw update terms
/// needed to audit the null-space identity.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Configuration after the step (clamped and wrapped).
    pub config: Config,
    /// Gains evaluated at the pre-step clearance.
    pub g_h: f64,
    pub g_v: f64,
    /// Whether the avoidance term was applied.
    pub avoidance_active: bool,
    /// Raw tracking term of the update (before clamping).
    pub track_term: Vector4<f64>,
    /// Raw avoidance term of the update (zero when inactive).
    pub avoidance_term: Vector4<f64>,
}

/// One IIK step driver. Owns the configuration and the joint-limit weight
/// state so that successive calls reproduce exactly what [`plan_motion`]
/// does; tests drive it directly to audit per-step internals.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: ManipulatorParams,
    gains: AvoidanceGains,
    mode: PlannerMode,
    weight_state: WeightState,
    q: Config,
}

impl Stepper {
    pub fn new(q_init: Config, params: ManipulatorParams, gains: AvoidanceGains, mode: PlannerMode) -> Self {
        Self { params, gains, mode, weight_state: WeightState::new(), q: q_init }
    }

    pub fn config(&self) -> Config {
        self.q
    }

    /// Advances from the current configuration towards `target_next`.
    ///
    /// `pre_step` must be the proximity survey of the *current*
    /// configuration — the planner always decides avoidance from the state
    /// it is leaving. `target_prev` is the waypoint the end-effector was
    /// expected to sit on before this step.
    pub fn step(
        &mut self,
        pre_step: &ChainProximity,
        target_prev: &Vector3<f64>,
        target_next: &Vector3<f64>,
        obstacles: &[SphereObstacle],
    ) -> Result<StepOutput> {
        let out = self.propose(pre_step, target_prev, target_next, obstacles)?;
        self.commit(out.config);
        Ok(out)
    }

    /// Computes one step without committing it: the joint-limit weight
    /// state advances (it is a per-step quantity) but the configuration
    /// stays put until [`Stepper::commit`]. Lets callers substitute their
    /// own null-space term while sharing the exact tracking math.
    pub fn propose(
        &mut self,
        pre_step: &ChainProximity,
        target_prev: &Vector3<f64>,
        target_next: &Vector3<f64>,
        obstacles: &[SphereObstacle],
    ) -> Result<StepOutput> {
        let q_old = self.q;
        let qv = q_old.as_vector();
        let ee = forward_kinematics(&q_old, &self.params).end_effector();

        let pdot_e = target_next - target_prev;
        let pdot_f = corrected_task_velocity(&pdot_e, target_prev, &ee);

        let w = joint_limit_weights(&q_old, &mut self.weight_state, self.params.theta_limits);
        let w_inv_sqrt = inv_sqrt_weights(&w);
        let j_e = end_effector_jacobian(&q_old, &self.params);
        let j_we = j_e * w_inv_sqrt;

        let pinv_we = if is_task_singular(&j_we, TASK_SINGULAR_FLOOR) {
            // Damped retry; if the damped inverse is still all-zero the
            // task is genuinely unreachable.
            let svd = j_we.svd(false, false);
            let damping = (TASK_SINGULAR_FLOOR - svd.singular_values.min()).max(0.0);
            let d = damped_pseudo_inverse(&j_we, damping);
            if d.norm() == 0.0 {
                return Err(Error::SingularTask);
            }
            d
        } else {
            pseudo_inverse(&j_we, PINV_REL_TOL)
        };

        let mut track_term = w_inv_sqrt * (pinv_we * pdot_f);
        let track_norm = track_term.norm();
        if track_norm > TRACK_STEP_LIMIT {
            track_term *= TRACK_STEP_LIMIT / track_norm;
        }

        let mut out = StepOutput {
            config: q_old,
            g_h: 0.0,
            g_v: 0.0,
            avoidance_active: false,
            track_term,
            avoidance_term: Vector4::zeros(),
        };

        if let Some(prox) = &pre_step.min {
            let d = prox.clearance;
            out.g_h = homogeneous_gain(d, &self.gains);
            out.g_v = avoidance_gain(d, &self.gains);

            if self.mode == PlannerMode::Avoidance && d < self.gains.r {
                let term = self.avoidance_term(prox, &track_term, &pdot_e, &pinv_we, &w_inv_sqrt, &j_e, obstacles, out.g_h, out.g_v)?;
                // Pinning a bending angle exactly onto its bound freezes the
                // matching wrist angle (a straight segment's bending plane
                // is undefined), which no velocity-level step can later
                // undo. The correction stops short of the bounds instead;
                // scaling keeps it inside the task null space.
                out.avoidance_term =
                    term * bound_respecting_fraction(&(qv + track_term), &term, self.params.theta_limits);
                out.avoidance_active = out.avoidance_term != Vector4::zeros();
            }
        }

        let newv = qv + track_term + out.avoidance_term;
        out.config = bend_floor(
            Config::from_vector(&newv).clamped(self.params.theta_limits),
            &q_old,
            self.params.theta_limits,
        );

        // The correction's entire mandate is raising body clearance without
        // disturbing the task; to first order it always does. But it sweeps
        // the whole body, and a large-enough posture change can bring some
        // *other* part of the chain closer than the plain tracking step
        // would have. Verify the prediction: commit whichever candidate
        // actually leaves more room (ties keep the correction).
        if out.avoidance_active {
            let plain = Config::from_vector(&(qv + track_term)).clamped(self.params.theta_limits);
            let with_term = chain_proximity(
                &forward_kinematics(&out.config, &self.params),
                &self.params,
                obstacles,
            );
            let without = chain_proximity(
                &forward_kinematics(&plain, &self.params),
                &self.params,
                obstacles,
            );
            if let (Some(a), Some(p)) = (&with_term.min, &without.min) {
                if p.clearance > a.clearance {
                    out.config = plain;
                    out.avoidance_term = Vector4::zeros();
                    out.avoidance_active = false;
                }
            }
        }
        Ok(out)
    }

    /// Adopts `config` as the current configuration.
    pub fn commit(&mut self, config: Config) {
        self.q = config;
    }

    /// Null-space avoidance term, or zero when the activation conditions do
    /// not hold (closest point receding, or closest point at the tip).
    #[allow(clippy::too_many_arguments)]
    fn avoidance_term(
        &self,
        prox: &ProximityResult,
        track_term: &Vector4<f64>,
        pdot_e: &Vector3<f64>,
        pinv_we: &nalgebra::Matrix4x3<f64>,
        w_inv_sqrt: &Matrix4<f64>,
        j_e: &nalgebra::Matrix3x4<f64>,
        obstacles: &[SphereObstacle],
        g_h: f64,
        g_v: f64,
    ) -> Result<Vector4<f64>> {
        let at_tip = prox.link == LinkId::Rigid2
            && prox.local_coord > TIP_FRACTION * self.params.rigid_lengths[1];
        if at_tip {
            return Ok(Vector4::zeros());
        }

        let pd = PointDescriptor { link: prox.link, local_coord: prox.local_coord };
        let j_co = point_jacobian(&self.q, &self.params, &pd);

        // Velocity the tentative (tracking-only) step would give the
        // closest point; only a component towards the obstacle warrants a
        // correction.
        let tentative_vel = j_co * track_term;
        let to_center = obstacles[prox.obstacle_index].center - prox.point;
        if tentative_vel.dot(&to_center) <= 0.0 {
            return Ok(Vector4::zeros());
        }

        let pdot_o = escape_velocity(&prox.point, &obstacles[prox.obstacle_index].center, self.gains.escape_speed)?;

        let pinv_e = pseudo_inverse(j_e, PINV_REL_TOL);
        let projector = Matrix4::identity() - pinv_e * j_e;
        let constrained = j_co * projector;
        // Rank decision referenced to J_co's scale: when the projector
        // annihilates J_co entirely (the null space has no authority over
        // the closest point) the product is rounding noise and the
        // correction must vanish rather than invert that noise.
        let scale = j_co.svd(false, false).singular_values.max();
        let pinv_constrained = pseudo_inverse_scaled(&constrained, PINV_REL_TOL, scale);
        let j_wco = j_co * w_inv_sqrt;
        let residual = g_v * pdot_o - j_wco * (pinv_we * pdot_e);
        let term = g_h * (projector * (pinv_constrained * residual));
        // A fixed-magnitude escape demand through a weakly conditioned
        // constrained Jacobian can call for joint excursions far outside the
        // regime where the velocity-level linearization holds (and where the
        // null-space guarantee is physically meaningful). Cap the step norm;
        // scaling preserves null-space membership exactly.
        let norm = term.norm();
        if norm > AVOIDANCE_STEP_LIMIT {
            Ok(term * (AVOIDANCE_STEP_LIMIT / norm))
        } else {
            Ok(term)
        }
    }
}

/// Telemetry for one planner step. Index 0 records the initial
/// configuration; record `i` is the state after tracking waypoint `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub config: Config,
    /// End-effector position at this configuration.
    pub ee_actual: Vector3<f64>,
    /// Waypoint the end-effector was commanded to.
    pub ee_expected: Vector3<f64>,
    /// `|ee_actual - ee_expected|` in mm.
    pub tracking_error: f64,
    /// Minimum clearance towards each obstacle at this configuration.
    pub clearances: Vec<f64>,
    /// Link carrying the globally closest point (`None` without obstacles).
    pub closest_link: Option<LinkId>,
    /// Gains used by the step that produced this configuration (evaluated
    /// at the previous record's clearance; record 0 evaluates its own).
    pub g_h: f64,
    pub g_v: f64,
    /// Whether that step applied the avoidance term.
    pub avoidance_active: bool,
}

/// Full planned motion: one record per path waypoint plus the path itself.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub path: Vec<Vector3<f64>>,
    /// Wall-clock seconds spent in each planner step (diagnostic; empty for
    /// externally assembled trajectories).
    pub step_seconds: Vec<f64>,
}

impl Trajectory {
    /// Whether any step dipped to non-positive clearance.
    pub fn collided(&self) -> bool {
        self.steps
            .iter()
            .any(|s| s.clearances.iter().any(|&c| c <= 0.0))
    }

    /// Minimum clearance over the whole run, `None` without obstacles.
    pub fn min_clearance(&self) -> Option<f64> {
        self.steps
            .iter()
            .flat_map(|s| s.clearances.iter().copied())
            .min_by(f64::total_cmp)
    }

    /// Tracking error of the final step, mm.
    pub fn final_tracking_error(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.tracking_error)
    }
}

pub(crate) fn observe(
    q: &Config,
    expected: &Vector3<f64>,
    params: &ManipulatorParams,
    obstacles: &[SphereObstacle],
) -> (StepRecord, ChainProximity) {
    let chain = forward_kinematics(q, params);
    let survey = chain_proximity(&chain, params, obstacles);
    let ee = chain.end_effector();
    let record = StepRecord {
        config: *q,
        ee_actual: ee,
        ee_expected: *expected,
        tracking_error: (ee - expected).norm(),
        clearances: survey.per_obstacle.clone(),
        closest_link: survey.min.as_ref().map(|m| m.link),
        g_h: 0.0,
        g_v: 0.0,
        avoidance_active: false,
    };
    (record, survey)
}

/// Plans a motion tracking `path` waypoint by waypoint from `q_init`.
///
/// The initial end-effector position must sit within 1 mm of `path[0]`.
/// Steps whose clearance goes non-positive are recorded, not aborted — the
/// caller inspects [`Trajectory::collided`].
pub fn plan_motion(
    path: &[Vector3<f64>],
    q_init: Config,
    obstacles: &[SphereObstacle],
    gains: &AvoidanceGains,
    params: &ManipulatorParams,
    mode: PlannerMode,
) -> Result<Trajectory> {
    if path.is_empty() {
        return Err(Error::Validation("motion path is empty".into()));
    }
    let start_ee = forward_kinematics(&q_init, params).end_effector();
    let gap = (start_ee - path[0]).norm();
    if gap > 1.0 {
        return Err(Error::Validation(format!(
            "initial end-effector is {gap:.3} mm from the first waypoint (limit 1 mm)"
        )));
    }

    let mut stepper = Stepper::new(q_init, *params, *gains, mode);
    let (mut record, mut survey) = observe(&q_init, &path[0], params, obstacles);
    if let Some(min) = &survey.min {
        record.g_h = homogeneous_gain(min.clearance, gains);
        record.g_v = avoidance_gain(min.clearance, gains);
    }

    let mut traj = Trajectory {
        steps: Vec::with_capacity(path.len()),
        path: path.to_vec(),
        step_seconds: Vec::with_capacity(path.len().saturating_sub(1)),
    };
    traj.steps.push(record);

    for i in 1..path.len() {
        let t0 = std::time::Instant::now();
        let out = stepper.step(&survey, &path[i - 1], &path[i], obstacles)?;
        traj.step_seconds.push(t0.elapsed().as_secs_f64());

        let (mut rec, new_survey) = observe(&out.config, &path[i], params, obstacles);
        rec.g_h = out.g_h;
        rec.g_v = out.g_v;
        rec.avoidance_active = out.avoidance_active;
        traj.steps.push(rec);
        survey = new_survey;
    }
    Ok(traj)
}
