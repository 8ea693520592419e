//! Scenario files: schema, strict validation, and experiment orchestration.
//!
//! A scenario is a TOML document describing the manipulator, its initial
//! configuration, how the end-effector path is produced (a fixed circle or
//! a planned workspace path), the obstacle set, the avoidance gains, the
//! planner to run, and the RNG seed. Unknown keys anywhere are errors —
//! a silently ignored typo in a gain name would invalidate an experiment.

use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    cspace_rrt_star, random_nullspace_planner, BaselineOutcome, FailureReason, DEFAULT_MU_MAX,
    DEFAULT_STALL_LIMIT,
};
use crate::error::{Error, Result};
use crate::iik::{plan_motion, AvoidanceGains, PlannerMode, StepRecord, Trajectory};
use crate::kinematics::{forward_kinematics, Config, ManipulatorParams, DEFAULT_STRAIGHT_EPS};
use crate::proximity::{chain_proximity, SphereObstacle};
use crate::report::{RunReport, Timings};
use crate::srrt::{plan_workspace_path, RrtOptions, SearchSpace};

/// Default iteration budget for the configuration-space baseline.
pub const DEFAULT_CSPACE_MAX_ITERS: usize = 60_000;

fn default_straight_eps() -> f64 {
    DEFAULT_STRAIGHT_EPS
}

fn default_theta_limits() -> [f64; 2] {
    [0.0, std::f64::consts::PI]
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulatorSpec {
    pub spring_length: f64,
    pub rigid_lengths: [f64; 2],
    pub body_radius: f64,
    #[serde(default = "default_straight_eps")]
    pub straight_eps: f64,
    #[serde(default = "default_theta_limits")]
    pub theta_limits: [f64; 2],
}

impl ManipulatorSpec {
    pub fn params(&self) -> ManipulatorParams {
        ManipulatorParams {
            spring_length: self.spring_length,
            rigid_lengths: self.rigid_lengths,
            body_radius: self.body_radius,
            straight_eps: self.straight_eps,
            theta_limits: self.theta_limits,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub theta1: f64,
    pub delta1: f64,
    pub theta2: f64,
    pub delta2: f64,
}

impl ConfigSpec {
    pub fn config(&self) -> Config {
        Config::new(self.theta1, self.delta1, self.theta2, self.delta2)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: [f64; 3],
    pub radius: f64,
}

impl ObstacleSpec {
    pub fn obstacle(&self) -> SphereObstacle {
        SphereObstacle::new(Vector3::from(self.center), self.radius)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub r: f64,
    pub r_max: f64,
    pub r_min: f64,
    pub escape_speed: f64,
}

impl GainsSpec {
    pub fn gains(&self) -> AvoidanceGains {
        AvoidanceGains::new(self.r, self.r_max, self.r_min, self.escape_speed)
    }
}

/// How the end-effector path is produced.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PathSource {
    /// A horizontal circle discretized into `n_points` uniform angular
    /// steps, traversed once counterclockwise starting at the angle of the
    /// initial end-effector position.
    FixedCircle {
        center: [f64; 3],
        radius: f64,
        n_points: usize,
    },
    /// Workspace tree search from `start` to `goal` inside the box,
    /// pruned and smoothed to `n_samples` points.
    Srrt {
        start: [f64; 3],
        goal: [f64; 3],
        space_min: [f64; 3],
        space_max: [f64; 3],
        max_iters: usize,
        n_samples: usize,
    },
}

/// Which planner tracks (or searches for) the motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum Planner {
    /// Tracking with null-space obstacle avoidance.
    Avoidance,
    /// Tracking only.
    NoAvoidance,
    /// Tracking plus a small random null-space vector per step.
    RandomNullspace,
    /// RRT* directly over the configuration space.
    CspaceRrtStar,
}

impl Planner {
    pub fn label(&self) -> &'static str {
        match self {
            Planner::Avoidance => "avoidance",
            Planner::NoAvoidance => "no_avoidance",
            Planner::RandomNullspace => "random_nullspace",
            Planner::CspaceRrtStar => "cspace_rrt_star",
        }
    }
}

fn default_mu_max() -> f64 {
    DEFAULT_MU_MAX
}

fn default_stall_limit() -> usize {
    DEFAULT_STALL_LIMIT
}

fn default_cspace_max_iters() -> usize {
    DEFAULT_CSPACE_MAX_ITERS
}

/// Knobs for the comparison planners; all optional.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    #[serde(default = "default_mu_max")]
    pub mu_max: f64,
    #[serde(default = "default_stall_limit")]
    pub stall_limit: usize,
    #[serde(default = "default_cspace_max_iters")]
    pub cspace_max_iters: usize,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            mu_max: DEFAULT_MU_MAX,
            stall_limit: DEFAULT_STALL_LIMIT,
            cspace_max_iters: DEFAULT_CSPACE_MAX_ITERS,
        }
    }
}

/// A fully described experiment.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub planner: Planner,
    pub rng_seed: u64,
    pub manipulator: ManipulatorSpec,
    pub q_init: ConfigSpec,
    pub path_source: PathSource,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub gains: GainsSpec,
    #[serde(default)]
    pub baselines: BaselineSpec,
}

impl Scenario {
    pub fn params(&self) -> ManipulatorParams {
        self.manipulator.params()
    }

    pub fn obstacle_list(&self) -> Vec<SphereObstacle> {
        self.obstacles.iter().map(ObstacleSpec::obstacle).collect()
    }

    /// Checks every invariant; errors name the violated one.
    pub fn validate(&self) -> Result<()> {
        let m = &self.manipulator;
        if m.spring_length <= 0.0 || m.rigid_lengths.iter().any(|&l| l <= 0.0) {
            return Err(Error::Validation("manipulator lengths must be positive".into()));
        }
        if m.body_radius <= 0.0 {
            return Err(Error::Validation("manipulator body_radius must be positive".into()));
        }
        if m.straight_eps.is_nan() || m.straight_eps <= 0.0 {
            return Err(Error::Validation("manipulator straight_eps must be positive".into()));
        }
        if !(m.theta_limits[0] >= 0.0 && m.theta_limits[0] < m.theta_limits[1]
            && m.theta_limits[1] <= std::f64::consts::PI)
        {
            return Err(Error::Validation(
                "manipulator theta_limits must satisfy 0 <= lo < hi <= pi".into(),
            ));
        }
        for (name, theta) in [("theta1", self.q_init.theta1), ("theta2", self.q_init.theta2)] {
            if !(m.theta_limits[0]..=m.theta_limits[1]).contains(&theta) {
                return Err(Error::Validation(format!(
                    "q_init.{name} = {theta} outside the bend limits [{}, {}]",
                    m.theta_limits[0], m.theta_limits[1]
                )));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.radius <= 0.0 {
                return Err(Error::Validation(format!("obstacle {} radius must be positive", i + 1)));
            }
        }
        let g = &self.gains;
        if !(0.0 < g.r_min && g.r_min < g.r_max && g.r_max < g.r) {
            return Err(Error::Validation(
                "gains must satisfy 0 < r_min < r_max < r".into(),
            ));
        }
        if g.escape_speed <= 0.0 {
            return Err(Error::Validation("gains escape_speed must be positive".into()));
        }
        match &self.path_source {
            PathSource::FixedCircle { radius, n_points, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::Validation("fixed_circle radius must be positive".into()));
                }
                if *n_points < 2 {
                    return Err(Error::Validation("fixed_circle n_points must be at least 2".into()));
                }
            }
            PathSource::Srrt { start, goal, space_min, space_max, max_iters, n_samples } => {
                let space = SearchSpace::new(Vector3::from(*space_min), Vector3::from(*space_max))?;
                for (name, p) in [("start", start), ("goal", goal)] {
                    if !space.contains(&Vector3::from(*p)) {
                        return Err(Error::Validation(format!(
                            "srrt {name} {p:?} lies outside the search space"
                        )));
                    }
                }
                if *max_iters == 0 {
                    return Err(Error::Validation("srrt max_iters must be at least 1".into()));
                }
                if *n_samples < 2 {
                    return Err(Error::Validation("srrt n_samples must be at least 2".into()));
                }
            }
        }
        if self.baselines.mu_max < 0.0 {
            return Err(Error::Validation("baselines mu_max must be non-negative".into()));
        }
        if self.planner == Planner::CspaceRrtStar
            && matches!(self.path_source, PathSource::FixedCircle { .. })
        {
            return Err(Error::Validation(
                "cspace_rrt_star needs an srrt path source (its goal position)".into(),
            ));
        }
        Ok(())
    }
}

/// Loads and fully validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let scenario: Scenario = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Allowance the end-effector path keeps beyond one body radius. The
/// tracked point rides the path exactly, but the final rigid link extends
/// behind it: within the tip band where avoidance is suppressed (the
/// closest point there *is* effectively the end-effector) the centerline
/// can sit up to that band's length closer to an obstacle than the tip
/// itself, and per-step tracking deviations add a little more. Without
/// this margin a path that legally grazes an obstacle forces the tip
/// neighborhood into it — no tracker can prevent that.
pub fn path_clearance_margin(params: &ManipulatorParams) -> f64 {
    let tip_band = (1.0 - crate::iik::TIP_FRACTION) * params.rigid_lengths[1];
    tip_band + TRACKING_DEVIATION_ALLOWANCE
}

/// Budget for how far the actual end-effector may drift off the commanded
/// waypoint in one step (observed worst cases stay under half of this).
const TRACKING_DEVIATION_ALLOWANCE: f64 = 2.0;

/// Extra repeats of the goal waypoint appended to tree-search paths so the
/// tracked end-effector settles onto the goal after its last (possibly
/// step-limited) hop. Generous because recovering from a near-straight
/// proximal segment can take several step-limited wrist rotations; settled
/// runs simply hold position through the remainder.
pub const GOAL_SETTLE_STEPS: usize = 12;

/// Discretizes the horizontal circle into `n_points` uniform angular steps
/// starting at the angle of `initial_ee` (projected into the circle's
/// plane), traversed once counterclockwise and closed back onto the start,
/// giving `n_points + 1` waypoints.
pub fn circle_path(
    center: &Vector3<f64>,
    radius: f64,
    n_points: usize,
    initial_ee: &Vector3<f64>,
) -> Vec<Vector3<f64>> {
    let phi0 = (initial_ee.y - center.y).atan2(initial_ee.x - center.x);
    (0..=n_points)
        .map(|k| {
            let phi = phi0 + 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
            Vector3::new(
                center.x + radius * phi.cos(),
                center.y + radius * phi.sin(),
                center.z,
            )
        })
        .collect()
}

/// Converts a configuration-space path into step records (the expected
/// position of each step is its own end-effector position — a search
/// result, not a tracking target).
fn trajectory_from_configs(
    configs: &[Config],
    params: &ManipulatorParams,
    obstacles: &[SphereObstacle],
) -> Trajectory {
    let mut steps = Vec::with_capacity(configs.len());
    let mut path = Vec::with_capacity(configs.len());
    for q in configs {
        let chain = forward_kinematics(q, params);
        let survey = chain_proximity(&chain, params, obstacles);
        let ee = chain.end_effector();
        path.push(ee);
        steps.push(StepRecord {
            config: *q,
            ee_actual: ee,
            ee_expected: ee,
            tracking_error: 0.0,
            clearances: survey.per_obstacle.clone(),
            closest_link: survey.min.as_ref().map(|m| m.link),
            g_h: 0.0,
            g_v: 0.0,
            avoidance_active: false,
        });
    }
    Trajectory { steps, path, step_seconds: Vec::new() }
}

/// Builds the end-effector path a scenario describes (phase 1 of
/// [`run_scenario`]): the discretized circle, or the tree-search path
/// pruned, smoothed, and extended with [`GOAL_SETTLE_STEPS`] repeats of the
/// goal waypoint.
pub fn build_end_effector_path(scenario: &Scenario, seed: u64) -> Result<Vec<Vector3<f64>>> {
    let params = scenario.params();
    match &scenario.path_source {
        PathSource::FixedCircle { center, radius, n_points } => {
            let initial_ee =
                forward_kinematics(&scenario.q_init.config(), &params).end_effector();
            Ok(circle_path(&Vector3::from(*center), *radius, *n_points, &initial_ee))
        }
        PathSource::Srrt { start, goal, space_min, space_max, max_iters, n_samples } => {
            let space = SearchSpace::new(Vector3::from(*space_min), Vector3::from(*space_max))?;
            let clearance = params.body_radius + path_clearance_margin(&params);
            let opts = RrtOptions { clearance, ..RrtOptions::default() };
            let set = plan_workspace_path(
                &Vector3::from(*start),
                &Vector3::from(*goal),
                &scenario.obstacle_list(),
                &space,
                &opts,
                *max_iters,
                *n_samples,
                seed,
            )?;
            let mut path = set.smoothed;
            // Hold the goal for a few steps: per-step joint motion is
            // limited, so the last waypoint hop may stop short; repeating
            // the goal lets the drift correction close the remaining gap.
            let goal_hold = *path.last().expect("smoothed path non-empty");
            path.extend(std::iter::repeat_n(goal_hold, GOAL_SETTLE_STEPS));
            Ok(path)
        }
    }
}

/// Runs a scenario end to end: builds the path, runs the selected planner,
/// and times the two phases separately.
///
/// `seed_override` and `planner_override` replace the scenario's own seed
/// and planner when given (the benchmark machinery relies on both).
pub fn run_scenario(
    scenario: &Scenario,
    seed_override: Option<u64>,
    planner_override: Option<Planner>,
) -> Result<RunReport> {
    let seed = seed_override.unwrap_or(scenario.rng_seed);
    let planner = planner_override.unwrap_or(scenario.planner);
    let params = scenario.params();
    let obstacles = scenario.obstacle_list();
    let q_init = scenario.q_init.config();
    let gains = scenario.gains.gains();

    if planner == Planner::CspaceRrtStar {
        let PathSource::Srrt { goal, .. } = &scenario.path_source else {
            return Err(Error::Validation(
                "cspace_rrt_star needs an srrt path source (its goal position)".into(),
            ));
        };
        let goal = Vector3::from(*goal);
        let (configs, outcome) = cspace_rrt_star(
            q_init,
            &goal,
            &obstacles,
            &params,
            scenario.baselines.cspace_max_iters,
            seed,
        );
        let trajectory = trajectory_from_configs(&configs, &params, &obstacles);
        return Ok(RunReport {
            trajectory,
            timings: Timings { path_planning: 0.0, motion_planning: outcome.wall_time },
            outcome,
        });
    }

    // Phase 1: the end-effector path.
    let t_path = Instant::now();
    let path = build_end_effector_path(scenario, seed)?;
    let path_planning = t_path.elapsed().as_secs_f64();

    // Phase 2: motion along it.
    let t_motion = Instant::now();
    let (trajectory, outcome) = match planner {
        Planner::Avoidance | Planner::NoAvoidance => {
            let mode = if planner == Planner::Avoidance {
                PlannerMode::Avoidance
            } else {
                PlannerMode::NoAvoidance
            };
            let trajectory = plan_motion(&path, q_init, &obstacles, &gains, &params, mode)?;
            let wall = t_motion.elapsed().as_secs_f64();
            let steps = trajectory.steps.len().saturating_sub(1);
            let outcome = if trajectory.collided() {
                BaselineOutcome::failure(FailureReason::Collision, steps, wall)
            } else {
                BaselineOutcome::success(steps, wall)
            };
            (trajectory, outcome)
        }
        Planner::RandomNullspace => random_nullspace_planner(
            &path,
            q_init,
            &obstacles,
            &params,
            seed,
            scenario.baselines.stall_limit,
            scenario.baselines.mu_max,
        )?,
        Planner::CspaceRrtStar => unreachable!("handled above"),
    };
    let motion_planning = t_motion.elapsed().as_secs_f64();

    Ok(RunReport {
        trajectory,
        outcome,
        timings: Timings { path_planning, motion_planning },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minimal_toml() -> String {
        r#"
planner = "avoidance"
rng_seed = 1

[manipulator]
spring_length = 23.0
rigid_lengths = [30.0, 40.0]
body_radius = 4.0

[q_init]
theta1 = 0.3490658503988659
delta1 = 0.0
theta2 = 0.3490658503988659
delta2 = 0.0

[path_source.fixed_circle]
center = [0.0, 0.0, 101.0]
radius = 51.0
n_points = 360

[[obstacles]]
center = [-40.0, 0.0, 60.0]
radius = 10.0

[gains]
r = 28.0
r_max = 25.0
r_min = 22.0
escape_speed = 6.0
"#
        .to_string()
    }

    #[test]
    fn parses_and_validates_minimal_scenario() {
        let s: Scenario = toml::from_str(&minimal_toml()).unwrap();
        s.validate().unwrap();
        assert_eq!(s.planner, Planner::Avoidance);
        assert_eq!(s.obstacles.len(), 1);
        assert_relative_eq!(s.q_init.theta1, std::f64::consts::PI / 9.0, epsilon = 1e-15);
        assert_eq!(s.baselines.stall_limit, DEFAULT_STALL_LIMIT);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal_toml().replace("escape_speed = 6.0", "escape_speed = 6.0\nspeed = 2.0");
        let err = toml::from_str::<Scenario>(&text);
        assert!(err.is_err(), "unknown gain key must fail the parse");
    }

    #[test]
    fn missing_field_is_rejected() {
        let text = minimal_toml().replace("radius = 10.0\n", "");
        assert!(toml::from_str::<Scenario>(&text).is_err());
    }

    #[test]
    fn invalid_gain_ordering_fails_validation() {
        let text = minimal_toml().replace("r_min = 22.0", "r_min = 26.0");
        let s: Scenario = toml::from_str(&text).unwrap();
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("r_min"), "got: {err}");
    }

    #[test]
    fn cspace_with_circle_source_fails_validation() {
        let text = minimal_toml().replace("planner = \"avoidance\"", "planner = \"cspace_rrt_star\"");
        let s: Scenario = toml::from_str(&text).unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn circle_path_starts_at_projected_initial_ee_and_closes() {
        let center = Vector3::new(0.0, 0.0, 101.0);
        let initial = Vector3::new(51.387, 0.0, 101.186);
        let p = circle_path(&center, 51.0, 360, &initial);
        assert_eq!(p.len(), 361);
        assert_relative_eq!(p[0], Vector3::new(51.0, 0.0, 101.0), epsilon = 1e-12);
        assert_relative_eq!(p[360], p[0], epsilon = 1e-9);
        // Counterclockwise: the second point has positive y.
        assert!(p[1].y > 0.0);
        // All points on the circle in the z = center.z plane.
        for q in &p {
            assert_relative_eq!(q.z, 101.0, epsilon = 1e-12);
            assert_relative_eq!((q.xy() - center.xy()).norm(), 51.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn run_scenario_circle_avoidance_smoke() {
        let mut s: Scenario = toml::from_str(&minimal_toml()).unwrap();
        // A short arc keeps the smoke test fast.
        s.path_source = PathSource::FixedCircle {
            center: [0.0, 0.0, 101.0],
            radius: 51.0,
            n_points: 40,
        };
        s.validate().unwrap();
        let report = run_scenario(&s, None, None).unwrap();
        assert_eq!(report.trajectory.steps.len(), 42 - 1);
        assert!(report.timings.path_planning >= 0.0);
        assert!(report.timings.motion_planning > 0.0);
    }

    #[test]
    fn seed_override_changes_stochastic_planners_only() {
        let mut s: Scenario = toml::from_str(&minimal_toml()).unwrap();
        s.path_source = PathSource::FixedCircle {
            center: [0.0, 0.0, 101.0],
            radius: 51.0,
            n_points: 30,
        };
        let a = run_scenario(&s, Some(1), None).unwrap();
        let b = run_scenario(&s, Some(2), None).unwrap();
        // The deterministic tracking planner ignores the seed.
        for (x, y) in a.trajectory.steps.iter().zip(b.trajectory.steps.iter()) {
            assert_eq!(x.config, y.config);
        }
    }
}
