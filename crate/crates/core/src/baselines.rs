//! Comparison planners: a random null-space perturbation planner and a
//! configuration-space RRT*. Both solve the same end-effector placement
//! task as the tracking planner and report a [`BaselineOutcome`] instead of
//! erroring, so benchmark harnesses can tally failures.

use nalgebra::{Vector3, Vector4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

use crate::error::Result;
use crate::iik::{observe, AvoidanceGains, PlannerMode, Stepper, Trajectory};
use crate::jacobian::{end_effector_jacobian, null_space_projector, PINV_REL_TOL};
use crate::kinematics::{forward_kinematics, wrap_angle, Config, ManipulatorParams};
use crate::proximity::{collision_check_config, SphereObstacle};

/// Componentwise bound of the random null-space vector, rad.
pub const DEFAULT_MU_MAX: f64 = 0.05;
/// Redraws allowed per step before the random planner declares a stall.
pub const DEFAULT_STALL_LIMIT: usize = 100;
/// C-space edge interpolation resolution, rad per coordinate: no two
/// checked configurations on an edge differ by more than this.
pub const CSPACE_EDGE_RESOLUTION: f64 = 0.05;
/// C-space goal tolerance on the end-effector position, mm.
pub const CSPACE_GOAL_TOLERANCE: f64 = 5.0;
/// C-space steering step (norm in the periodic metric), rad.
pub const CSPACE_STEER_STEP: f64 = 0.3;
/// Cap on the C-space shrinking rewire radius, rad.
const CSPACE_REWIRE_CAP: f64 = 0.6;

/// Why a baseline run ended without reaching the goal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// Every redraw of the random vector produced a collision.
    Stalled,
    /// The run started from (or was forced into) a colliding state.
    Collision,
    /// The iteration budget ran out before the goal test passed.
    IterationsExhausted,
}

/// Success/failure record of one baseline (or planner) run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BaselineOutcome {
    pub succeeded: bool,
    /// Planner steps (or search iterations) actually executed.
    pub steps_taken: usize,
    /// Wall-clock seconds spent planning.
    pub wall_time: f64,
    /// `None` exactly when `succeeded`.
    pub failure_reason: Option<FailureReason>,
}

impl BaselineOutcome {
    pub fn success(steps_taken: usize, wall_time: f64) -> Self {
        Self { succeeded: true, steps_taken, wall_time, failure_reason: None }
    }

    pub fn failure(reason: FailureReason, steps_taken: usize, wall_time: f64) -> Self {
        Self { succeeded: false, steps_taken, wall_time, failure_reason: Some(reason) }
    }
}

/// Tracks the waypoint path with the task term of the resolved-rate update
/// plus a small random null-space vector per step, redrawing the vector
/// whenever the stepped configuration collides.
///
/// Each step draws μ componentwise uniform in `[-mu_max, mu_max]` and tries
/// `q + track + (I - J_e^+ J_e) μ`; after the initial draw plus
/// `stall_limit` redraws all colliding, the planner stops with a
/// [`FailureReason::Stalled`] outcome and the trajectory up to the last
/// collision-free configuration.
pub fn random_nullspace_planner(
    path: &[Vector3<f64>],
    q_init: Config,
    obstacles: &[SphereObstacle],
    params: &ManipulatorParams,
    rng_seed: u64,
    stall_limit: usize,
    mu_max: f64,
) -> Result<(Trajectory, BaselineOutcome)> {
    let t0 = Instant::now();
    // Zero gain thresholds: the gain evaluations in shared step records
    // then report 0 and the (disabled) avoidance machinery never engages.
    let zero_gains = AvoidanceGains::new(0.0, 0.0, 0.0, 0.0);
    let mut stepper = Stepper::new(q_init, *params, zero_gains, PlannerMode::NoAvoidance);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // Validate the start gap exactly like the tracking planner.
    let probe = crate::iik::plan_motion(&path[..1.min(path.len())], q_init, obstacles, &zero_gains, params, PlannerMode::NoAvoidance)?;
    let mut traj = Trajectory {
        steps: probe.steps,
        path: path.to_vec(),
        step_seconds: Vec::with_capacity(path.len().saturating_sub(1)),
    };
    let (_, mut survey) = observe(&q_init, &path[0], params, obstacles);

    for i in 1..path.len() {
        let ts = Instant::now();
        let out = stepper.propose(&survey, &path[i - 1], &path[i], obstacles)?;
        let q_old = stepper.config();
        let j_e = end_effector_jacobian(&q_old, params);
        let projector = null_space_projector(&j_e, PINV_REL_TOL);
        let qv = q_old.as_vector() + out.track_term;

        let mut committed = None;
        for _ in 0..=stall_limit {
            let mu = Vector4::from_fn(|_, _| rng.random_range(-mu_max..=mu_max));
            let candidate =
                Config::from_vector(&(qv + projector * mu)).clamped(params.theta_limits);
            if collision_check_config(&candidate, params, obstacles) {
                committed = Some(candidate);
                break;
            }
        }
        traj.step_seconds.push(ts.elapsed().as_secs_f64());

        let Some(q_new) = committed else {
            return Ok((
                traj,
                BaselineOutcome::failure(FailureReason::Stalled, i - 1, t0.elapsed().as_secs_f64()),
            ));
        };
        stepper.commit(q_new);
        let (mut rec, new_survey) = observe(&q_new, &path[i], params, obstacles);
        rec.g_h = 0.0;
        rec.g_v = 0.0;
        traj.steps.push(rec);
        survey = new_survey;
    }
    let steps = path.len() - 1;
    Ok((traj, BaselineOutcome::success(steps, t0.elapsed().as_secs_f64())))
}

/// Wraps to `[-pi, pi)`.
fn wrap_pm_pi(x: f64) -> f64 {
    (x + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI
}

/// Componentwise difference `b - a` in the periodic metric: plain for the
/// bend angles, shortest signed arc for the rotation angles.
fn config_diff(a: &Vector4<f64>, b: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(
        b[0] - a[0],
        wrap_pm_pi(b[1] - a[1]),
        b[2] - a[2],
        wrap_pm_pi(b[3] - a[3]),
    )
}

fn config_dist(a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    config_diff(a, b).norm()
}

/// Moves from `a` along the periodic difference, then canonicalizes δ.
fn config_advance(a: &Vector4<f64>, diff: &Vector4<f64>, t: f64) -> Vector4<f64> {
    let raw = a + diff * t;
    Vector4::new(raw[0], wrap_angle(raw[1]), raw[2], wrap_angle(raw[3]))
}

/// Uniform grid over the periodic configuration box, bucketing node
/// indices by cell for sublinear nearest/radius queries. The bend-angle
/// axes clamp at their ends; the rotation axes wrap.
struct GridIndex {
    dims: [usize; 4],
    widths: [f64; 4],
    min_width: f64,
    cells: Vec<Vec<u32>>,
}

const GRID_PERIODIC: [bool; 4] = [false, true, false, true];

impl GridIndex {
    fn new() -> Self {
        use std::f64::consts::PI;
        // Cell edges near the steering step keep typical queries within a
        // couple of rings.
        let extents = [PI, 2.0 * PI, PI, 2.0 * PI];
        let dims = [11usize, 21, 11, 21];
        let mut widths = [0.0; 4];
        for k in 0..4 {
            widths[k] = extents[k] / dims[k] as f64;
        }
        let min_width = widths.iter().copied().fold(f64::INFINITY, f64::min);
        let n_cells = dims.iter().product();
        Self { dims, widths, min_width, cells: vec![Vec::new(); n_cells] }
    }

    fn coords(&self, q: &Vector4<f64>) -> [usize; 4] {
        let mut c = [0usize; 4];
        for k in 0..4 {
            let i = (q[k] / self.widths[k]).floor() as isize;
            c[k] = if GRID_PERIODIC[k] {
                i.rem_euclid(self.dims[k] as isize) as usize
            } else {
                i.clamp(0, self.dims[k] as isize - 1) as usize
            };
        }
        c
    }

    fn flat(&self, c: &[usize; 4]) -> usize {
        ((c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]) * self.dims[3] + c[3]
    }

    fn insert(&mut self, idx: u32, q: &Vector4<f64>) {
        let c = self.coords(q);
        let f = self.flat(&c);
        self.cells[f].push(idx);
    }

    /// Visits every cell whose offset from `center` is at most `reach`
    /// cells per axis (Chebyshev box), wrapping periodic axes and clamping
    /// the others. Wrapped duplicates are skipped.
    fn for_each_cell_in_box(&self, center: &[usize; 4], reach: usize, mut f: impl FnMut(&[u32])) {
        let mut axis_indices: [Vec<usize>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for k in 0..4 {
            let dim = self.dims[k] as isize;
            let r = (reach as isize).min(if GRID_PERIODIC[k] { dim / 2 } else { dim - 1 });
            let mut seen = Vec::new();
            for off in -r..=r {
                let i = center[k] as isize + off;
                let i = if GRID_PERIODIC[k] {
                    i.rem_euclid(dim) as usize
                } else if (0..dim).contains(&i) {
                    i as usize
                } else {
                    continue;
                };
                if !seen.contains(&i) {
                    seen.push(i);
                }
            }
            axis_indices[k] = seen;
        }
        for &a in &axis_indices[0] {
            for &b in &axis_indices[1] {
                for &c in &axis_indices[2] {
                    for &d in &axis_indices[3] {
                        f(&self.cells[self.flat(&[a, b, c, d])]);
                    }
                }
            }
        }
    }

    /// Nearest of `points` to `q` in the periodic metric; `points` must be
    /// non-empty in aggregate (at least one indexed node).
    fn nearest(&self, q: &Vector4<f64>, points: &[CNode]) -> usize {
        let center = self.coords(q);
        let max_reach = *self.dims.iter().max().unwrap();
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for reach in 0..=max_reach {
            self.for_each_cell_in_box(&center, reach, |cell| {
                for &i in cell {
                    let d = config_dist(&points[i as usize].q, q);
                    if d < best_d {
                        best_d = d;
                        best = i as usize;
                    }
                }
            });
            // Any point outside the scanned box is at least (reach *
            // min_width) away; once the best found beats that bound the
            // scan is complete. (Re-scanning inner cells each round is
            // wasteful but rings are tiny in practice.)
            if best != usize::MAX && best_d <= reach as f64 * self.min_width {
                break;
            }
        }
        best
    }

    /// Indices of all points within `radius` of `q`, ascending.
    fn within(&self, q: &Vector4<f64>, radius: f64, points: &[CNode]) -> Vec<usize> {
        let center = self.coords(q);
        let reach = (radius / self.min_width).ceil() as usize + 1;
        let mut out = Vec::new();
        self.for_each_cell_in_box(&center, reach, |cell| {
            for &i in cell {
                if config_dist(&points[i as usize].q, q) <= radius {
                    out.push(i as usize);
                }
            }
        });
        out.sort_unstable();
        out
    }
}

struct CNode {
    q: Vector4<f64>,
    parent: Option<usize>,
    cost: f64,
}

struct CTree {
    nodes: Vec<CNode>,
    children: Vec<Vec<usize>>,
    grid: GridIndex,
}

impl CTree {
    fn new(root: Vector4<f64>) -> Self {
        let mut grid = GridIndex::new();
        grid.insert(0, &root);
        Self {
            nodes: vec![CNode { q: root, parent: None, cost: 0.0 }],
            children: vec![Vec::new()],
            grid,
        }
    }

    fn nearest(&self, q: &Vector4<f64>) -> usize {
        self.grid.nearest(q, &self.nodes)
    }

    fn within(&self, q: &Vector4<f64>, radius: f64) -> Vec<usize> {
        self.grid.within(q, radius, &self.nodes)
    }

    fn insert(&mut self, q: Vector4<f64>, parent: usize, cost: f64) -> usize {
        let idx = self.nodes.len();
        self.grid.insert(idx as u32, &q);
        self.nodes.push(CNode { q, parent: Some(parent), cost });
        self.children.push(Vec::new());
        self.children[parent].push(idx);
        idx
    }

    fn rewire(&mut self, node: usize, new_parent: usize, new_cost: f64) {
        let delta = new_cost - self.nodes[node].cost;
        debug_assert!(delta <= 0.0);
        let old_parent = self.nodes[node].parent.expect("root is never rewired");
        let pos = self.children[old_parent]
            .iter()
            .position(|&c| c == node)
            .expect("child list out of sync");
        self.children[old_parent].remove(pos);
        self.children[new_parent].push(node);
        self.nodes[node].parent = Some(new_parent);
        self.nodes[node].cost = new_cost;
        let mut stack: Vec<usize> = self.children[node].clone();
        while let Some(u) = stack.pop() {
            self.nodes[u].cost += delta;
            stack.extend(self.children[u].iter().copied());
        }
    }
}

/// Exact-resolution edge check: every interpolated configuration along the
/// periodic straight line from `a` by `diff` must be collision-free, with
/// no two checked configurations further than [`CSPACE_EDGE_RESOLUTION`]
/// apart in any coordinate.
fn cspace_edge_free(
    a: &Vector4<f64>,
    diff: &Vector4<f64>,
    obstacles: &[SphereObstacle],
    params: &ManipulatorParams,
) -> bool {
    let max_coord = diff.amax();
    let n_sub = (max_coord / CSPACE_EDGE_RESOLUTION).ceil().max(1.0) as usize;
    for k in 1..=n_sub {
        let q = config_advance(a, diff, k as f64 / n_sub as f64);
        let cfg = Config::from_vector(&q);
        if !collision_check_config(&cfg, params, obstacles) {
            return false;
        }
    }
    true
}

/// RRT* directly over the configuration box [0,π]×[0,2π)×[0,π]×[0,2π) with
/// the rotation angles treated periodically.
///
/// The goal test is positional: a node succeeds when its forward
/// kinematics lands within [`CSPACE_GOAL_TOLERANCE`] of `goal_position`.
/// The search stops at the first such node. Deterministic per seed.
pub fn cspace_rrt_star(
    q_init: Config,
    goal_position: &Vector3<f64>,
    obstacles: &[SphereObstacle],
    params: &ManipulatorParams,
    max_iters: usize,
    rng_seed: u64,
) -> (Vec<Config>, BaselineOutcome) {
    let t0 = Instant::now();
    if !collision_check_config(&q_init, params, obstacles) {
        return (
            Vec::new(),
            BaselineOutcome::failure(FailureReason::Collision, 0, t0.elapsed().as_secs_f64()),
        );
    }
    let reached = |q: &Config| {
        (forward_kinematics(q, params).end_effector() - goal_position).norm()
            < CSPACE_GOAL_TOLERANCE
    };
    if reached(&q_init) {
        return (vec![q_init], BaselineOutcome::success(0, t0.elapsed().as_secs_f64()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut tree = CTree::new(q_init.wrapped().as_vector());
    // Shrinking-ball constant for the 4-dimensional periodic box.
    let volume = std::f64::consts::PI.powi(2) * (2.0 * std::f64::consts::PI).powi(2);
    let unit_ball_4 = std::f64::consts::PI.powi(2) / 2.0;
    let gamma = 2.0 * (1.0 + 0.25_f64).powf(0.25) * (volume / unit_ball_4).powf(0.25);

    for iter in 0..max_iters {
        let sample = Vector4::new(
            rng.random_range(0.0..std::f64::consts::PI),
            rng.random_range(0.0..2.0 * std::f64::consts::PI),
            rng.random_range(0.0..std::f64::consts::PI),
            rng.random_range(0.0..2.0 * std::f64::consts::PI),
        );
        let nearest = tree.nearest(&sample);
        let near_q = tree.nodes[nearest].q;
        let diff = config_diff(&near_q, &sample);
        let dist = diff.norm();
        if dist < 1e-9 {
            continue;
        }
        let (x_new, step_diff) = if dist <= CSPACE_STEER_STEP {
            (config_advance(&near_q, &diff, 1.0), diff)
        } else {
            let d = diff * (CSPACE_STEER_STEP / dist);
            (config_advance(&near_q, &d, 1.0), d)
        };
        let _ = step_diff;

        let n = tree.nodes.len() as f64;
        let radius = CSPACE_REWIRE_CAP.min(gamma * (n.ln().max(1.0) / n).powf(0.25));
        let mut candidates = tree.within(&x_new, radius);
        if !candidates.contains(&nearest) {
            candidates.push(nearest);
        }

        let mut best: Option<(usize, f64)> = None;
        for &c in &candidates {
            let d = config_dist(&tree.nodes[c].q, &x_new);
            let cost = tree.nodes[c].cost + d;
            if best.is_none_or(|(_, b)| cost < b) {
                let e_diff = config_diff(&tree.nodes[c].q, &x_new);
                if cspace_edge_free(&tree.nodes[c].q, &e_diff, obstacles, params) {
                    best = Some((c, cost));
                }
            }
        }
        let Some((parent, cost)) = best else { continue };
        let new_idx = tree.insert(x_new, parent, cost);

        for &c in &candidates {
            if c == parent {
                continue;
            }
            let d = config_dist(&x_new, &tree.nodes[c].q);
            let alt = cost + d;
            if alt + 1e-12 < tree.nodes[c].cost {
                let e_diff = config_diff(&x_new, &tree.nodes[c].q);
                if cspace_edge_free(&x_new, &e_diff, obstacles, params) {
                    tree.rewire(c, new_idx, alt);
                }
            }
        }

        let cfg = Config::from_vector(&x_new);
        if reached(&cfg) {
            let mut rev = Vec::new();
            let mut cur = Some(new_idx);
            while let Some(ix) = cur {
                rev.push(Config::from_vector(&tree.nodes[ix].q));
                cur = tree.nodes[ix].parent;
            }
            rev.reverse();
            return (rev, BaselineOutcome::success(iter + 1, t0.elapsed().as_secs_f64()));
        }
    }
    (
        Vec::new(),
        BaselineOutcome::failure(
            FailureReason::IterationsExhausted,
            max_iters,
            t0.elapsed().as_secs_f64(),
        ),
    )
}
