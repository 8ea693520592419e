//! Workspace path planning for the end-effector point: RRT* search in a
//! box, greedy shortcut pruning, and clamped B-spline smoothing with a
//! uniform re-interpolation to a fixed sample count.
//!
//! All collision checks are exact point/segment-to-sphere tests with a
//! caller-supplied clearance; callers planning for the end-effector pass
//! the manipulator body radius so the tracked point stays physically
//! feasible.

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::proximity::{closest_point_on_segment, SphereObstacle};

/// Ordered polyline of end-effector positions, mm. Produced paths keep
/// consecutive points distinct and run from start to goal.
pub type WorkspacePath = Vec<Vector3<f64>>;

/// Axis-aligned box the sampler draws from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSpace {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl SearchSpace {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        for i in 0..3 {
            // partial_cmp keeps NaN bounds invalid instead of silently ordered.
            if min[i].partial_cmp(&max[i]) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Validation(format!(
                    "search space min must be below max componentwise, got min[{i}]={} max[{i}]={}",
                    min[i], max[i]
                )));
            }
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| self.max[i] - self.min[i]).product()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::from_fn(|i, _| rng.random_range(self.min[i]..self.max[i]))
    }
}

/// One tree vertex: position, parent index, and exact path cost from the
/// root (sum of edge lengths; the root has no parent and cost 0).
#[derive(Clone, Debug)]
pub struct TreeNode {
    pub position: Vector3<f64>,
    pub parent: Option<usize>,
    pub cost: f64,
}

/// Tuning knobs for the tree search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RrtOptions {
    /// Probability of sampling the goal instead of the box.
    pub goal_bias: f64,
    /// Maximum extension length per iteration, mm.
    pub steer_step: f64,
    /// Radius of the goal region, mm.
    pub goal_radius: f64,
    /// Upper cap on the shrinking rewire radius, mm.
    pub rewire_cap: f64,
    /// Required distance from every obstacle surface, mm.
    pub clearance: f64,
    /// Return at the first goal connection instead of spending the full
    /// iteration budget improving the tree.
    pub stop_at_first_goal: bool,
}

impl Default for RrtOptions {
    fn default() -> Self {
        Self {
            goal_bias: 0.05,
            steer_step: 10.0,
            goal_radius: 5.0,
            rewire_cap: 30.0,
            clearance: 0.0,
            stop_at_first_goal: true,
        }
    }
}

/// Exact test that the segment `a`–`b` keeps more than `clearance` distance
/// from every obstacle surface.
pub fn segment_collision_free(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    obstacles: &[SphereObstacle],
    clearance: f64,
) -> bool {
    obstacles.iter().all(|o| {
        let (closest, _) = closest_point_on_segment(&o.center, a, b);
        (o.center - closest).norm() - o.radius > clearance
    })
}

fn point_collision_free(p: &Vector3<f64>, obstacles: &[SphereObstacle], clearance: f64) -> bool {
    obstacles
        .iter()
        .all(|o| (o.center - p).norm() - o.radius > clearance)
}

/// New-node separation below which a sample is treated as a duplicate of an
/// existing vertex and skipped.
const MIN_NODE_SEPARATION: f64 = 1e-9;

struct Tree {
    nodes: Vec<TreeNode>,
    children: Vec<Vec<usize>>,
    gamma: f64,
}

impl Tree {
    fn new(root: Vector3<f64>, space: &SearchSpace) -> Self {
        // Shrinking-ball constant from the standard asymptotic-optimality
        // bound in 3 dimensions, computed from the sampled volume.
        let unit_ball = 4.0 * std::f64::consts::PI / 3.0;
        let gamma = 2.0 * (1.0 + 1.0 / 3.0_f64).cbrt() * (space.volume() / unit_ball).cbrt();
        Self {
            nodes: vec![TreeNode { position: root, parent: None, cost: 0.0 }],
            children: vec![Vec::new()],
            gamma,
        }
    }

    fn nearest(&self, p: &Vector3<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.position - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn rewire_radius(&self, cap: f64) -> f64 {
        let n = self.nodes.len();
        if n < 2 {
            return cap;
        }
        let nf = n as f64;
        cap.min(self.gamma * (nf.ln() / nf).cbrt())
    }

    fn neighbors_within(&self, p: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        (0..self.nodes.len())
            .filter(|&i| (self.nodes[i].position - p).norm_squared() <= r2)
            .collect()
    }

    fn insert(&mut self, position: Vector3<f64>, parent: usize, cost: f64) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(TreeNode { position, parent: Some(parent), cost });
        self.children.push(Vec::new());
        self.children[parent].push(idx);
        idx
    }

    /// Reroutes `node` through `new_parent` at the given (strictly lower)
    /// cost, propagating the cost decrease through the whole subtree so
    /// stored costs stay exact.
    fn rewire(&mut self, node: usize, new_parent: usize, new_cost: f64) {
        let delta = new_cost - self.nodes[node].cost;
        debug_assert!(delta <= 0.0, "rewiring must never increase a cost");
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

    fn extract_path(&self, leaf: usize) -> WorkspacePath {
        let mut rev = Vec::new();
        let mut cur = Some(leaf);
        while let Some(i) = cur {
            rev.push(self.nodes[i].position);
            cur = self.nodes[i].parent;
        }
        rev.reverse();
        rev
    }
}

/// Grows the tree; returns it plus the goal node's index when the goal was
/// connected. Exposed to unit tests so cost-consistency invariants can be
/// audited on the raw tree.
fn grow_tree(
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    obstacles: &[SphereObstacle],
    space: &SearchSpace,
    opts: &RrtOptions,
    max_iters: usize,
    rng_seed: u64,
) -> (Tree, Option<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut tree = Tree::new(*start, space);
    let mut goal_idx: Option<usize> = None;

    for _ in 0..max_iters {
        let sample = if rng.random_range(0.0..1.0) < opts.goal_bias {
            *goal
        } else {
            space.sample(&mut rng)
        };

        let nearest = tree.nearest(&sample);
        let near_pos = tree.nodes[nearest].position;
        let to_sample = sample - near_pos;
        let dist = to_sample.norm();
        if dist < MIN_NODE_SEPARATION {
            continue;
        }
        let x_new = if dist <= opts.steer_step {
            sample
        } else {
            near_pos + to_sample * (opts.steer_step / dist)
        };
        if tree
            .nodes
            .iter()
            .any(|n| (n.position - x_new).norm() < MIN_NODE_SEPARATION)
        {
            continue;
        }

        // Minimum-cost parent among the shrinking-ball neighborhood (the
        // nearest node always included as a candidate).
        let radius = tree.rewire_radius(opts.rewire_cap);
        let mut candidates = tree.neighbors_within(&x_new, radius);
        if !candidates.contains(&nearest) {
            candidates.push(nearest);
        }
        let mut best: Option<(usize, f64)> = None;
        for &c in &candidates {
            let edge = (tree.nodes[c].position - x_new).norm();
            let cost = tree.nodes[c].cost + edge;
            if best.is_none_or(|(_, b)| cost < b)
                && segment_collision_free(&tree.nodes[c].position, &x_new, obstacles, opts.clearance)
            {
                best = Some((c, cost));
            }
        }
        let Some((parent, cost)) = best else { continue };
        let new_idx = tree.insert(x_new, parent, cost);

        // Rewire neighbors through the new node when that lowers their cost.
        for &c in &candidates {
            if c == parent {
                continue;
            }
            let edge = (tree.nodes[c].position - x_new).norm();
            let alt = cost + edge;
            if alt + 1e-12 < tree.nodes[c].cost
                && segment_collision_free(&x_new, &tree.nodes[c].position, obstacles, opts.clearance)
            {
                tree.rewire(c, new_idx, alt);
            }
        }

        // Goal connection bookkeeping. The goal, once connected, lives in
        // the tree as an ordinary node and keeps improving through rewiring.
        if (x_new - goal).norm() < MIN_NODE_SEPARATION {
            if goal_idx.is_none() {
                goal_idx = Some(new_idx);
            }
        } else if (x_new - goal).norm() <= opts.goal_radius
            && segment_collision_free(&x_new, goal, obstacles, opts.clearance)
        {
            let goal_cost = cost + (x_new - goal).norm();
            match goal_idx {
                None => {
                    goal_idx = Some(tree.insert(*goal, new_idx, goal_cost));
                }
                Some(g) => {
                    if goal_cost + 1e-12 < tree.nodes[g].cost {
                        tree.rewire(g, new_idx, goal_cost);
                    }
                }
            }
        }

        if opts.stop_at_first_goal && goal_idx.is_some() {
            break;
        }
    }
    (tree, goal_idx)
}

/// RRT* search from `start` to `goal` inside `space`.
///
/// Both endpoints must lie inside the box with positive clearance from
/// every obstacle. Sampling is uniform with goal bias; each new node
/// connects through the minimum-cost parent in the shrinking-ball
/// neighborhood and then rewires its neighbors. Deterministic for a fixed
/// `rng_seed`.
pub fn rrt_star(
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    obstacles: &[SphereObstacle],
    space: &SearchSpace,
    opts: &RrtOptions,
    max_iters: usize,
    rng_seed: u64,
) -> Result<WorkspacePath> {
    for (name, p) in [("start", start), ("goal", goal)] {
        if !space.contains(p) {
            return Err(Error::Validation(format!(
                "{name} {p:?} lies outside the search space"
            )));
        }
        if !point_collision_free(p, obstacles, opts.clearance) {
            return Err(Error::Validation(format!(
                "{name} {p:?} is within clearance of an obstacle"
            )));
        }
    }
    if (start - goal).norm() < MIN_NODE_SEPARATION {
        return Ok(vec![*start]);
    }

    let (tree, goal_idx) = grow_tree(start, goal, obstacles, space, opts, max_iters, rng_seed);
    match goal_idx {
        Some(g) => Ok(tree.extract_path(g)),
        None => Err(Error::NoPathFound(max_iters)),
    }
}

/// Greedy forward shortcutting: from the current anchor, jump to the
/// farthest later waypoint reachable by a collision-free straight segment.
/// Endpoints are preserved and the vertex count never grows.
pub fn prune_path(
    path: &[Vector3<f64>],
    obstacles: &[SphereObstacle],
    clearance: f64,
) -> WorkspacePath {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    let mut anchor = 0;
    while anchor + 1 < path.len() {
        let mut jump = anchor + 1;
        for j in (anchor + 2..path.len()).rev() {
            if segment_collision_free(&path[anchor], &path[j], obstacles, clearance) {
                jump = j;
                break;
            }
        }
        out.push(path[jump]);
        anchor = jump;
    }
    out
}

fn lerp(a: &Vector3<f64>, b: &Vector3<f64>, t: f64) -> Vector3<f64> {
    a + (b - a) * t
}

/// Clamped uniform knot vector for `n_ctrl` control points of the given
/// degree: `degree + 1` zeros, uniform interior knots, `degree + 1` ones.
fn clamped_knots(n_ctrl: usize, degree: usize) -> Vec<f64> {
    let mut knots = Vec::with_capacity(n_ctrl + degree + 1);
    knots.extend(std::iter::repeat_n(0.0, degree + 1));
    let interior = n_ctrl - degree - 1;
    for i in 1..=interior {
        knots.push(i as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(1.0, degree + 1));
    knots
}

/// De Boor evaluation of the clamped B-spline at parameter `t` in [0, 1].
fn de_boor(ctrl: &[Vector3<f64>], degree: usize, knots: &[f64], t: f64) -> Vector3<f64> {
    let n_ctrl = ctrl.len();
    // Knot span k with knots[k] <= t < knots[k+1]; the valid domain is
    // [knots[degree], knots[n_ctrl]] and t = 1 falls in the last span.
    let mut k = n_ctrl - 1;
    for i in degree..n_ctrl {
        if t < knots[i + 1] {
            k = i;
            break;
        }
    }
    let mut d: Vec<Vector3<f64>> = (0..=degree).map(|j| ctrl[j + k - degree]).collect();
    for r in 1..=degree {
        for j in (r..=degree).rev() {
            let i = j + k - degree;
            let denom = knots[i + degree - r + 1] - knots[i];
            let alpha = if denom.abs() < f64::EPSILON { 0.0 } else { (t - knots[i]) / denom };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[degree]
}

fn sample_spline(ctrl: &[Vector3<f64>], n_samples: usize) -> WorkspacePath {
    let degree = 3.min(ctrl.len() - 1);
    let knots = clamped_knots(ctrl.len(), degree);
    let mut out = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / (n_samples - 1) as f64;
        out.push(de_boor(ctrl, degree, &knots, t));
    }
    // Clamped endpoints are exact analytically; force bit-exactness.
    out[0] = ctrl[0];
    let last = out.len() - 1;
    out[last] = ctrl[ctrl.len() - 1];
    out
}

fn path_collision_free(path: &[Vector3<f64>], obstacles: &[SphereObstacle], clearance: f64) -> bool {
    path.windows(2)
        .all(|w| segment_collision_free(&w[0], &w[1], obstacles, clearance))
}

/// Splits every edge of `poly` into `parts` equal pieces.
fn subdivide_polyline(poly: &[Vector3<f64>], parts: usize) -> Vec<Vector3<f64>> {
    let mut out = vec![poly[0]];
    for w in poly.windows(2) {
        for j in 1..=parts {
            out.push(lerp(&w[0], &w[1], j as f64 / parts as f64));
        }
    }
    out
}

/// Resamples `poly` to exactly `n_samples` points while keeping every
/// original vertex, so each output segment lies on one input segment and
/// inherits its collision freedom. Extra points go to edges by length
/// (largest-remainder apportionment). Returns the vertices unchanged when
/// there are already more of them than `n_samples`.
fn resample_polyline_keeping_vertices(poly: &[Vector3<f64>], n_samples: usize) -> WorkspacePath {
    if poly.len() >= n_samples {
        return poly.to_vec();
    }
    let extra = n_samples - poly.len();
    let lengths: Vec<f64> = poly.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let mut alloc: Vec<usize> = Vec::with_capacity(lengths.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(lengths.len());
    let mut assigned = 0;
    for (i, len) in lengths.iter().enumerate() {
        let share = if total > 0.0 { extra as f64 * len / total } else { 0.0 };
        let base = share.floor() as usize;
        alloc.push(base);
        assigned += base;
        remainders.push((i, share - base as f64));
    }
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(extra - assigned) {
        alloc[i] += 1;
    }

    let mut out = Vec::with_capacity(n_samples);
    for (i, w) in poly.windows(2).enumerate() {
        out.push(w[0]);
        for j in 1..=alloc[i] {
            out.push(lerp(&w[0], &w[1], j as f64 / (alloc[i] + 1) as f64));
        }
    }
    out.push(*poly.last().unwrap());
    out
}

/// Densification rounds tried before falling back to the polyline itself.
const MAX_DENSIFY_ROUNDS: u32 = 6;

/// Smooths a waypoint polyline with a clamped cubic B-spline sampled at
/// `n_samples` uniform parameter values; endpoints are preserved exactly.
///
/// If the sampled spline collides, the control polygon is densified toward
/// the input polyline (which shrinks the spline's deviation from it) and
/// the spline retried; the final fallback is a vertex-preserving resample
/// of the polyline itself, which is collision-free whenever the input is.
pub fn bspline_smooth(
    waypoints: &[Vector3<f64>],
    n_samples: usize,
    obstacles: &[SphereObstacle],
    clearance: f64,
) -> WorkspacePath {
    assert!(waypoints.len() >= 2, "smoothing needs at least two waypoints");
    assert!(n_samples >= 2, "need at least two output samples");

    let candidate = sample_spline(waypoints, n_samples);
    if path_collision_free(&candidate, obstacles, clearance) {
        return candidate;
    }
    for round in 1..=MAX_DENSIFY_ROUNDS {
        let ctrl = subdivide_polyline(waypoints, 1 << round);
        let candidate = sample_spline(&ctrl, n_samples);
        if path_collision_free(&candidate, obstacles, clearance) {
            return candidate;
        }
    }
    resample_polyline_keeping_vertices(waypoints, n_samples)
}

/// The three stages of one planned workspace path.
#[derive(Clone, Debug)]
pub struct PathSet {
    pub raw: WorkspacePath,
    pub pruned: WorkspacePath,
    pub smoothed: WorkspacePath,
}

/// Full pipeline: RRT* search, greedy pruning, B-spline smoothing to
/// exactly `n_samples` points.
#[allow(clippy::too_many_arguments)]
pub fn plan_workspace_path(
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    obstacles: &[SphereObstacle],
    space: &SearchSpace,
    opts: &RrtOptions,
    max_iters: usize,
    n_samples: usize,
    rng_seed: u64,
) -> Result<PathSet> {
    let raw = rrt_star(start, goal, obstacles, space, opts, max_iters, rng_seed)?;
    if raw.len() < 2 {
        return Ok(PathSet { pruned: raw.clone(), smoothed: raw.clone(), raw });
    }
    let pruned = prune_path(&raw, obstacles, opts.clearance);
    let smoothed = bspline_smooth(&pruned, n_samples, obstacles, opts.clearance);
    Ok(PathSet { raw, pruned, smoothed })
}
