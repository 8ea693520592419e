//! Closest-point and clearance queries between the chain and spherical
//! obstacles.
//!
//! All queries are exact (no sampling): continuum links use the
//! project-onto-circle / arc-sector construction, rigid links the standard
//! point-segment projection. Clearance is measured between the obstacle
//! *surface* and the body *surface*:
//!
//! ```text
//! clearance = |obstacle_center - closest centerline point|
//!             - obstacle_radius - body_radius
//! ```
//!
//! so zero means touching and negative means penetration.

use nalgebra::Vector3;

use crate::kinematics::{forward_kinematics, Config, FrameChain, LinkId, ManipulatorParams};

/// Projection onto the arc plane shorter than this is treated as degenerate
/// (query point on the arc axis); the closest point falls back to the arc
/// start.
pub const DEGENERATE_PROJECTION_EPS: f64 = 1e-12;

/// Angular slack for deciding that the projected circle point lies inside
/// the arc sector.
pub const ARC_SECTOR_TOL: f64 = 1e-9;

/// Segments shorter than this count as a single point.
pub const DEGENERATE_SEGMENT_EPS: f64 = 1e-12;

/// A spherical obstacle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereObstacle {
    pub center: Vector3<f64>,
    pub radius: f64,
}

impl SphereObstacle {
    pub fn new(center: Vector3<f64>, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// One bending arc extracted from a [`FrameChain`].
#[derive(Clone, Copy, Debug)]
pub struct ArcSegment {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub center: Vector3<f64>,
    /// Unit normal of the bending plane.
    pub normal: Vector3<f64>,
    pub radius: f64,
    /// Subtended angle in `(0, pi]`.
    pub bend_angle: f64,
}

impl ArcSegment {
    /// Extracts continuum segment `segment` (0 or 1); `None` when the
    /// segment is straight and has no arc.
    pub fn from_chain(chain: &FrameChain, segment: usize) -> Option<Self> {
        let center = chain.arc_centers[segment]?;
        let radius = chain.arc_radii[segment]?;
        let link = if segment == 0 { LinkId::Continuum1 } else { LinkId::Continuum2 };
        let (start, end) = chain.link_endpoints(link);
        Some(Self {
            start,
            end,
            center,
            normal: chain.arc_normals[segment],
            radius,
            bend_angle: chain.bend_angles[segment],
        })
    }
}

/// Result of a chain-versus-obstacles distance query.
#[derive(Clone, Copy, Debug)]
pub struct ProximityResult {
    /// Surface-to-surface clearance in mm (negative inside an obstacle).
    pub clearance: f64,
    /// Closest point on the chain centerline.
    pub point: Vector3<f64>,
    /// Link carrying the closest point.
    pub link: LinkId,
    /// Arc-length fraction (continuum) or axial offset in mm (rigid) of the
    /// closest point, matching the `PointDescriptor` convention.
    pub local_coord: f64,
    /// Index into the obstacle slice of the governing obstacle.
    pub obstacle_index: usize,
}

/// Full survey of one chain pose against an obstacle set: the per-obstacle
/// minimum clearance plus the globally closest point.
#[derive(Clone, Debug)]
pub struct ChainProximity {
    /// Minimum clearance towards each obstacle, same order as the input.
    pub per_obstacle: Vec<f64>,
    /// Globally closest point; `None` when the obstacle set is empty.
    pub min: Option<ProximityResult>,
}

/// Closest point to `p` on the *complete* circle carrying an arc.
///
/// Returns `None` when `p` projects onto the circle axis and every circle
/// point is equidistant.
pub fn closest_point_on_circle(
    p: &Vector3<f64>,
    center: &Vector3<f64>,
    normal: &Vector3<f64>,
    radius: f64,
) -> Option<Vector3<f64>> {
    let op = p - center;
    let in_plane = op - normal * op.dot(normal);
    let len = in_plane.norm();
    if len < DEGENERATE_PROJECTION_EPS {
        return None;
    }
    Some(center + in_plane * (radius / len))
}

/// Closest point to `p` on an arc, with the arc-length fraction of that
/// point.
///
/// The candidate is the projection onto the full circle; it is accepted
/// when the angles it makes with the two arc endpoints sum to the bend
/// angle (it lies inside the sector), otherwise the nearer endpoint wins.
/// The degenerate on-axis case falls back to the arc start.
pub fn closest_point_on_arc(p: &Vector3<f64>, arc: &ArcSegment) -> (Vector3<f64>, f64) {
    let candidate = match closest_point_on_circle(p, &arc.center, &arc.normal, arc.radius) {
        Some(c) => c,
        None => return (arc.start, 0.0),
    };
    let vs = arc.start - arc.center;
    let ve = arc.end - arc.center;
    let vc = candidate - arc.center;
    let ang_s = angle_between(&vs, &vc);
    let ang_e = angle_between(&ve, &vc);
    if (ang_s + ang_e - arc.bend_angle).abs() <= ARC_SECTOR_TOL {
        (candidate, ang_s / arc.bend_angle)
    } else if (p - arc.start).norm_squared() <= (p - arc.end).norm_squared() {
        (arc.start, 0.0)
    } else {
        (arc.end, 1.0)
    }
}

/// Unsigned angle between two vectors, accurate for all magnitudes of the
/// angle (atan2 of cross and dot, no acos cancellation).
fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Closest point to `p` on segment `a..b`, with the clamped interpolation
/// parameter in `[0, 1]`. A degenerate segment returns its start.
pub fn closest_point_on_segment(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
) -> (Vector3<f64>, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < DEGENERATE_SEGMENT_EPS * DEGENERATE_SEGMENT_EPS {
        return (*a, 0.0);
    }
    let alpha = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * alpha, alpha)
}

/// Distance survey of a chain pose against every obstacle.
///
/// Continuum links use the exact arc query (or degrade to a segment when
/// straight); rigid links use the segment query. Exact clearance ties
/// between links resolve to the more distal link.
pub fn chain_proximity(
    chain: &FrameChain,
    params: &ManipulatorParams,
    obstacles: &[SphereObstacle],
) -> ChainProximity {
    let links = [LinkId::Continuum1, LinkId::Rigid1, LinkId::Continuum2, LinkId::Rigid2];
    let arcs = [ArcSegment::from_chain(chain, 0), ArcSegment::from_chain(chain, 1)];

    let mut per_obstacle = Vec::with_capacity(obstacles.len());
    let mut min: Option<ProximityResult> = None;

    for (oi, obs) in obstacles.iter().enumerate() {
        let mut obstacle_best = f64::INFINITY;
        for link in links {
            let (point, local_coord) = match link {
                LinkId::Continuum1 | LinkId::Continuum2 => {
                    let seg = if link == LinkId::Continuum1 { 0 } else { 1 };
                    match &arcs[seg] {
                        Some(arc) => closest_point_on_arc(&obs.center, arc),
                        None => {
                            let (a, b) = chain.link_endpoints(link);
                            closest_point_on_segment(&obs.center, &a, &b)
                        }
                    }
                }
                LinkId::Rigid1 | LinkId::Rigid2 => {
                    let (a, b) = chain.link_endpoints(link);
                    let (pt, alpha) = closest_point_on_segment(&obs.center, &a, &b);
                    let idx = if link == LinkId::Rigid1 { 0 } else { 1 };
                    (pt, alpha * params.rigid_lengths[idx])
                }
            };
            let clearance = (obs.center - point).norm() - obs.radius - params.body_radius;
            if clearance < obstacle_best {
                obstacle_best = clearance;
            }
            // `<=` lets a later (more distal) link take over an exact tie.
            let take = match &min {
                None => true,
                Some(m) => clearance <= m.clearance,
            };
            if take {
                min = Some(ProximityResult { clearance, point, link, local_coord, obstacle_index: oi });
            }
        }
        per_obstacle.push(obstacle_best);
    }

    ChainProximity { per_obstacle, min }
}

/// Minimum-clearance query for a configuration; `None` when the obstacle
/// set is empty.
pub fn manipulator_min_distance(
    q: &Config,
    params: &ManipulatorParams,
    obstacles: &[SphereObstacle],
) -> Option<ProximityResult> {
    if obstacles.is_empty() {
        return None;
    }
    let chain = forward_kinematics(q, params);
    chain_proximity(&chain, params, obstacles).min
}

/// `true` when the configuration is collision-free (strictly positive
/// clearance everywhere, vacuously true without obstacles).
pub fn collision_check_config(
    q: &Config,
    params: &ManipulatorParams,
    obstacles: &[SphereObstacle],
) -> bool {
    match manipulator_min_distance(q, params, obstacles) {
        Some(res) => res.clearance > 0.0,
        None => true,
    }
}
