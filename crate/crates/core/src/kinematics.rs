//! Constant-curvature forward kinematics for the hybrid chain.
//!
//! The manipulator is a serial chain of four links anchored at the origin
//! with its base tangent along +z:
//!
//! 1. continuum segment 1 (a spring of length `L_s` bent into a circular arc),
//! 2. rigid link 1 (length `L_g1`),
//! 3. continuum segment 2 (same spring length `L_s`),
//! 4. rigid link 2 (length `L_g2`, its far end is the end-effector).
//!
//! Each continuum segment is described by a bend angle `theta` in `[0, pi]`
//! and a bending-plane direction `delta` (mod 2pi). Under the
//! constant-curvature assumption the segment is an arc of radius
//! `L_s / theta` that starts tangent to the local +z axis and bends towards
//! local +x; `delta` rotates that bending plane about the local z axis. The
//! frame transported across a segment is `Rz(delta) * Ry(theta) * Rz(-delta)`:
//! the wrist twist is applied, the bend performed, and the twist removed, so
//! a segment does not add net axial rotation.
//!
//! Units are millimetres and radians throughout the crate.

use nalgebra::{Matrix3, Vector3, Vector4};

/// Default bend angle below which a segment is treated as exactly straight.
///
/// The straight-segment limit of the arc expressions is `[0, 0, L_s]`; at
/// `theta = 1e-6` the difference between the limit and the true arc is a few
/// 1e-5 mm for the default geometry, far below every tolerance in the crate.
pub const DEFAULT_STRAIGHT_EPS: f64 = 1e-6;

/// Below this bend angle the closed-form arc kernels lose digits to
/// cancellation, so they switch to series expansions (error ~ theta^4).
const SERIES_THETA: f64 = 1e-4;

/// Identifies one of the four links of the chain, base to tip.
///
/// The derived ordering ranks links from proximal to distal, which the
/// distance query uses to break exact ties towards the tip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkId {
    Continuum1,
    Rigid1,
    Continuum2,
    Rigid2,
}

impl LinkId {
    /// Short label used in CSV output and log lines.
    pub fn label(self) -> &'static str {
        match self {
            LinkId::Continuum1 => "C1",
            LinkId::Rigid1 => "R1",
            LinkId::Continuum2 => "C2",
            LinkId::Rigid2 => "R2",
        }
    }

    /// Parses the short label form; used when reading CSV back.
    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "C1" => Some(LinkId::Continuum1),
            "R1" => Some(LinkId::Rigid1),
            "C2" => Some(LinkId::Continuum2),
            "R2" => Some(LinkId::Rigid2),
            _ => None,
        }
    }
}

/// Configuration of the chain: `(theta1, delta1, theta2, delta2)` in radians.
///
/// `theta` coordinates live in `[0, pi]`; `delta` coordinates are periodic
/// and canonically stored in `[0, 2pi)`. The struct itself does not enforce
/// the ranges — planner steps go through [`Config::clamped`] and scenario
/// input through validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Config {
    pub theta1: f64,
    pub delta1: f64,
    pub theta2: f64,
    pub delta2: f64,
}

impl Config {
    pub fn new(theta1: f64, delta1: f64, theta2: f64, delta2: f64) -> Self {
        Self { theta1, delta1, theta2, delta2 }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.theta1, self.delta1, self.theta2, self.delta2)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Wraps both `delta` coordinates into `[0, 2pi)`; `theta` untouched.
    pub fn wrapped(&self) -> Self {
        Self {
            theta1: self.theta1,
            delta1: wrap_angle(self.delta1),
            theta2: self.theta2,
            delta2: wrap_angle(self.delta2),
        }
    }

    /// Clamps `theta` coordinates into the given limits and wraps `delta`.
    /// Applied after every planner update.
    pub fn clamped(&self, theta_limits: [f64; 2]) -> Self {
        Self {
            theta1: self.theta1.clamp(theta_limits[0], theta_limits[1]),
            delta1: wrap_angle(self.delta1),
            theta2: self.theta2.clamp(theta_limits[0], theta_limits[1]),
            delta2: wrap_angle(self.delta2),
        }
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    // rem_euclid can return exactly 2pi when `a` is a tiny negative number.
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

/// Geometric parameters of the chain.
///
/// The default lengths are calibrated so that the two reference poses used
/// by the bundled scenarios land on their published start points:
/// `FK(pi/9, 0, pi/9, 0) ~ (51, 0, 101)` and
/// `FK(pi/3, pi, 2pi/5, pi/3) ~ (-50, 44, 71)`, both within 0.5 mm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManipulatorParams {
    /// Arc length `L_s` of each continuum segment, mm.
    pub spring_length: f64,
    /// Lengths `[L_g1, L_g2]` of the two rigid links, mm.
    pub rigid_lengths: [f64; 2],
    /// Radius of the body tube, mm; subtracted when computing clearance.
    pub body_radius: f64,
    /// Bend angle below which a segment is treated as exactly straight.
    pub straight_eps: f64,
    /// `[min, max]` limits shared by both bend angles, radians.
    pub theta_limits: [f64; 2],
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        Self {
            spring_length: 23.0,
            rigid_lengths: [30.0, 40.0],
            body_radius: 4.0,
            straight_eps: DEFAULT_STRAIGHT_EPS,
            theta_limits: [0.0, std::f64::consts::PI],
        }
    }
}

impl ManipulatorParams {
    /// Total centerline length of the chain, mm.
    pub fn total_length(&self) -> f64 {
        2.0 * self.spring_length + self.rigid_lengths[0] + self.rigid_lengths[1]
    }
}

/// Forward-kinematics result: every joint point plus the arc geometry needed
/// by distance queries.
#[derive(Clone, Debug)]
pub struct FrameChain {
    /// `[base, spring1 end, rigid1 end, spring2 end, rigid2 end]`.
    /// The last entry is the end-effector.
    pub joints: [Vector3<f64>; 5],
    /// Frame rotations transported across the two continuum segments,
    /// expressed in the frame at each segment's start.
    pub segment_rotations: [Matrix3<f64>; 2],
    /// Centers of the two bending arcs; `None` for a straight segment.
    pub arc_centers: [Option<Vector3<f64>>; 2],
    /// Unit normals of the two bending planes (well defined even for a
    /// straight segment, where the arc degenerates but the plane does not).
    pub arc_normals: [Vector3<f64>; 2],
    /// Bend radii `L_s / theta`; `None` for a straight segment.
    pub arc_radii: [Option<f64>; 2],
    /// Bend angles as given in the configuration.
    pub bend_angles: [f64; 2],
}

impl FrameChain {
    /// End-effector position (tip of rigid link 2).
    pub fn end_effector(&self) -> Vector3<f64> {
        self.joints[4]
    }

    /// Start and end points of a link's centerline.
    pub fn link_endpoints(&self, link: LinkId) -> (Vector3<f64>, Vector3<f64>) {
        match link {
            LinkId::Continuum1 => (self.joints[0], self.joints[1]),
            LinkId::Rigid1 => (self.joints[1], self.joints[2]),
            LinkId::Continuum2 => (self.joints[2], self.joints[3]),
            LinkId::Rigid2 => (self.joints[3], self.joints[4]),
        }
    }
}

/// Rotation about the y axis; maps `[0,0,1]` to `[sin a, 0, cos a]`.
pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about the z axis.
pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Frame rotation transported across one continuum segment:
/// `Rz(delta) * Ry(theta) * Rz(-delta)`.
pub fn segment_rotation(theta: f64, delta: f64) -> Matrix3<f64> {
    rot_z(delta) * rot_y(theta) * rot_z(-delta)
}

/// Arc kernels `f = (1 - cos(beta*theta)) / theta` and
/// `g = sin(beta*theta) / theta`.
///
/// `L_s * (f, 0, g)` is the point at arc-length fraction `beta` of a segment
/// in its bending frame. Series forms below [`SERIES_THETA`] keep the
/// kernels accurate for near-straight segments.
pub(crate) fn arc_profile(theta: f64, beta: f64) -> (f64, f64) {
    if theta.abs() < SERIES_THETA {
        let b2 = beta * beta;
        let t2 = theta * theta;
        let f = beta * b2 * theta * (0.5 - b2 * t2 / 24.0);
        let g = beta * (1.0 - b2 * t2 / 6.0 * (1.0 - b2 * t2 / 20.0));
        (f, g)
    } else {
        let u = beta * theta;
        ((1.0 - u.cos()) / theta, u.sin() / theta)
    }
}

/// Derivatives of [`arc_profile`] with respect to `theta` at fixed `beta`.
pub(crate) fn arc_profile_dtheta(theta: f64, beta: f64) -> (f64, f64) {
    if theta.abs() < SERIES_THETA {
        let b2 = beta * beta;
        let t2 = theta * theta;
        let df = b2 * (0.5 - b2 * t2 / 8.0);
        let dg = -b2 * beta * theta / 3.0 * (1.0 - b2 * t2 / 10.0);
        (df, dg)
    } else {
        let u = beta * theta;
        let t2 = theta * theta;
        let df = (beta * theta * u.sin() - (1.0 - u.cos())) / t2;
        let dg = (beta * theta * u.cos() - u.sin()) / t2;
        (df, dg)
    }
}

/// Endpoint of one continuum segment in its local (pre-twist) frame:
/// `(L_s/theta) * [1 - cos theta, 0, sin theta]`, or the straight-segment
/// limit `[0, 0, L_s]` for `theta < straight_eps`.
pub fn spring_endpoint_local(theta: f64, spring_length: f64, straight_eps: f64) -> Vector3<f64> {
    arc_point_local(theta, 1.0, spring_length, straight_eps)
}

/// Point at arc-length fraction `beta` of a segment in its local frame.
pub fn arc_point_local(theta: f64, beta: f64, spring_length: f64, straight_eps: f64) -> Vector3<f64> {
    if theta < straight_eps {
        return Vector3::new(0.0, 0.0, beta * spring_length);
    }
    let (f, g) = arc_profile(theta, beta);
    Vector3::new(spring_length * f, 0.0, spring_length * g)
}

/// Shared intermediate frames used by forward kinematics, point evaluation
/// and the analytic Jacobians.
pub(crate) struct ChainFrames {
    /// Wrist rotation of segment 1, `Rz(delta1)`.
    pub z1: Matrix3<f64>,
    /// Frame rotation across segment 1.
    pub r1: Matrix3<f64>,
    /// Wrist rotation of segment 2 (local to frame 1), `Rz(delta2)`.
    pub z2: Matrix3<f64>,
    /// Frame rotation across segment 2 (local to frame 1).
    pub r2: Matrix3<f64>,
    /// `r1 * z2`: bending frame of segment 2 in world coordinates.
    pub w2: Matrix3<f64>,
    /// `r1 * r2`: world frame after segment 2.
    pub r12: Matrix3<f64>,
    pub p_s1: Vector3<f64>,
    pub p_r1: Vector3<f64>,
    pub p_s2: Vector3<f64>,
    pub p_r2: Vector3<f64>,
}

pub(crate) fn chain_frames(q: &Config, p: &ManipulatorParams) -> ChainFrames {
    let z1 = rot_z(q.delta1);
    let r1 = segment_rotation(q.theta1, q.delta1);
    let z2 = rot_z(q.delta2);
    let r2 = segment_rotation(q.theta2, q.delta2);
    let w2 = r1 * z2;
    let r12 = r1 * r2;

    let p_s1 = z1 * spring_endpoint_local(q.theta1, p.spring_length, p.straight_eps);
    let p_r1 = p_s1 + r1 * Vector3::new(0.0, 0.0, p.rigid_lengths[0]);
    let p_s2 = p_r1 + w2 * spring_endpoint_local(q.theta2, p.spring_length, p.straight_eps);
    let p_r2 = p_s2 + r12 * Vector3::new(0.0, 0.0, p.rigid_lengths[1]);

    ChainFrames { z1, r1, z2, r2, w2, r12, p_s1, p_r1, p_s2, p_r2 }
}

/// Forward kinematics of the full chain.
pub fn forward_kinematics(q: &Config, p: &ManipulatorParams) -> FrameChain {
    let f = chain_frames(q, p);
    let base = Vector3::zeros();
    let y = Vector3::y();

    let (c1, l1) = if q.theta1 >= p.straight_eps {
        let lambda = p.spring_length / q.theta1;
        (Some(f.z1 * Vector3::new(lambda, 0.0, 0.0)), Some(lambda))
    } else {
        (None, None)
    };
    let (c2, l2) = if q.theta2 >= p.straight_eps {
        let lambda = p.spring_length / q.theta2;
        (Some(f.p_r1 + f.w2 * Vector3::new(lambda, 0.0, 0.0)), Some(lambda))
    } else {
        (None, None)
    };

    FrameChain {
        joints: [base, f.p_s1, f.p_r1, f.p_s2, f.p_r2],
        segment_rotations: [f.r1, f.r2],
        arc_centers: [c1, c2],
        arc_normals: [f.z1 * y, f.w2 * y],
        arc_radii: [l1, l2],
        bend_angles: [q.theta1, q.theta2],
    }
}

/// Point at arc-length fraction `beta in [0, 1]` along continuum segment
/// `segment` (0 or 1), in world coordinates.
pub fn point_on_continuum(q: &Config, p: &ManipulatorParams, segment: usize, beta: f64) -> Vector3<f64> {
    debug_assert!(segment < 2);
    debug_assert!((0.0..=1.0).contains(&beta));
    let f = chain_frames(q, p);
    match segment {
        0 => f.z1 * arc_point_local(q.theta1, beta, p.spring_length, p.straight_eps),
        _ => f.p_r1 + f.w2 * arc_point_local(q.theta2, beta, p.spring_length, p.straight_eps),
    }
}

/// Point at axial offset `offset` mm from the base of rigid link `link`
/// (0 or 1), in world coordinates.
pub fn point_on_rigid(q: &Config, p: &ManipulatorParams, link: usize, offset: f64) -> Vector3<f64> {
    debug_assert!(link < 2);
    debug_assert!(offset >= 0.0 && offset <= p.rigid_lengths[link] + 1e-9);
    let f = chain_frames(q, p);
    match link {
        0 => f.p_s1 + f.r1 * Vector3::new(0.0, 0.0, offset),
        _ => f.p_s2 + f.r12 * Vector3::new(0.0, 0.0, offset),
    }
}
