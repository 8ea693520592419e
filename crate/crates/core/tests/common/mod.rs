//! Independent reference implementations ("oracles") used by the
//! integration tests.
//!
//! Each oracle deliberately avoids the code path it checks:
//!
//! * the micro-link chain composes world-frame axis-angle rotations and
//!   integrates arc positions numerically instead of using the closed-form
//!   arc expressions;
//! * the Jacobian oracle uses central finite differences of forward
//!   kinematics;
//! * the distance oracles scan dense point samples instead of solving the
//!   closest-point geometry.

#![allow(dead_code)]

use nalgebra::{Matrix3, Rotation3, Unit, Vector3, Vector4};
use rand::RngExt;

use crplan::kinematics::{forward_kinematics, Config, ManipulatorParams};
use crplan::proximity::SphereObstacle;

/// Joint points `[base, s1, r1, s2, r2]` computed by composing axis-angle
/// rotations and integrating each arc as `n` straight micro-links
/// (midpoint rule, truncation error ~ L_s * (theta/n)^2 / 24).
pub fn micro_link_joints(q: &Config, p: &ManipulatorParams, n: usize) -> [Vector3<f64>; 5] {
    let mut pos = Vector3::zeros();
    let mut frame = Matrix3::<f64>::identity();
    let mut joints = [Vector3::zeros(); 5];

    let segs = [(q.theta1, q.delta1), (q.theta2, q.delta2)];
    let rigids = p.rigid_lengths;

    for (i, &(theta, delta)) in segs.iter().enumerate() {
        // Bending-plane normal: local y of the wrist-rotated frame.
        let wrist = Rotation3::from_axis_angle(&Vector3::z_axis(), delta);
        let axis_local = wrist * Vector3::y();
        let axis_world = Unit::new_normalize(frame * axis_local);

        let d0 = frame * Vector3::z();
        let ds = p.spring_length / n as f64;
        for j in 0..n {
            let ang = (j as f64 + 0.5) * theta / n as f64;
            let dir = Rotation3::from_axis_angle(&axis_world, ang) * d0;
            pos += ds * dir;
        }
        frame = Rotation3::from_axis_angle(&axis_world, theta).matrix() * frame;
        joints[1 + 2 * i] = pos;

        pos += frame * Vector3::new(0.0, 0.0, rigids[i]);
        joints[2 + 2 * i] = pos;
    }
    joints
}

/// Central finite-difference Jacobian of the end-effector, step `h` radians.
pub fn fd_end_effector_jacobian(q: &Config, p: &ManipulatorParams, h: f64) -> nalgebra::Matrix3x4<f64> {
    fd_jacobian_of(q, h, |cfg| forward_kinematics(cfg, p).end_effector())
}

/// Central finite-difference Jacobian of an arbitrary chain point.
pub fn fd_jacobian_of<F>(q: &Config, h: f64, eval: F) -> nalgebra::Matrix3x4<f64>
where
    F: Fn(&Config) -> Vector3<f64>,
{
    let mut j = nalgebra::Matrix3x4::zeros();
    let qv = q.as_vector();
    for col in 0..4 {
        let mut hi = qv;
        let mut lo = qv;
        hi[col] += h;
        lo[col] -= h;
        let d = (eval(&Config::from_vector(&hi)) - eval(&Config::from_vector(&lo))) / (2.0 * h);
        j.set_column(col, &d);
    }
    j
}

/// Brute-force closest distance from a point to an arc, scanning `n`
/// uniformly spaced angles (endpoints included).
pub fn sampled_arc_distance(
    point: &Vector3<f64>,
    center: &Vector3<f64>,
    normal: &Vector3<f64>,
    start: &Vector3<f64>,
    bend_angle: f64,
    n: usize,
) -> f64 {
    // Rotate the start point about the arc normal through the bend angle.
    let axis = Unit::new_normalize(*normal);
    let mut best = f64::INFINITY;
    for k in 0..=n {
        let ang = bend_angle * k as f64 / n as f64;
        let rot = Rotation3::from_axis_angle(&axis, ang);
        let pt = center + rot * (start - center);
        let d2 = (point - pt).norm_squared();
        if d2 < best {
            best = d2;
        }
    }
    best.sqrt()
}

/// Brute-force closest distance from a point to a segment (`n` samples).
pub fn sampled_segment_distance(
    point: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    n: usize,
) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..=n {
        let t = k as f64 / n as f64;
        let pt = a + (b - a) * t;
        let d2 = (point - pt).norm_squared();
        if d2 < best {
            best = d2;
        }
    }
    best.sqrt()
}

/// Brute-force minimum clearance of the whole chain against all obstacles,
/// sampling `n` points per link.
pub fn sampled_chain_clearance(
    q: &Config,
    p: &ManipulatorParams,
    obstacles: &[SphereObstacle],
    n: usize,
) -> f64 {
    use crplan::kinematics::{point_on_continuum, point_on_rigid};
    let mut best = f64::INFINITY;
    for k in 0..=n {
        let t = k as f64 / n as f64;
        let pts = [
            point_on_continuum(q, p, 0, t),
            point_on_rigid(q, p, 0, t * p.rigid_lengths[0]),
            point_on_continuum(q, p, 1, t),
            point_on_rigid(q, p, 1, t * p.rigid_lengths[1]),
        ];
        for obs in obstacles {
            for pt in &pts {
                let c = (pt - obs.center).norm() - obs.radius - p.body_radius;
                if c < best {
                    best = c;
                }
            }
        }
    }
    best
}

/// Random configuration with bend angles kept a little inside `[0, pi]` so
/// finite differences never step across the clamp boundary.
pub fn random_config<R: RngExt>(rng: &mut R) -> Config {
    Config::new(
        rng.random_range(0.01..std::f64::consts::PI - 0.01),
        rng.random_range(0.0..2.0 * std::f64::consts::PI),
        rng.random_range(0.01..std::f64::consts::PI - 0.01),
        rng.random_range(0.0..2.0 * std::f64::consts::PI),
    )
}

/// Random configuration including near-straight and near-limit bends.
pub fn random_config_full_range<R: RngExt>(rng: &mut R) -> Config {
    Config::new(
        rng.random_range(0.0..std::f64::consts::PI),
        rng.random_range(0.0..2.0 * std::f64::consts::PI),
        rng.random_range(0.0..std::f64::consts::PI),
        rng.random_range(0.0..2.0 * std::f64::consts::PI),
    )
}

pub fn vec3_max_abs_diff(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn vec4_from<R: RngExt>(rng: &mut R, lo: f64, hi: f64) -> Vector4<f64> {
    Vector4::new(
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    )
}
