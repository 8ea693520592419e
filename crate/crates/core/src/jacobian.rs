//! Analytic position Jacobians, pseudo-inverses and joint-limit weighting.
//!
//! Every Jacobian here is a 3x4 matrix mapping configuration rates
//! `(theta1_dot, delta1_dot, theta2_dot, delta2_dot)` to the linear velocity
//! of a chosen point on the chain, in mm per radian. The columns are derived
//! by differentiating the closed-form kinematics; the integration tests
//! check every column against central finite differences.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Matrix4x3, Vector3, Vector4};

use crate::kinematics::{
    arc_profile, arc_profile_dtheta, chain_frames, rot_y, rot_z, Config, LinkId, ManipulatorParams,
};

/// Relative singular-value cutoff used by the pseudo-inverse: singular
/// values below `tol * sigma_max` are treated as zero.
pub const PINV_REL_TOL: f64 = 1e-8;

/// Absolute floor (mm/rad) below which the whole task Jacobian counts as
/// singular. For this chain the largest singular value is on the order of
/// the chain length, so the floor only trips on degenerate input.
pub const TASK_SINGULAR_FLOOR: f64 = 1e-9;

/// A point on the chain, identified by link and local coordinate.
///
/// For continuum links the coordinate is the arc-length fraction
/// `beta in [0, 1]`; for rigid links it is the axial offset in mm from the
/// link base.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointDescriptor {
    pub link: LinkId,
    pub local_coord: f64,
}

impl PointDescriptor {
    pub fn end_effector(params: &ManipulatorParams) -> Self {
        Self { link: LinkId::Rigid2, local_coord: params.rigid_lengths[1] }
    }

    /// World position of the described point.
    pub fn position(&self, q: &Config, params: &ManipulatorParams) -> Vector3<f64> {
        use crate::kinematics::{point_on_continuum, point_on_rigid};
        match self.link {
            LinkId::Continuum1 => point_on_continuum(q, params, 0, self.local_coord),
            LinkId::Rigid1 => point_on_rigid(q, params, 0, self.local_coord),
            LinkId::Continuum2 => point_on_continuum(q, params, 1, self.local_coord),
            LinkId::Rigid2 => point_on_rigid(q, params, 1, self.local_coord),
        }
    }
}

/// Skew matrix of the z axis: `K v = z x v`. Differentiating `Rz` gives
/// `dRz/ddelta = K Rz`.
fn skew_z() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

/// Skew matrix of the y axis: `dRy/dtheta = skew_y * Ry`.
fn skew_y() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0)
}

/// Derivative of the segment rotation with respect to the bend angle:
/// `Rz(d) * skew_y * Ry(t) * Rz(-d)`.
fn d_segment_rotation_dtheta(theta: f64, delta: f64) -> Matrix3<f64> {
    rot_z(delta) * skew_y() * rot_y(theta) * rot_z(-delta)
}

/// Derivative of the segment rotation with respect to the wrist angle:
/// `K R - R K` (the `Rz(-d)` factor commutes with `K`).
fn d_segment_rotation_ddelta(r: &Matrix3<f64>) -> Matrix3<f64> {
    let k = skew_z();
    k * r - r * k
}

/// Analytic Jacobian of an arbitrary chain point.
///
/// Columns for coordinates of segments distal to the point's link are zero;
/// in particular a point on the first continuum segment only responds to
/// `(theta1, delta1)`.
pub fn point_jacobian(q: &Config, params: &ManipulatorParams, pd: &PointDescriptor) -> Matrix3x4<f64> {
    let f = chain_frames(q, params);
    let ls = params.spring_length;
    let k = skew_z();
    let b1 = Vector3::new(0.0, 0.0, params.rigid_lengths[0]);

    // Segment-1 quantities shared by every link case.
    let (df1, dg1) = arc_profile_dtheta(q.theta1, 1.0);
    let dps1 = Vector3::new(ls * df1, 0.0, ls * dg1);
    let d1m = d_segment_rotation_dtheta(q.theta1, q.delta1);
    let e1m = d_segment_rotation_ddelta(&f.r1);

    let mut j = Matrix3x4::zeros();
    match pd.link {
        LinkId::Continuum1 => {
            let beta = pd.local_coord;
            let (fb, gb) = arc_profile(q.theta1, beta);
            let (dfb, dgb) = arc_profile_dtheta(q.theta1, beta);
            let p_local = Vector3::new(ls * fb, 0.0, ls * gb);
            j.set_column(0, &(f.z1 * Vector3::new(ls * dfb, 0.0, ls * dgb)));
            j.set_column(1, &(k * (f.z1 * p_local)));
        }
        LinkId::Rigid1 => {
            let v = Vector3::new(0.0, 0.0, pd.local_coord);
            let point = f.p_s1 + f.r1 * v;
            j.set_column(0, &(f.z1 * dps1 + d1m * v));
            // delta1 spins everything up to the end of rigid link 1 rigidly
            // about the base z axis, so the column is simply z x p.
            j.set_column(1, &(k * point));
        }
        LinkId::Continuum2 => {
            let beta = pd.local_coord;
            let (fb, gb) = arc_profile(q.theta2, beta);
            let (dfb, dgb) = arc_profile_dtheta(q.theta2, beta);
            let p2_local = f.z2 * Vector3::new(ls * fb, 0.0, ls * gb);
            let suffix = b1 + p2_local;
            j.set_column(0, &(f.z1 * dps1 + d1m * suffix));
            j.set_column(1, &(k * f.p_s1 + e1m * suffix));
            j.set_column(2, &(f.r1 * (f.z2 * Vector3::new(ls * dfb, 0.0, ls * dgb))));
            j.set_column(3, &(f.r1 * (k * p2_local)));
        }
        LinkId::Rigid2 => {
            let v = Vector3::new(0.0, 0.0, pd.local_coord);
            let (f2, g2) = arc_profile(q.theta2, 1.0);
            let (df2, dg2) = arc_profile_dtheta(q.theta2, 1.0);
            let ps2_local = f.z2 * Vector3::new(ls * f2, 0.0, ls * g2);
            let dps2 = f.z2 * Vector3::new(ls * df2, 0.0, ls * dg2);
            let d2m = d_segment_rotation_dtheta(q.theta2, q.delta2);
            let e2m = d_segment_rotation_ddelta(&f.r2);
            let suffix = b1 + ps2_local + f.r2 * v;
            j.set_column(0, &(f.z1 * dps1 + d1m * suffix));
            j.set_column(1, &(k * f.p_s1 + e1m * suffix));
            j.set_column(2, &(f.r1 * (dps2 + d2m * v)));
            j.set_column(3, &(f.r1 * (k * ps2_local + e2m * v)));
        }
    }
    j
}

/// Jacobian of the end-effector (tip of rigid link 2).
pub fn end_effector_jacobian(q: &Config, params: &ManipulatorParams) -> Matrix3x4<f64> {
    point_jacobian(q, params, &PointDescriptor::end_effector(params))
}

/// Moore-Penrose pseudo-inverse of a 3x4 matrix via SVD.
///
/// Singular values below `rel_tol * sigma_max` are zeroed, which keeps the
/// inverse bounded near rank loss.
pub fn pseudo_inverse(m: &Matrix3x4<f64>, rel_tol: f64) -> Matrix4x3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return Matrix4x3::zeros();
    }
    let cut = rel_tol * smax;
    let mut sinv = Matrix3::zeros();
    for i in 0..3 {
        let s = svd.singular_values[i];
        if s > cut {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    v_t.transpose() * sinv * u.transpose()
}

/// Pseudo-inverse with the rank decision referenced to an external scale:
/// singular values below `rel_tol * scale` are zeroed.
///
/// Needed when `m` is a product like `J P` that a projector may annihilate
/// entirely: the surviving entries are then rounding noise, and a cut
/// relative to `m`'s own largest singular value would invert that noise.
/// Passing the parent matrix's largest singular value as `scale` makes the
/// inverse of an annihilated product collapse to zero instead.
pub fn pseudo_inverse_scaled(m: &Matrix3x4<f64>, rel_tol: f64, scale: f64) -> Matrix4x3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    if scale <= 0.0 {
        return Matrix4x3::zeros();
    }
    let cut = rel_tol * scale;
    let mut sinv = Matrix3::zeros();
    for i in 0..3 {
        let s = svd.singular_values[i];
        if s > cut {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    v_t.transpose() * sinv * u.transpose()
}

/// Damped (least-squares) pseudo-inverse: each singular value `s` maps to
/// `s / (s^2 + damping^2)`, which stays bounded through singularities.
pub fn damped_pseudo_inverse(m: &Matrix3x4<f64>, damping: f64) -> Matrix4x3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut sinv = Matrix3::zeros();
    let d2 = damping * damping;
    for i in 0..3 {
        let s = svd.singular_values[i];
        let denom = s * s + d2;
        if denom > 0.0 {
            sinv[(i, i)] = s / denom;
        }
    }
    v_t.transpose() * sinv * u.transpose()
}

/// Pseudo-inverse on dynamically sized matrices; used by tests to
/// cross-check the fixed-size path and available for irregular shapes.
pub fn pseudo_inverse_dyn(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let smax = svd.singular_values.max();
    let rank_dim = svd.singular_values.len();
    let mut sinv = DMatrix::zeros(rank_dim, rank_dim);
    if smax > 0.0 {
        let cut = rel_tol * smax;
        for i in 0..rank_dim {
            let s = svd.singular_values[i];
            if s > cut {
                sinv[(i, i)] = 1.0 / s;
            }
        }
    }
    v_t.transpose() * sinv * u.transpose()
}

/// Null-space projector `I - J^+ J` of a task Jacobian. Vectors mapped
/// through it produce no first-order end-effector motion.
pub fn null_space_projector(j: &Matrix3x4<f64>, rel_tol: f64) -> Matrix4<f64> {
    Matrix4::identity() - pseudo_inverse(j, rel_tol) * j
}

/// Whether every singular value of the task Jacobian sits below the
/// absolute floor, i.e. the task direction is unreachable.
pub fn is_task_singular(m: &Matrix3x4<f64>, floor: f64) -> bool {
    let svd = m.svd(false, false);
    svd.singular_values.max() < floor
}

/// State carried between joint-limit weighting calls: the previous
/// magnitude of the limit-function gradient for each coordinate.
///
/// A fresh state starts at zero, which treats the first evaluation as an
/// increase and weights it accordingly.
#[derive(Clone, Debug, Default)]
pub struct WeightState {
    grad_mag: Vector4<f64>,
}

impl WeightState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Diagonal joint-limit weights for the damped coordinates.
///
/// The limit function `H(q)` sums `(hi-lo)^2 / (4 (hi-q)(q-lo))` over the
/// two bend angles; its gradient magnitude grows without bound towards a
/// limit. A coordinate is weighted `1 + |dH/dq|` while that magnitude is
/// non-decreasing (moving towards the limit) and `1` otherwise, so motion
/// away from a limit is never penalised. Wrist coordinates are periodic and
/// always weigh `1`.
pub fn joint_limit_weights(
    q: &Config,
    state: &mut WeightState,
    theta_limits: [f64; 2],
) -> Vector4<f64> {
    let qv = q.as_vector();
    let mut w = Vector4::new(1.0, 1.0, 1.0, 1.0);
    let mut grads = Vector4::zeros();
    for &i in &[0usize, 2usize] {
        let g = limit_gradient_magnitude(qv[i], theta_limits);
        grads[i] = g;
        if g >= state.grad_mag[i] {
            w[i] = 1.0 + g;
        }
    }
    state.grad_mag = grads;
    w
}

/// `|dH/dq|` of the joint-limit function for one coordinate. Saturates near
/// the boundary instead of dividing by zero.
fn limit_gradient_magnitude(q: f64, [lo, hi]: [f64; 2]) -> f64 {
    // Distance guard: within 1e-9 rad of a limit the gradient plateaus at
    // ~1e18, which freezes the coordinate without producing NaN.
    const GUARD: f64 = 1e-9;
    let span = hi - lo;
    let a = (hi - q).max(GUARD);
    let b = (q - lo).max(GUARD);
    let num = span * span * (2.0 * q - hi - lo).abs();
    num / (4.0 * a * a * b * b)
}

/// Inverse square root of a diagonal weight vector, as a matrix:
/// `W^{-1/2} = diag(1/sqrt(w_i))`.
pub fn inv_sqrt_weights(w: &Vector4<f64>) -> Matrix4<f64> {
    Matrix4::from_diagonal(&w.map(|x| 1.0 / x.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params() -> ManipulatorParams {
        ManipulatorParams::default()
    }

    #[test]
    fn wrist_columns_vanish_for_straight_segments() {
        // With theta = 0 the wrist angle has no geometric effect, so its
        // Jacobian column must be zero.
        let p = params();
        let q = Config::new(0.0, 1.3, 0.0, 0.4);
        let j = end_effector_jacobian(&q, &p);
        assert!(j.column(1).norm() < 1e-12, "delta1 column nonzero: {j}");
        assert!(j.column(3).norm() < 1e-12, "delta2 column nonzero: {j}");
        // The bend columns stay well defined in the straight limit.
        assert!(j.column(0).norm() > 1.0);
        assert!(j.column(2).norm() > 1.0);
    }

    #[test]
    fn distal_coordinates_do_not_move_proximal_points() {
        let p = params();
        let q = Config::new(0.9, 2.0, 1.1, 0.7);
        let pd = PointDescriptor { link: LinkId::Rigid1, local_coord: 12.0 };
        let j = point_jacobian(&q, &p, &pd);
        assert!(j.column(2).norm() == 0.0);
        assert!(j.column(3).norm() == 0.0);
    }

    #[test]
    fn pseudo_inverse_satisfies_penrose_conditions() {
        let p = params();
        let q = Config::new(1.2, 0.4, 0.8, 3.3);
        let j = end_effector_jacobian(&q, &p);
        let pinv = pseudo_inverse(&j, PINV_REL_TOL);
        let jj = j * pinv * j;
        let pp = pinv * j * pinv;
        assert_relative_eq!(jj, j, epsilon = 1e-9);
        assert_relative_eq!(pp, pinv, epsilon = 1e-12);
        // J J^+ and J^+ J must be symmetric.
        let a = j * pinv;
        let b = pinv * j;
        assert_relative_eq!(a, a.transpose(), epsilon = 1e-10);
        assert_relative_eq!(b, b.transpose(), epsilon = 1e-10);
    }

    #[test]
    fn null_space_projector_kills_end_effector_motion() {
        let p = params();
        let q = Config::new(0.7, 5.0, 2.1, 1.0);
        let j = end_effector_jacobian(&q, &p);
        let proj = null_space_projector(&j, PINV_REL_TOL);
        // Projector is idempotent and symmetric.
        assert_relative_eq!(proj * proj, proj, epsilon = 1e-10);
        assert_relative_eq!(proj, proj.transpose(), epsilon = 1e-10);
        for seed in 0..5 {
            let v = Vector4::new(seed as f64 + 0.5, -1.0, 2.0, 0.25 * seed as f64);
            assert!((j * (proj * v)).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_matrix_is_task_singular_and_maps_to_zero() {
        let z = Matrix3x4::zeros();
        assert!(is_task_singular(&z, TASK_SINGULAR_FLOOR));
        assert_eq!(pseudo_inverse(&z, PINV_REL_TOL), Matrix4x3::zeros());
        let j = end_effector_jacobian(&Config::new(1.0, 0.0, 1.0, 0.0), &params());
        assert!(!is_task_singular(&j, TASK_SINGULAR_FLOOR));
    }

    #[test]
    fn damped_inverse_tracks_plain_inverse_away_from_singularity() {
        let p = params();
        let j = end_effector_jacobian(&Config::new(1.0, 2.0, 0.5, 0.1), &p);
        let plain = pseudo_inverse(&j, PINV_REL_TOL);
        let damped = damped_pseudo_inverse(&j, 1e-6);
        assert_relative_eq!(plain, damped, epsilon = 1e-6);
    }

    #[test]
    fn weights_are_identity_at_midrange() {
        let p = params();
        let mid = 0.5 * (p.theta_limits[0] + p.theta_limits[1]);
        let mut st = WeightState::new();
        let w = joint_limit_weights(&Config::new(mid, 1.0, mid, 4.0), &mut st, p.theta_limits);
        assert_eq!(w, Vector4::new(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn weight_grows_large_approaching_a_limit() {
        let p = params();
        let mut st = WeightState::new();
        let near = 0.999 * p.theta_limits[1];
        let w = joint_limit_weights(&Config::new(near, 0.0, 1.0, 0.0), &mut st, p.theta_limits);
        assert!(w[0] > 10.0, "weight near limit too small: {}", w[0]);
        assert_eq!(w[1], 1.0);
        assert_eq!(w[3], 1.0);
    }

    #[test]
    fn weight_releases_when_moving_away_from_a_limit() {
        let p = params();
        let mut st = WeightState::new();
        let near = 0.98 * PI;
        joint_limit_weights(&Config::new(near, 0.0, 1.0, 0.0), &mut st, p.theta_limits);
        // Next evaluation is further from the limit: gradient magnitude
        // decreased, so the weight must drop back to 1.
        let w = joint_limit_weights(&Config::new(near - 0.1, 0.0, 1.0, 0.0), &mut st, p.theta_limits);
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn weighted_jacobian_recovers_plain_jacobian() {
        // J_we * W^{1/2} == J_e by construction; checked to tight tolerance.
        let p = params();
        let q = Config::new(3.0, 0.2, 0.4, 2.2);
        let mut st = WeightState::new();
        let w = joint_limit_weights(&q, &mut st, p.theta_limits);
        let j = end_effector_jacobian(&q, &p);
        let j_we = j * inv_sqrt_weights(&w);
        let w_sqrt = Matrix4::from_diagonal(&w.map(f64::sqrt));
        assert_relative_eq!(j_we * w_sqrt, j, epsilon = 1e-10);
    }

    #[test]
    fn scaled_pseudo_inverse_zeroes_annihilated_products() {
        // A matrix whose entries are pure rounding noise relative to the
        // provided scale must invert to zero, while a healthy matrix must
        // match the plain pseudo-inverse.
        let noise = Matrix3x4::from_fn(|i, j| 1e-13 * ((i * 4 + j) as f64 - 5.0));
        assert_eq!(pseudo_inverse_scaled(&noise, PINV_REL_TOL, 50.0), Matrix4x3::zeros());

        let p = params();
        let q = Config::new(0.9, 0.3, 1.1, 2.0);
        let j = end_effector_jacobian(&q, &p);
        let smax = j.svd(false, false).singular_values.max();
        let a = pseudo_inverse(&j, PINV_REL_TOL);
        let b = pseudo_inverse_scaled(&j, PINV_REL_TOL, smax);
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }
}
