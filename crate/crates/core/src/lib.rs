//! Motion planning for a two-segment continuum manipulator with rigid links.
//!
//! The chain alternates continuum (constant-curvature spring) segments and
//! rigid links; its configuration is `(theta1, delta1, theta2, delta2)`.
//! The crate provides:
//!
//! * [`kinematics`] — closed-form forward kinematics of the hybrid chain;
//! * [`jacobian`] — analytic position Jacobians, pseudo-inverses and
//!   joint-limit weighting;
//! * [`proximity`] — exact closest-point and clearance queries between the
//!   chain centerline and spherical obstacles;
//! * [`iik`] — weighted inverse instantaneous kinematics with null-space
//!   obstacle avoidance, and the step-by-step motion planner built on it;
//! * [`srrt`] — workspace RRT* with greedy pruning and B-spline smoothing
//!   for end-effector paths;
//! * [`baselines`] — comparison planners (random null-space exploration and
//!   configuration-space RRT*);
//! * [`scenario`] / [`report`] / [`bench`] — scenario files, run reports,
//!   CSV output and the benchmark harness used by the `crplan` binary.
//!
//! Units are millimetres and radians throughout.

pub mod bench;
pub mod baselines;
pub mod iik;
pub mod jacobian;
pub mod kinematics;
pub mod proximity;
pub mod report;
pub mod scenario;
pub mod srrt;

mod error;
pub use error::{Error, Result};
