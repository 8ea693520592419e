//! Run reports and their CSV serialization.
//!
//! One CSV row per recorded step, with a fixed column contract:
//!
//! ```text
//! step,theta1,delta1,theta2,delta2,ee_x,ee_y,ee_z,exp_x,exp_y,exp_z,
//! tracking_error_mm,clearance_obs<i>_mm...,closest_link,g_h,g_v,avoidance_active
//! ```
//!
//! with one `clearance_obs<i>_mm` column per obstacle (1-based `<i>`).
//! Floats are written with 17 significant digits so a re-parse reproduces
//! the in-memory values bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::baselines::BaselineOutcome;
use crate::error::Result;
use crate::iik::Trajectory;

/// Wall-clock seconds of the two planning phases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    /// Building the end-effector path (zero for planners that search
    /// configuration space directly).
    pub path_planning: f64,
    /// Stepping the manipulator along the path (or the C-space search).
    pub motion_planning: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.path_planning + self.motion_planning
    }
}

/// Everything one scenario run produces.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub trajectory: Trajectory,
    pub outcome: BaselineOutcome,
    pub timings: Timings,
}

/// Header row for a run with `n_obstacles` obstacles.
pub fn csv_header(n_obstacles: usize) -> String {
    let mut h = String::from(
        "step,theta1,delta1,theta2,delta2,ee_x,ee_y,ee_z,exp_x,exp_y,exp_z,tracking_error_mm",
    );
    for i in 1..=n_obstacles {
        let _ = write!(h, ",clearance_obs{i}_mm");
    }
    h.push_str(",closest_link,g_h,g_v,avoidance_active");
    h
}

/// Formats a float with 17 significant digits (round-trip exact).
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes the trajectory as CSV text (header + one row per step).
pub fn csv_string(report: &RunReport) -> String {
    let n_obs = report
        .trajectory
        .steps
        .first()
        .map_or(0, |s| s.clearances.len());
    let mut out = csv_header(n_obs);
    out.push('\n');
    for (i, s) in report.trajectory.steps.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in [s.config.theta1, s.config.delta1, s.config.theta2, s.config.delta2] {
            let _ = write!(out, ",{}", fmt_f64(v));
        }
        for v in [s.ee_actual, s.ee_expected] {
            let _ = write!(out, ",{},{},{}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
        }
        let _ = write!(out, ",{}", fmt_f64(s.tracking_error));
        for c in &s.clearances {
            let _ = write!(out, ",{}", fmt_f64(*c));
        }
        let link = s.closest_link.map_or("-", |l| l.label());
        let _ = write!(
            out,
            ",{link},{},{},{}",
            fmt_f64(s.g_h),
            fmt_f64(s.g_v),
            s.avoidance_active
        );
        out.push('\n');
    }
    out
}

/// Writes the per-step CSV to `path`.
pub fn write_csv(report: &RunReport, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(report))?;
    Ok(())
}
