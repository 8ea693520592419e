use std::path::PathBuf;

/// Crate-wide error type.
///
/// Numeric kernels (kinematics, Jacobians, distance queries) are total and
/// never return errors; failures are reserved for planner-level outcomes and
/// scenario input handling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The scenario file is not syntactically valid. The message carries the
    /// line/column diagnostics produced by the parser.
    #[error("cannot parse scenario {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// The scenario file parsed but violates a semantic constraint
    /// (out-of-range angle, inverted gain thresholds, start outside the
    /// sampling box, ...).
    #[error("invalid scenario: {0}")]
    Validation(String),

    /// The sampling planner exhausted its iteration budget without
    /// connecting the goal region.
    #[error("no path found after {0} iterations")]
    NoPathFound(usize),

    /// Every singular value of the (weighted) task Jacobian fell below the
    /// singularity floor, even after the damped retry.
    #[error("task Jacobian is singular; cannot take an inverse-kinematics step")]
    SingularTask,

    /// The escape direction is undefined because the closest body point
    /// coincides with the obstacle center.
    #[error("closest point coincides with obstacle center; escape direction undefined")]
    CoincidentEscape,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
