//! Numerical tolerances shared across the crate.
//!
//! Problem sizes stay below a few thousand modes, so these bounds sit well
//! above accumulated double-precision rounding.

/// Relative Hermiticity residual accepted on input matrices.
pub const HERMITIAN_INPUT: f64 = 1e-12;

/// Hermiticity residual accepted on density matrices.
pub const HERMITIAN_SPDM: f64 = 1e-10;

/// Eigen-reconstruction residual, relative to the largest matrix entry.
pub const RECONSTRUCTION: f64 = 1e-10;

/// Deviation of `U†U` from the identity accepted for propagators.
pub const UNITARY: f64 = 1e-9;

/// Slack on the eigenvalue bounds of physical SPDMs.
pub const PHYSICAL_EIGENVALUE: f64 = 1e-9;

/// Below this `|1 - a|` the scalar RI fixed point is reported as absent.
pub const FIXED_POINT_ABSENT: f64 = 1e-14;

/// `|U00|` below which the map-extracted rate is reported as infinite.
pub const AMPLITUDE_ZERO: f64 = 1e-15;

/// Agreement required between the closed-form and direct double commutator.
pub const DOUBLE_COMMUTATOR: f64 = 1e-10;

/// Accuracy guard for the explicit EC integrator: `dt * max|detuning|`.
pub const EC_STEP_GUARD: f64 = 0.1;

/// Sizes are validated against each other with this relative slack.
pub const GRID_FIT: f64 = 1e-9;
