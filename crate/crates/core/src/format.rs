//! Number formatting for CSV output.

use std::fmt;

/// Shortest round-trip representation, in exponent form outside `[1e-4, 1e16)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Float(pub f64);

impl fmt::Display for Float {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        let mag = x.abs();
        if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&mag) {
            write!(f, "{x}")
        } else {
            write!(f, "{x:e}")
        }
    }
}
