//! Shared fixtures for the benchmark targets.

use affinekit::{validate_params, AffineParams};

/// Mid-grid parameter set used across benchmarks.
pub fn reference_params() -> AffineParams {
    validate_params(1.0, 0.3, 0.5).expect("in the admissible domain")
}
