//! Numerics toolkit for one-dimensional square-root affine diffusions
//! `dX = sqrt(alpha X) dW + (beta X + b) dt` and their diagonal
//! multi-dimensional combinations.
//!
//! The crate computes expectations `E[f(X_t)]` three independent ways
//! (Fourier inversion of the closed-form characteristic function, quadrature
//! against the exact noncentral chi-square transition density, and Monte
//! Carlo with exact one-step sampling) and implements parameter-shift
//! representations of the sensitivities in the initial value and in the
//! drift slope: each derivative is rewritten as a weighted combination of
//! expectations under laws with the drift intercept shifted by multiples of
//! `alpha / 2`, so no payoff differentiation or pathwise derivative is ever
//! needed.
//!
//! Modules
//! - [`affine`]: parameter domain, Riccati exponents `h`, `g`, the
//!   characteristic function and boundary classification.
//! - [`transforms`]: payoff test functions with closed-form Fourier
//!   transforms and the inversion expectation engine.
//! - [`density`]: the scaled noncentral chi-square transition law (density
//!   oracle).
//! - [`simulate`]: exact transition sampling, a full-truncation Euler
//!   scheme and a deterministic parallel Monte Carlo engine.
//! - [`greeks`]: parameter-shift sensitivity estimators plus
//!   finite-difference oracles.
//! - [`multi`]: the diagonal product-form multi-dimensional extension.
//! - [`models`]: CIR interest-rate and branching-population adapters.
//! - [`verify`]: the self-checking suite behind `affinekit verify`.

pub mod affine;
pub mod density;
pub mod greeks;
pub mod models;
pub mod multi;
pub(crate) mod quad;
pub mod simulate;
pub mod transforms;
pub mod verify;

pub use affine::{
    char_fn, classify_boundary, log_g, riccati_h, riccati_residual, validate_params,
    AffineParams, BoundaryClass, DomainError,
};
pub use density::{
    expectation_via_density, transition_density, transition_rep, DensityError,
    NoncentralChiSquareRep,
};
pub use greeks::{
    dbeta_coefficients, dbeta_shift, delta_combined, delta_shift, fd_oracle, ibp_shift,
    ExpectationBackend, FdTarget, GreekMethod, GreekResult, GreeksError,
};
pub use models::{
    cir_combined, cir_delta, cir_ibp, cir_to_affine, galton_watson_simulate,
    population_gamma_sensitivity, CirParams, ModelsError, OffspringDist, PopulationParams,
};
pub use multi::{multi_combined, multi_delta, multi_ibp, tensor_expectation, MultiParams, TensorTestFunction};
pub use simulate::{
    mc_expectation, sample_exact, sample_multi, sample_path_euler, MCConfig, MCEstimate,
    PathGrid, SimulateError, StreamKey,
};
pub use transforms::{
    auto_truncation, expectation_of_derivative_via_inversion, expectation_via_inversion,
    gaussian_transform, QuadratureConfig, TestFunction, TransformsError,
};

/// Complex scalar used throughout (`f64` real and imaginary parts).
pub type Complex = num_complex::Complex64;
