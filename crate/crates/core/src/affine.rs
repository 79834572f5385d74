//! Parameter domain, Riccati exponents and the closed-form characteristic
//! function of the square-root affine diffusion
//! `dX = sqrt(alpha X) dW + (beta X + b) dt`, `X_0 = x >= 0`.
//!
//! The characteristic function is exponential-affine in the start point,
//! `E[exp(i theta X_t)] = exp(g(t,theta) + x h(t,theta))`, where `h` solves
//! the Riccati equation `dh/dt = (alpha/2) h^2 + beta h`, `h(0) = i theta`,
//! and `g(t) = integral of b h(s) ds`. Both admit closed forms; this module
//! evaluates them in a representation that is smooth through `beta = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parameter triple of the affine SDE, restricted to the admissible domain
/// `alpha > 0`, `beta` real, `b >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    /// Diffusion scale (coefficient under the square root), strictly positive.
    pub alpha: f64,
    /// Drift slope; any finite real.
    pub beta: f64,
    /// Drift intercept, nonnegative.
    pub b: f64,
}

/// Violation of the admissible parameter domain.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{name} must be {requirement}, got {value}")]
pub struct DomainError {
    pub name: &'static str,
    pub requirement: &'static str,
    pub value: f64,
}

impl DomainError {
    pub(crate) fn new(name: &'static str, requirement: &'static str, value: f64) -> Self {
        Self {
            name,
            requirement,
            value,
        }
    }
}

/// Behavior of the diffusion at the boundary 0, determined by `2b / alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryClass {
    /// `b = 0`: once the process reaches 0 it stays there.
    AbsorbedAtZero,
    /// `0 < 2b/alpha < 1`: the process hits 0 and reflects instantaneously.
    ReflectsAtZero,
    /// `2b/alpha >= 1`: started from a positive point, the process never
    /// reaches 0.
    NeverHitsZero,
}

impl AffineParams {
    /// Validated constructor; see [`validate_params`].
    pub fn new(alpha: f64, beta: f64, b: f64) -> Result<Self, DomainError> {
        validate_params(alpha, beta, b)
    }

    /// Same diffusion with the drift intercept shifted by `delta`.
    ///
    /// The shift representations of the sensitivities only ever move `b` by
    /// multiples of `alpha / 2`; the result must stay in the domain.
    pub fn shift_b(&self, delta: f64) -> Result<Self, DomainError> {
        validate_params(self.alpha, self.beta, self.b + delta)
    }
}

/// Checks `(alpha, beta, b)` against the admissible domain and returns the
/// validated triple.
pub fn validate_params(alpha: f64, beta: f64, b: f64) -> Result<AffineParams, DomainError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(DomainError::new("alpha", "positive and finite", alpha));
    }
    if !beta.is_finite() {
        return Err(DomainError::new("beta", "finite", beta));
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(DomainError::new("b", "nonnegative and finite", b));
    }
    Ok(AffineParams { alpha, beta, b })
}

/// Boundary behavior at 0 as a function of `2b / alpha`.
pub fn classify_boundary(p: &AffineParams) -> BoundaryClass {
    if p.b == 0.0 {
        BoundaryClass::AbsorbedAtZero
    } else if 2.0 * p.b / p.alpha < 1.0 {
        BoundaryClass::ReflectsAtZero
    } else {
        BoundaryClass::NeverHitsZero
    }
}

/// `(exp(z) - 1) / z` evaluated without cancellation; equals 1 at `z = 0`.
///
/// This kernel is what keeps every other formula in the crate smooth through
/// `beta = 0`: no user-facing code branches on `beta == 0`.
pub(crate) fn expm1_over(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `(exp(beta t) - 1) / beta`, continuously extended to `t` at `beta = 0`.
///
/// Strictly positive for `t > 0`; shows up as the effective time scale in
/// the transition law and in all shift coefficients.
pub(crate) fn growth_time(t: f64, beta: f64) -> f64 {
    t * expm1_over(beta * t)
}

/// Riccati exponent `h(t, theta)` multiplying the start point in the
/// characteristic function.
///
/// Closed form, written as `e^{beta t} i theta / (1 - i (alpha/2) M theta)`
/// with `M = (e^{beta t} - 1)/beta`; the denominator has modulus >= 1 for
/// real `theta`, so the expression is well defined everywhere, and at
/// `t = 0` it reduces exactly to `i theta`.
pub fn riccati_h(t: f64, theta: f64, p: &AffineParams) -> Complex64 {
    debug_assert!(t >= 0.0, "riccati_h requires t >= 0");
    let growth = (p.beta * t).exp();
    let m = growth_time(t, p.beta);
    let numer = Complex64::new(0.0, growth * theta);
    let denom = Complex64::new(1.0, -0.5 * p.alpha * m * theta);
    numer / denom
}

/// Drift exponent `g(t, theta)`, the time integral of `b h(s, theta)`.
///
/// Equals `-(2b/alpha) Log(1 - i (alpha/2) M theta)` with the principal
/// branch of the complex logarithm; the argument has real part 1, so no
/// branch crossing occurs for real `theta`.
pub fn log_g(t: f64, theta: f64, p: &AffineParams) -> Complex64 {
    debug_assert!(t >= 0.0, "log_g requires t >= 0");
    let m = growth_time(t, p.beta);
    let arg = Complex64::new(1.0, -0.5 * p.alpha * m * theta);
    debug_assert!(arg.re > 0.0, "Log argument left the right half-plane");
    -(2.0 * p.b / p.alpha) * arg.ln()
}

/// Characteristic function `E[exp(i theta X_t)] = exp(g + x h)`.
///
/// Exactly 1 at `theta = 0`, modulus at most 1 everywhere, and equal to
/// `exp(i theta x)` at `t = 0` (the degenerate law at the start point).
pub fn char_fn(t: f64, theta: f64, x: f64, p: &AffineParams) -> Complex64 {
    debug_assert!(x >= 0.0, "char_fn requires x >= 0");
    (log_g(t, theta, p) + x * riccati_h(t, theta, p)).exp()
}

/// Defect of the closed-form `h` against the Riccati equation, measured by a
/// central difference in `t`: `|(h(t+dt)-h(t-dt))/(2 dt) - (alpha/2) h^2 - beta h|`.
///
/// Used by the verification suite; the closed form keeps this at the
/// `O(dt^2)` discretization level.
pub fn riccati_residual(t: f64, theta: f64, p: &AffineParams, dt: f64) -> f64 {
    assert!(dt > 0.0 && t > dt, "riccati_residual requires t > dt > 0");
    let h = riccati_h(t, theta, p);
    let dh = (riccati_h(t + dt, theta, p) - riccati_h(t - dt, theta, p)) / (2.0 * dt);
    (dh - (0.5 * p.alpha * h * h + p.beta * h)).norm()
}
