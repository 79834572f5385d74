//! Parameter-shift representations of sensitivities.
//!
//! The derivative of `E[f(X_t)]` in the start point, the expectation of
//! `f'(X_t)` (integration by parts), and the derivative in the drift slope
//! all admit exact rewritings as weighted combinations of expectations of
//! `f` itself under laws whose drift intercept is shifted by multiples of
//! `alpha/2`:
//!
//! - start-point derivative: `C (E_up - E_base)` with the intercept raised
//!   by `alpha/2` and `C = 2 beta e^{beta t} / (alpha (e^{beta t} - 1))`
//!   (continuously `2/(alpha t)` at `beta = 0`);
//! - integration by parts: `C' (E_base - E_down)` with the intercept lowered
//!   by `alpha/2`, legal only when `b >= alpha/2`, and
//!   `C' = 2 beta / (alpha (e^{beta t} - 1))`;
//! - their composition: `e^{beta t} E[f'(X_t^{up})]`;
//! - drift-slope derivative: a three-term combination over intercepts
//!   `b, b + alpha/2, b + alpha` whose weights sum to zero.
//!
//! Any expectation backend works behind the representations; the Monte
//! Carlo backend couples all shifted laws on common random numbers and
//! reports the standard error of the per-sample weighted combination.

use crate::affine::{growth_time, validate_params, AffineParams, DomainError};
use crate::density::{expectation_via_density, transition_rep, DensityError};
use crate::simulate::{mc_over_streams, ExactSampler, MCConfig, SimulateError};
use crate::transforms::{
    expectation_of_derivative_via_inversion, expectation_via_inversion, QuadratureConfig,
    TestFunction, TransformsError,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreeksError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Transforms(#[from] TransformsError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error("Feller condition violated: b = {b} is below alpha/2 = {half_alpha}, the downshifted intercept would leave the parameter domain")]
    FellerViolation { b: f64, half_alpha: f64 },
    #[error("shift weights must sum to zero, got {sum:.3e}")]
    CoefficientIdentity { sum: f64 },
    #[error("test function does not support {0}")]
    Unsupported(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// How an expectation is evaluated behind a shift representation.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpectationBackend {
    /// Fourier inversion of the characteristic function.
    Inversion(QuadratureConfig),
    /// Quadrature against the noncentral chi-square transition density.
    Density(QuadratureConfig),
    /// Exact-sampler Monte Carlo with common random numbers across shifts.
    MonteCarlo(MCConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GreekMethod {
    Inversion,
    Density,
    MonteCarlo,
}

impl ExpectationBackend {
    pub fn method(&self) -> GreekMethod {
        match self {
            Self::Inversion(_) => GreekMethod::Inversion,
            Self::Density(_) => GreekMethod::Density,
            Self::MonteCarlo(_) => GreekMethod::MonteCarlo,
        }
    }
}

/// A sensitivity estimate with full shift provenance: which parameter sets
/// were priced and with which weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreekResult {
    pub value: f64,
    /// Standard error of the coupled per-sample combination; Monte Carlo
    /// backend only.
    pub std_error: Option<f64>,
    pub method: GreekMethod,
    pub base_params: AffineParams,
    /// Parameter sets entering the combination, aligned with `weights`.
    pub shifted_params: Vec<AffineParams>,
    pub weights: Vec<f64>,
}

/// `2 beta e^{beta t} / (alpha (e^{beta t} - 1))`, continuous through
/// `beta = 0` where it equals `2 / (alpha t)`.
pub(crate) fn delta_factor(t: f64, p: &AffineParams) -> f64 {
    2.0 * (p.beta * t).exp() / (p.alpha * growth_time(t, p.beta))
}

/// `2 beta / (alpha (e^{beta t} - 1))`, continuous through `beta = 0`.
pub(crate) fn ibp_factor(t: f64, p: &AffineParams) -> f64 {
    2.0 / (p.alpha * growth_time(t, p.beta))
}

fn require_positive(name: &'static str, v: f64) -> Result<f64, GreeksError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::new(name, "positive and finite", v).into())
    }
}

/// Single expectation `E[f(X_t)]` (or `E[f'(X_t)]`) under one backend.
pub(crate) fn scalar_expectation(
    f: &TestFunction,
    derivative: bool,
    t: f64,
    x: f64,
    p: &AffineParams,
    be: &ExpectationBackend,
) -> Result<f64, GreeksError> {
    if derivative && !f.derivative_available() {
        return Err(GreeksError::Unsupported("a derivative"));
    }
    match be {
        ExpectationBackend::Inversion(cfg) => {
            let v = if derivative {
                expectation_of_derivative_via_inversion(f, t, x, p, cfg)?
            } else {
                expectation_via_inversion(f, t, x, p, cfg)?
            };
            Ok(v)
        }
        ExpectationBackend::Density(cfg) => {
            let rep = transition_rep(t, x, p)?;
            let v = if derivative {
                expectation_via_density(|y| f.derivative(y).expect("gated above"), &rep, cfg)?
            } else {
                expectation_via_density(|y| f.evaluate(y), &rep, cfg)?
            };
            Ok(v)
        }
        ExpectationBackend::MonteCarlo(cfg) => {
            let rep = transition_rep(t, x, p)?;
            let sampler = ExactSampler::new(&rep);
            let est = mc_over_streams(cfg, |key| {
                let draw = sampler.sample(&mut key.rng());
                if derivative {
                    f.derivative(draw).expect("gated above")
                } else {
                    f.evaluate(draw)
                }
            })?;
            Ok(est.value)
        }
    }
}

/// `sum_j w_j E[f(X_t; p_j)]`, with the Monte Carlo backend evaluating the
/// whole combination per sample on one shared stream.
fn shift_combination(
    f: &TestFunction,
    derivative: bool,
    t: f64,
    x: f64,
    parts: &[(f64, AffineParams)],
    be: &ExpectationBackend,
) -> Result<(f64, Option<f64>), GreeksError> {
    if derivative && !f.derivative_available() {
        return Err(GreeksError::Unsupported("a derivative"));
    }
    match be {
        ExpectationBackend::MonteCarlo(cfg) => {
            let samplers: Vec<(f64, ExactSampler)> = parts
                .iter()
                .map(|(w, p)| Ok((*w, ExactSampler::new(&transition_rep(t, x, p)?))))
                .collect::<Result<_, DomainError>>()?;
            let est = mc_over_streams(cfg, |key| {
                samplers
                    .iter()
                    .map(|(w, sampler)| {
                        // Fresh rng per leg from the same key: identical raw
                        // draws, hence coupled samples.
                        let draw = sampler.sample(&mut key.rng());
                        let payoff = if derivative {
                            f.derivative(draw).expect("gated above")
                        } else {
                            f.evaluate(draw)
                        };
                        w * payoff
                    })
                    .sum()
            })?;
            Ok((est.value, Some(est.std_error)))
        }
        _ => {
            let mut value = 0.0;
            for (w, p) in parts {
                value += w * scalar_expectation(f, derivative, t, x, p, be)?;
            }
            Ok((value, None))
        }
    }
}

/// Derivative of `E[f(X_t)]` in the start point, as
/// `C (E[f(X^{up}_t)] - E[f(X_t)])` with the intercept raised by `alpha/2`.
pub fn delta_shift(
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    require_positive("t", t)?;
    require_positive("x", x)?;
    let factor = delta_factor(t, p);
    let up = p.shift_b(0.5 * p.alpha)?;
    let parts = [(factor, up), (-factor, *p)];
    let (value, std_error) = shift_combination(f, false, t, x, &parts, be)?;
    Ok(GreekResult {
        value,
        std_error,
        method: be.method(),
        base_params: *p,
        shifted_params: vec![up, *p],
        weights: vec![factor, -factor],
    })
}

/// `E[f'(X_t)]` without differentiating the payoff:
/// `C' (E[f(X_t)] - E[f(X^{down}_t)])` with the intercept lowered by
/// `alpha/2`. Requires `b >= alpha/2` so the shifted law stays admissible.
pub fn ibp_shift(
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    require_positive("t", t)?;
    require_positive("x", x)?;
    if p.b < 0.5 * p.alpha {
        return Err(GreeksError::FellerViolation {
            b: p.b,
            half_alpha: 0.5 * p.alpha,
        });
    }
    let factor = ibp_factor(t, p);
    let down = p.shift_b(-0.5 * p.alpha)?;
    let parts = [(factor, *p), (-factor, down)];
    let (value, std_error) = shift_combination(f, false, t, x, &parts, be)?;
    Ok(GreekResult {
        value,
        std_error,
        method: be.method(),
        base_params: *p,
        shifted_params: vec![*p, down],
        weights: vec![factor, -factor],
    })
}

/// Composition of the two representations:
/// `d/dx E[f(X_t)] = e^{beta t} E[f'(X^{up}_t)]`.
pub fn delta_combined(
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    require_positive("t", t)?;
    require_positive("x", x)?;
    let factor = (p.beta * t).exp();
    let up = p.shift_b(0.5 * p.alpha)?;
    let (value, std_error) = shift_combination(f, true, t, x, &[(factor, up)], be)?;
    Ok(GreekResult {
        value,
        std_error,
        method: be.method(),
        base_params: *p,
        shifted_params: vec![up],
        weights: vec![factor],
    })
}

/// Weights `(A, B, C)` of the drift-slope derivative on the laws with
/// intercepts `b + alpha`, `b + alpha/2` and `b`. They always sum to zero.
///
/// Derivation: with `psi(beta) = 2 beta / (2 beta - (e^{beta t}-1) alpha i
/// theta)` the characteristic function is `psi^{2b/alpha} exp(psi e^{beta t}
/// i theta x)`, and `psi' = alpha i theta J / (2 beta^2) psi^2` with
/// `J = beta t e^{beta t} - (e^{beta t} - 1)`. Eliminating every `i theta`
/// through `i theta = (2 beta / (alpha (e^{beta t}-1)))(1 - 1/psi)` sorts
/// `d/d beta` of the characteristic function into the three powers
/// `psi^{2b/alpha + j}`, `j = 0, 1, 2`, whose coefficients are returned
/// here. (Published display forms of this decomposition differ; this
/// grouping is the one that reproduces the finite-difference derivative,
/// which the verification suite checks.)
///
/// For `|beta t| < 1e-8` the evaluation switches to the `beta -> 0` limit
/// `(x/alpha, b t/alpha, -(b t + x)/alpha)`; the direct expressions lose
/// their significant digits there while the limit is exact to `O(beta t)`.
pub fn dbeta_coefficients(t: f64, x: f64, p: &AffineParams) -> [f64; 3] {
    let bt = p.beta * t;
    if bt.abs() < 1e-8 {
        let a = x / p.alpha;
        let b_mid = p.b * t / p.alpha;
        let c = -(p.b * t + x) / p.alpha;
        return [a, b_mid, c];
    }
    let growth = bt.exp();
    let em1 = bt.exp_m1();
    let hump = bt * growth - em1; // beta t e^{beta t} - (e^{beta t} - 1)
    let quad_term = 2.0 * x * growth * hump / (p.alpha * em1 * em1);
    let b_intercept = 2.0 * p.b * hump / (p.alpha * p.beta * em1);
    let b_state = 2.0 * bt * x * growth / (p.alpha * em1);
    [
        quad_term,
        b_intercept + b_state - 2.0 * quad_term,
        -b_intercept - b_state + quad_term,
    ]
}

/// Derivative of `E[f(X_t)]` in the drift slope `beta`, as the three-term
/// shift combination with weights from [`dbeta_coefficients`].
pub fn dbeta_shift(
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    require_positive("t", t)?;
    require_positive("x", x)?;
    let weights = dbeta_coefficients(t, x, p);
    let sum: f64 = weights.iter().sum();
    if sum.abs() > 1e-12 {
        return Err(GreeksError::CoefficientIdentity { sum });
    }
    let p2 = p.shift_b(p.alpha)?;
    let p1 = p.shift_b(0.5 * p.alpha)?;
    let parts = [(weights[0], p2), (weights[1], p1), (weights[2], *p)];
    let (value, std_error) = shift_combination(f, false, t, x, &parts, be)?;
    Ok(GreekResult {
        value,
        std_error,
        method: be.method(),
        base_params: *p,
        shifted_params: vec![p2, p1, *p],
        weights: weights.to_vec(),
    })
}

/// Which parameter a finite-difference oracle differentiates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdTarget {
    /// Start point `x`.
    InX,
    /// Drift slope `beta`.
    InBeta,
}

/// Richardson-extrapolated central difference: combines the `h` and `h/2`
/// central differences to cancel the `O(h^2)` term.
pub(crate) fn richardson_central<E>(
    g: impl Fn(f64) -> Result<f64, E>,
    center: f64,
    h: f64,
) -> Result<f64, E> {
    let coarse = (g(center + h)? - g(center - h)?) / (2.0 * h);
    let fine = (g(center + 0.5 * h)? - g(center - 0.5 * h)?) / h;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Finite-difference oracle for the shift representations: differentiates
/// the backend expectation itself in `x` or in `beta`.
pub fn fd_oracle(
    target: FdTarget,
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    be: &ExpectationBackend,
    h: f64,
) -> Result<f64, GreeksError> {
    require_positive("t", t)?;
    require_positive("h", h)?;
    match target {
        FdTarget::InX => {
            if x - h <= 0.0 {
                return Err(DomainError::new("x - h", "positive", x - h).into());
            }
            richardson_central(|xx| scalar_expectation(f, false, t, xx, p, be), x, h)
        }
        FdTarget::InBeta => richardson_central(
            |bb| {
                let shifted = validate_params(p.alpha, bb, p.b)?;
                scalar_expectation(f, false, t, x, &shifted, be)
            },
            p.beta,
            h,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, beta: f64, b: f64) -> AffineParams {
        validate_params(alpha, beta, b).unwrap()
    }

    fn inversion() -> ExpectationBackend {
        ExpectationBackend::Inversion(QuadratureConfig::tight())
    }

    fn density() -> ExpectationBackend {
        ExpectationBackend::Density(QuadratureConfig::tight())
    }

    fn gaussian() -> TestFunction {
        TestFunction::gaussian(0.0, 1.0).unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-10)
    }

    #[test]
    fn delta_factor_values() {
        // beta = 0: 2/(alpha t).
        assert_eq!(delta_factor(1.0, &params(2.0, 0.0, 1.0)), 1.0);
        // Continuity through beta = 0.
        let nearly = delta_factor(1.0, &params(2.0, 1e-9, 1.0));
        assert!(rel_err(nearly, 1.0) < 1e-7);
        // Hand value at beta = 1: 2 e/(2 (e-1)).
        let e = std::f64::consts::E;
        let f = delta_factor(1.0, &params(2.0, 1.0, 1.0));
        assert!((f - e / (e - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn ibp_factor_values() {
        assert_eq!(ibp_factor(1.0, &params(2.0, 0.0, 1.0)), 1.0);
        let e = std::f64::consts::E;
        let f = ibp_factor(1.0, &params(2.0, 1.0, 1.0));
        assert!((f - 1.0 / (e - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn delta_matches_fd_oracle() {
        let p = params(1.0, 0.3, 0.5);
        let f = gaussian();
        for be in [inversion(), density()] {
            let shift = delta_shift(&f, 1.0, 1.0, &p, &be).unwrap();
            let fd = fd_oracle(FdTarget::InX, &f, 1.0, 1.0, &p, &be, 1e-4).unwrap();
            assert!(
                rel_err(shift.value, fd) < 1e-6,
                "{:?}: shift {} vs fd {fd}",
                be.method(),
                shift.value
            );
            assert!(shift.std_error.is_none());
            assert_eq!(shift.weights.len(), shift.shifted_params.len());
        }
    }

    #[test]
    fn ibp_matches_direct_derivative_expectation() {
        let p = params(1.0, -0.5, 1.0);
        let f = gaussian();
        let cfg = QuadratureConfig::tight();
        let direct = expectation_of_derivative_via_inversion(&f, 1.0, 1.0, &p, &cfg).unwrap();
        for be in [inversion(), density()] {
            let shift = ibp_shift(&f, 1.0, 1.0, &p, &be).unwrap();
            assert!(
                rel_err(shift.value, direct) < 1e-6,
                "{:?}: {} vs {direct}",
                be.method(),
                shift.value
            );
        }
    }

    #[test]
    fn ibp_at_feller_boundary_is_legal() {
        // b = alpha/2 exactly: the shifted intercept is 0, still admissible.
        let p = params(1.0, 0.2, 0.5);
        let f = gaussian();
        let direct = expectation_of_derivative_via_inversion(
            &f,
            1.0,
            1.0,
            &p,
            &QuadratureConfig::tight(),
        )
        .unwrap();
        let shift = ibp_shift(&f, 1.0, 1.0, &p, &inversion()).unwrap();
        assert!(rel_err(shift.value, direct) < 1e-6);
        assert_eq!(shift.shifted_params[1].b, 0.0);
    }

    #[test]
    fn ibp_rejects_subcritical_intercept() {
        let p = params(1.0, 0.0, 0.49);
        let out = ibp_shift(&gaussian(), 1.0, 1.0, &p, &inversion());
        assert!(matches!(out, Err(GreeksError::FellerViolation { .. })));
    }

    #[test]
    fn combined_equals_delta() {
        let p = params(1.0, 0.3, 0.5);
        let f = gaussian();
        let a = delta_shift(&f, 1.0, 1.0, &p, &inversion()).unwrap();
        let b = delta_combined(&f, 1.0, 1.0, &p, &inversion()).unwrap();
        assert!((a.value - b.value).abs() < 1e-8, "{} vs {}", a.value, b.value);

        // beta = 0: the prefactor degenerates to 1.
        let p0 = params(1.0, 0.0, 0.5);
        let c = delta_combined(&f, 1.0, 1.0, &p0, &inversion()).unwrap();
        assert_eq!(c.weights, vec![1.0]);
    }

    #[test]
    fn dbeta_weights_sum_to_zero() {
        let grids = [
            (1.5, 2.0, params(1.0, 0.7, 0.3)),
            (0.25, 0.5, params(4.0, -1.0, 2.0)),
            (1.0, 1.0, params(0.5, 1e-10, 0.5)),
            (2.0, 0.5, params(1.0, 0.0, 0.0)),
        ];
        for (t, x, p) in grids {
            let w = dbeta_coefficients(t, x, &p);
            let sum: f64 = w.iter().sum();
            assert!(sum.abs() <= 1e-12, "sum {sum} at {p:?}");
        }
    }

    #[test]
    fn dbeta_limit_matches_direct_formula_continuously() {
        let p0 = params(1.0, 0.0, 0.8);
        let limit = dbeta_coefficients(1.0, 1.3, &p0);
        for &eps in &[1e-6, -1e-6] {
            let p = params(1.0, eps, 0.8);
            let w = dbeta_coefficients(1.0, 1.3, &p);
            for j in 0..3 {
                assert!(
                    rel_err(w[j], limit[j]) < 1e-4,
                    "coefficient {j}: {} vs {}",
                    w[j],
                    limit[j]
                );
            }
        }
    }

    #[test]
    fn dbeta_weights_reproduce_cf_derivative() {
        // The three-term combination must equal d/d beta of the
        // characteristic function pointwise in theta; a central difference
        // of char_fn is a fully independent oracle for that.
        use crate::affine::char_fn;
        use num_complex::Complex64;
        let cases = [
            (1.0, 1.0, params(1.0, 0.4, 0.5)),
            (0.5, 0.7, params(2.0, -0.8, 1.0)),
            (0.9, 1.4, params(1.3, 0.6, 0.0)),
        ];
        let h = 1e-6;
        for (t, x, p) in cases {
            let w = dbeta_coefficients(t, x, &p);
            let p2 = p.shift_b(p.alpha).unwrap();
            let p1 = p.shift_b(0.5 * p.alpha).unwrap();
            for &theta in &[0.4, 1.7, -2.3] {
                let fd: Complex64 = (char_fn(t, theta, x, &params(p.alpha, p.beta + h, p.b))
                    - char_fn(t, theta, x, &params(p.alpha, p.beta - h, p.b)))
                    / (2.0 * h);
                let combo = w[0] * char_fn(t, theta, x, &p2)
                    + w[1] * char_fn(t, theta, x, &p1)
                    + w[2] * char_fn(t, theta, x, &p);
                assert!(
                    (combo - fd).norm() < 5e-9,
                    "{p:?} theta={theta}: combo {combo} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn dbeta_matches_fd_in_beta() {
        let p = params(1.0, 0.4, 0.5);
        let f = gaussian();
        for be in [inversion(), density()] {
            let shift = dbeta_shift(&f, 1.0, 1.0, &p, &be).unwrap();
            let fd = fd_oracle(FdTarget::InBeta, &f, 1.0, 1.0, &p, &be, 1e-4).unwrap();
            assert!(
                rel_err(shift.value, fd) < 1e-5,
                "{:?}: {} vs {fd}",
                be.method(),
                shift.value
            );
        }
    }

    #[test]
    fn richardson_is_exact_on_affine_functions() {
        let d =
            richardson_central(|v| Ok::<_, GreeksError>(3.0 * v + 2.0), 1.0, 1e-3).unwrap();
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fd_oracle_guards_the_state_domain() {
        let p = params(1.0, 0.0, 1.0);
        let out = fd_oracle(FdTarget::InX, &gaussian(), 1.0, 1e-5, &p, &inversion(), 1e-4);
        assert!(out.is_err());
    }

    #[test]
    fn mc_backend_agrees_within_stderr() {
        let p = params(1.0, 0.3, 0.5);
        let f = gaussian();
        let quad_value = delta_shift(&f, 1.0, 1.0, &p, &inversion()).unwrap().value;
        let mc = delta_shift(
            &f,
            1.0,
            1.0,
            &p,
            &ExpectationBackend::MonteCarlo(MCConfig::new(400_000, 2024)),
        )
        .unwrap();
        let se = mc.std_error.unwrap();
        assert!(se > 0.0);
        assert!(
            (mc.value - quad_value).abs() < 3.0 * se,
            "mc {} vs quad {quad_value} (se {se})",
            mc.value
        );
    }

    #[test]
    fn greek_result_serializes_with_provenance() {
        let p = params(1.0, 0.0, 1.0);
        let g = delta_shift(&gaussian(), 1.0, 1.0, &p, &inversion()).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("shifted_params"));
        assert!(json.contains("weights"));
    }
}
