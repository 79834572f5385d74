//! Exact transition law of the affine diffusion as a scaled noncentral
//! chi-square.
//!
//! Matching the closed-form characteristic function to the noncentral
//! chi-square transform identifies the law of `X_t` started at `x` as
//! `c * Q` with `Q ~ chi^2(k, lambda)`, where
//! `c = alpha (e^{beta t} - 1) / (4 beta)`, `k = 4 b / alpha` and
//! `lambda = 4 beta e^{beta t} x / (alpha (e^{beta t} - 1))` (with the
//! `beta -> 0` limits `alpha t / 4` and `4 x / (alpha t)`). When `b = 0`
//! the degrees of freedom vanish and the law carries an atom of mass
//! `exp(-lambda/2)` at zero.
//!
//! The density is evaluated as a Poisson-weighted Gamma mixture, which is
//! well defined for non-integer and zero degrees of freedom; this module is
//! the quadrature oracle the Fourier and Monte Carlo routes are checked
//! against.

use crate::affine::{growth_time, AffineParams, DomainError};
use crate::quad;
use crate::transforms::QuadratureConfig;
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Errors from density evaluation and quadrature against it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("density quadrature did not converge: error estimate {achieved:.3e} exceeds tolerance {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },
}

/// Transition law `c * chi^2(k, lambda)`, plus the atom at zero present when
/// `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoncentralChiSquareRep {
    /// Scale factor `c > 0`.
    pub scale_c: f64,
    /// Degrees of freedom `k >= 0` (not necessarily an integer).
    pub dof_k: f64,
    /// Noncentrality `lambda >= 0`.
    pub noncentrality_lambda: f64,
    /// Probability of the exact value 0; `exp(-lambda/2)` when `k = 0`,
    /// otherwise 0.
    pub zero_mass: f64,
}

impl NoncentralChiSquareRep {
    /// Characteristic function of the law, straight from the noncentral
    /// chi-square transform with scale folded in:
    /// `exp(i lambda c theta / (1 - 2 i c theta)) / (1 - 2 i c theta)^{k/2}`.
    pub fn transform(&self, theta: f64) -> Complex64 {
        let denom = Complex64::new(1.0, -2.0 * self.scale_c * theta);
        let arg = Complex64::new(0.0, self.noncentrality_lambda * self.scale_c * theta) / denom;
        (arg - 0.5 * self.dof_k * denom.ln()).exp()
    }

    /// `E[X] = c (k + lambda)`.
    pub fn mean(&self) -> f64 {
        self.scale_c * (self.dof_k + self.noncentrality_lambda)
    }

    /// `Var[X] = 2 c^2 (k + 2 lambda)`.
    pub fn variance(&self) -> f64 {
        2.0 * self.scale_c * self.scale_c * (self.dof_k + 2.0 * self.noncentrality_lambda)
    }

    /// Fourth central moment, `c^4 (12 (k + 2 lambda)^2 + 48 (k + 4 lambda))`.
    pub fn fourth_central_moment(&self) -> f64 {
        let (k, l) = (self.dof_k, self.noncentrality_lambda);
        self.scale_c.powi(4) * (12.0 * (k + 2.0 * l).powi(2) + 48.0 * (k + 4.0 * l))
    }

    /// Upper tail cutoff `q` with `P(X > q) <= eps`, from the Chernoff bound
    /// `P(Q > q) <= exp(-s q + lambda s/(1-2s) - (k/2) ln(1-2s))` at `s = 3/8`.
    pub fn upper_quantile_bound(&self, eps: f64) -> f64 {
        let budget = -eps.max(f64::MIN_POSITIVE).ln();
        let q = (8.0 / 3.0)
            * (budget + 1.5 * self.noncentrality_lambda + 0.5 * self.dof_k * 4.0_f64.ln());
        self.scale_c * q
    }
}

/// Identifies the transition law of `X_t` started at `x`.
pub fn transition_rep(
    t: f64,
    x: f64,
    p: &AffineParams,
) -> Result<NoncentralChiSquareRep, DomainError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(DomainError::new("t", "positive and finite", t));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(DomainError::new("x", "nonnegative and finite", x));
    }
    let growth = (p.beta * t).exp();
    let m = growth_time(t, p.beta); // (e^{beta t} - 1)/beta, > 0
    let scale_c = 0.25 * p.alpha * m;
    let dof_k = 4.0 * p.b / p.alpha;
    let noncentrality_lambda = growth * x / scale_c;
    let zero_mass = if dof_k == 0.0 {
        (-0.5 * noncentrality_lambda).exp()
    } else {
        0.0
    };
    Ok(NoncentralChiSquareRep {
        scale_c,
        dof_k,
        noncentrality_lambda,
        zero_mass,
    })
}

/// Density of the absolutely continuous part at `y` (zero for `y <= 0`).
///
/// Poisson-Gamma mixture `sum_n Pois(lambda/2)(n) Gamma(k/2 + n, 2c)(y)`,
/// summed bidirectionally from the largest term with relative cutoff
/// `1e-17`, so truncation error stays below the rounding floor.
pub fn transition_density(y: f64, rep: &NoncentralChiSquareRep) -> f64 {
    let c2 = 2.0 * rep.scale_c;
    let half_k = 0.5 * rep.dof_k;
    let half_l = 0.5 * rep.noncentrality_lambda;
    if y <= 0.0 || !y.is_finite() {
        return 0.0;
    }

    if half_l == 0.0 {
        if half_k == 0.0 {
            return 0.0; // the law is the pure atom at zero
        }
        let log_pdf = (half_k - 1.0) * y.ln() - y / c2 - ln_gamma(half_k) - half_k * c2.ln();
        return log_pdf.exp();
    }

    // n = 0 contributes a Gamma(k/2, 2c) component only when k > 0; for
    // k = 0 that slot is the atom, so the mixture starts at n = 1.
    let n_min: u64 = if half_k == 0.0 { 1 } else { 0 };

    // Term ratio t_{n+1}/t_n = (lambda/2) y / (2c (n+1)(k/2+n)) decreases in
    // n, so terms are unimodal with the peak near the positive root of
    // (n+1)(n+k/2) = (lambda/2) y/(2c).
    let q = half_l * y / c2;
    let n0 = (q.sqrt() as u64).max(n_min);

    let log_term = |n: u64| -> f64 {
        let shape = half_k + n as f64;
        -half_l + n as f64 * half_l.ln() - ln_gamma(n as f64 + 1.0)
            + (shape - 1.0) * y.ln()
            - y / c2
            - ln_gamma(shape)
            - shape * c2.ln()
    };

    let peak = log_term(n0).exp();
    if peak == 0.0 {
        // Whole mixture is below the representable floor at this y.
        return 0.0;
    }
    let mut total = peak;

    let ratio = |n: u64| half_l * y / (c2 * (n as f64 + 1.0) * (half_k + n as f64));
    let mut term = peak;
    let mut n = n0;
    loop {
        term *= ratio(n);
        n += 1;
        total += term;
        if term <= total * 1e-17 {
            break;
        }
    }
    term = peak;
    n = n0;
    while n > n_min {
        n -= 1;
        term /= ratio(n);
        total += term;
        if term <= total * 1e-17 {
            break;
        }
    }
    total
}

/// `E[f(X_t)] = zero_mass * f(0) + integral of f * density`, integrating up
/// to the certified `1 - 1e-13` tail bound.
pub fn expectation_via_density<F: Fn(f64) -> f64>(
    f: F,
    rep: &NoncentralChiSquareRep,
    cfg: &QuadratureConfig,
) -> Result<f64, DensityError> {
    let atom = rep.zero_mass * f(0.0);
    if rep.dof_k == 0.0 && rep.noncentrality_lambda == 0.0 {
        return Ok(atom); // degenerate law at zero
    }
    let cutoff = rep.upper_quantile_bound(1e-13);
    let (integral, _err) = quad::integrate_real(
        |y| f(y) * transition_density(y, rep),
        0.0,
        cutoff,
        cfg.abs_tol,
        cfg.rel_tol,
        cfg.max_intervals,
    )
    .map_err(|e| DensityError::Quadrature {
        achieved: e.achieved,
        requested: e.requested,
    })?;
    Ok(atom + integral)
}
