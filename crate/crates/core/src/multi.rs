//! Product-form multi-dimensional extension.
//!
//! The d-dimensional SDE considered here is diagonal: coordinate `i` is a
//! one-dimensional affine diffusion with its own triple `(alpha_i, beta_i,
//! b_i)`, driven by an independent Brownian motion. Coordinates are
//! therefore independent, and for tensor-product payoffs every expectation
//! factorizes exactly into one-dimensional ones.
//!
//! The shift representations act coordinate-wise: the sensitivity in `x_k`
//! shifts only `b_k`, with the same per-coordinate factors as in the
//! one-dimensional representations. (The independence structure leaves no
//! room for a different factor: conditioning on the other coordinates
//! reduces each statement to the one-dimensional one, and the
//! finite-difference oracle in the verification suite pins this down
//! numerically.)

use crate::affine::{AffineParams, DomainError};
use crate::density::transition_rep;
use crate::greeks::{
    delta_factor, ibp_factor, richardson_central, scalar_expectation, ExpectationBackend,
    GreekResult, GreeksError,
};
use crate::simulate::{mc_over_streams, ExactSampler};
use crate::transforms::TestFunction;

/// Per-coordinate parameter triples of the diagonal multi-dimensional SDE.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MultiParams {
    pub coords: Vec<AffineParams>,
}

impl MultiParams {
    pub fn new(coords: Vec<AffineParams>) -> Result<Self, DomainError> {
        if coords.is_empty() {
            return Err(DomainError::new("coords", "at least one coordinate", 0.0));
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn with_shift(&self, k: usize, delta: f64) -> Result<Self, DomainError> {
        let mut coords = self.coords.clone();
        coords[k] = coords[k].shift_b(delta)?;
        Ok(Self { coords })
    }
}

/// Tensor product of one-dimensional test functions:
/// `f(y) = prod_i f_i(y_i)`.
#[derive(Debug, Clone)]
pub struct TensorTestFunction {
    pub factors: Vec<TestFunction>,
}

impl TensorTestFunction {
    pub fn new(factors: Vec<TestFunction>) -> Result<Self, GreeksError> {
        if factors.is_empty() {
            return Err(GreeksError::Dimension {
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { factors })
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.factors.len());
        self.factors
            .iter()
            .zip(y)
            .map(|(f, &yi)| f.evaluate(yi))
            .product()
    }

    /// Partial derivative in coordinate `k`:
    /// `f_k'(y_k) prod_{i != k} f_i(y_i)`.
    pub fn partial(&self, k: usize, y: &[f64]) -> Result<f64, GreeksError> {
        debug_assert_eq!(y.len(), self.factors.len());
        let mut out = self.factors[k].derivative(y[k])?;
        for (i, (f, &yi)) in self.factors.iter().zip(y).enumerate() {
            if i != k {
                out *= f.evaluate(yi);
            }
        }
        Ok(out)
    }
}

fn check_inputs(
    k: usize,
    f: &TensorTestFunction,
    t: f64,
    x: &[f64],
    mp: &MultiParams,
) -> Result<(), GreeksError> {
    if f.dim() != mp.dim() {
        return Err(GreeksError::Dimension {
            expected: mp.dim(),
            got: f.dim(),
        });
    }
    if x.len() != mp.dim() {
        return Err(GreeksError::Dimension {
            expected: mp.dim(),
            got: x.len(),
        });
    }
    if k >= mp.dim() {
        return Err(GreeksError::Dimension {
            expected: mp.dim(),
            got: k,
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(DomainError::new("t", "positive and finite", t).into());
    }
    for &xi in x {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(DomainError::new("x_i", "positive and finite", xi).into());
        }
    }
    Ok(())
}

/// `E[f(X_t)]` under a quadrature backend; independence factorizes it into
/// per-coordinate one-dimensional expectations (with the derivative factor
/// replacing `f_k` when requested via `derivative_coord`).
pub fn tensor_expectation(
    f: &TensorTestFunction,
    derivative_coord: Option<usize>,
    t: f64,
    x: &[f64],
    mp: &MultiParams,
    be: &ExpectationBackend,
) -> Result<f64, GreeksError> {
    let mut out = 1.0;
    for (i, (fi, p)) in f.factors.iter().zip(&mp.coords).enumerate() {
        out *= scalar_expectation(fi, derivative_coord == Some(i), t, x[i], p, be)?;
    }
    Ok(out)
}

/// Monte Carlo value of `sum_j w_j E[g_j(X_t; mp_j)]` with all parameter
/// sets coupled on common random numbers.
fn mc_combination(
    payoffs: &[(f64, &MultiParams, Option<usize>)],
    f: &TensorTestFunction,
    t: f64,
    x: &[f64],
    cfg: &crate::simulate::MCConfig,
) -> Result<(f64, Option<f64>), GreeksError> {
    let mut legs = Vec::with_capacity(payoffs.len());
    for (w, mp, deriv) in payoffs {
        let samplers: Vec<ExactSampler> = mp
            .coords
            .iter()
            .zip(x)
            .map(|(p, &xi)| Ok(ExactSampler::new(&transition_rep(t, xi, p)?)))
            .collect::<Result<_, DomainError>>()?;
        legs.push((*w, samplers, *deriv));
    }
    let dim = x.len();
    let est = mc_over_streams(cfg, |key| {
        let mut draw = vec![0.0; dim];
        legs.iter()
            .map(|(w, samplers, deriv)| {
                let mut rng = key.rng();
                for (slot, sampler) in draw.iter_mut().zip(samplers) {
                    *slot = sampler.sample(&mut rng);
                }
                let payoff = match deriv {
                    Some(k) => f.partial(*k, &draw).expect("gated by caller"),
                    None => f.evaluate(&draw),
                };
                w * payoff
            })
            .sum()
    })?;
    Ok((est.value, Some(est.std_error)))
}

/// Derivative of `E[f(X_t)]` in the start coordinate `x_k`: the
/// one-dimensional shift representation applied to coordinate `k`, all other
/// coordinates untouched.
pub fn multi_delta(
    k: usize,
    f: &TensorTestFunction,
    t: f64,
    x: &[f64],
    mp: &MultiParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    check_inputs(k, f, t, x, mp)?;
    let base = mp.coords[k];
    let factor = delta_factor(t, &base);
    let up = mp.with_shift(k, 0.5 * base.alpha)?;
    let (value, std_error) = match be {
        ExpectationBackend::MonteCarlo(cfg) => mc_combination(
            &[(factor, &up, None), (-factor, mp, None)],
            f,
            t,
            x,
            cfg,
        )?,
        _ => {
            let e_up = tensor_expectation(f, None, t, x, &up, be)?;
            let e_base = tensor_expectation(f, None, t, x, mp, be)?;
            (factor * (e_up - e_base), None)
        }
    };
    Ok(GreekResult {
        value,
        std_error,
        method: be.method(),
        base_params: base,
        shifted_params: vec![up.coords[k], base],
        weights: vec![factor, -factor],
    })
}

/// `E[(d/dy_k f)(X_t)]` via the coordinate-`k` downshift; requires
/// `b_k >= alpha_k / 2`.
pub fn multi_ibp(
    k: usize,
    f: &TensorTestFunction,
    t: f64,
    x: &[f64],
    mp: &MultiParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    check_inputs(k, f, t, x, mp)?;
    if !f.factors[k].derivative_available() {
        return Err(GreeksError::Unsupported(
            "a derivative in the differentiated coordinate",
        ));
    }
    let base = mp.coords[k];
    if base.b < 0.5 * base.alpha {
        return Err(GreeksError::FellerViolation {
            b: base.b,
            half_alpha: 0.5 * base.alpha,
        });
    }
    let factor = ibp_factor(t, &base);
    let down = mp.with_shift(k, -0.5 * base.alpha)?;
    let (value, std_error) = match be {
        ExpectationBackend::MonteCarlo(cfg) => mc_combination(
            &[(factor, mp, None), (-factor, &down, None)],
            f,
            t,
            x,
            cfg,
        )?,
        _ => {
            let e_base = tensor_expectation(f, None, t, x, mp, be)?;
            let e_down = tensor_expectation(f, None, t, x, &down, be)?;
            (factor * (e_base - e_down), None)
        }
    };
    Ok(GreekResult {
        value,
        std_error,
        method: be.method(),
        base_params: base,
        shifted_params: vec![base, down.coords[k]],
        weights: vec![factor, -factor],
    })
}

/// Composition form in coordinate `k`:
/// `d/dx_k E[f(X_t)] = e^{beta_k t} E[(d/dy_k f)(X^{up}_t)]`.
pub fn multi_combined(
    k: usize,
    f: &TensorTestFunction,
    t: f64,
    x: &[f64],
    mp: &MultiParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    check_inputs(k, f, t, x, mp)?;
    if !f.factors[k].derivative_available() {
        return Err(GreeksError::Unsupported(
            "a derivative in the differentiated coordinate",
        ));
    }
    let base = mp.coords[k];
    let factor = (base.beta * t).exp();
    let up = mp.with_shift(k, 0.5 * base.alpha)?;
    let (value, std_error) = match be {
        ExpectationBackend::MonteCarlo(cfg) => {
            mc_combination(&[(factor, &up, Some(k))], f, t, x, cfg)?
        }
        _ => {
            let e = tensor_expectation(f, Some(k), t, x, &up, be)?;
            (factor * e, None)
        }
    };
    Ok(GreekResult {
        value,
        std_error,
        method: be.method(),
        base_params: base,
        shifted_params: vec![up.coords[k]],
        weights: vec![factor],
    })
}

/// Finite-difference oracle in the start coordinate `x_k` for the
/// multi-dimensional representations.
pub fn multi_fd_in_x(
    k: usize,
    f: &TensorTestFunction,
    t: f64,
    x: &[f64],
    mp: &MultiParams,
    be: &ExpectationBackend,
    h: f64,
) -> Result<f64, GreeksError> {
    check_inputs(k, f, t, x, mp)?;
    if x[k] - h <= 0.0 {
        return Err(DomainError::new("x_k - h", "positive", x[k] - h).into());
    }
    richardson_central(
        |xk| {
            let mut shifted = x.to_vec();
            shifted[k] = xk;
            tensor_expectation(f, None, t, &shifted, mp, be)
        },
        x[k],
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::validate_params;
    use crate::greeks::{delta_shift, ibp_shift};
    use crate::transforms::QuadratureConfig;

    fn backend() -> ExpectationBackend {
        ExpectationBackend::Inversion(QuadratureConfig::tight())
    }

    fn three_dim() -> (MultiParams, TensorTestFunction, Vec<f64>) {
        let mp = MultiParams::new(vec![
            validate_params(1.0, -1.0, 1.0).unwrap(),
            validate_params(0.5, 0.0, 0.7).unwrap(),
            validate_params(2.0, 0.4, 1.5).unwrap(),
        ])
        .unwrap();
        let f = TensorTestFunction::new(vec![
            TestFunction::gaussian(0.5, 1.0).unwrap(),
            TestFunction::gaussian(1.0, 0.8).unwrap(),
            TestFunction::hermite_gaussian(1, 0.0, 1.2).unwrap(),
        ])
        .unwrap();
        (mp, f, vec![0.8, 1.2, 0.6])
    }

    #[test]
    fn one_dimensional_case_collapses_to_scalar_estimators() {
        let p = validate_params(1.0, 0.3, 0.8).unwrap();
        let mp = MultiParams::new(vec![p]).unwrap();
        let f1 = TestFunction::gaussian(0.0, 1.0).unwrap();
        let f = TensorTestFunction::new(vec![f1.clone()]).unwrap();
        let be = backend();

        let md = multi_delta(0, &f, 1.0, &[1.0], &mp, &be).unwrap();
        let sd = delta_shift(&f1, 1.0, 1.0, &p, &be).unwrap();
        assert!((md.value - sd.value).abs() < 1e-12);

        let mi = multi_ibp(0, &f, 1.0, &[1.0], &mp, &be).unwrap();
        let si = ibp_shift(&f1, 1.0, 1.0, &p, &be).unwrap();
        assert!((mi.value - si.value).abs() < 1e-12);
    }

    #[test]
    fn tensor_factorization_identity() {
        // The coordinate-k delta of a tensor payoff equals the 1-d delta of
        // factor k times the other coordinates' plain expectations.
        let (mp, f, x) = three_dim();
        let be = backend();
        let k = 2;
        let md = multi_delta(k, &f, 0.75, &x, &mp, &be).unwrap();

        let sd = delta_shift(&f.factors[k], 0.75, x[k], &mp.coords[k], &be).unwrap();
        let mut others = 1.0;
        for (i, (fi, pi)) in f.factors.iter().zip(&mp.coords).enumerate() {
            if i != k {
                others *=
                    crate::greeks::scalar_expectation(fi, false, 0.75, x[i], pi, &be).unwrap();
            }
        }
        assert!(
            (md.value - sd.value * others).abs() < 1e-8,
            "{} vs {}",
            md.value,
            sd.value * others
        );
    }

    #[test]
    fn delta_and_combined_match_fd() {
        let (mp, f, x) = three_dim();
        let be = backend();
        for k in 0..3 {
            let fd = multi_fd_in_x(k, &f, 0.75, &x, &mp, &be, 1e-4).unwrap();
            let md = multi_delta(k, &f, 0.75, &x, &mp, &be).unwrap();
            let mc = multi_combined(k, &f, 0.75, &x, &mp, &be).unwrap();
            assert!(
                (md.value - fd).abs() / fd.abs().max(1e-10) < 1e-6,
                "k={k}: delta {} vs fd {fd}",
                md.value
            );
            assert!(
                (mc.value - md.value).abs() < 1e-8,
                "k={k}: combined {} vs delta {}",
                mc.value,
                md.value
            );
        }
    }

    #[test]
    fn ibp_gate_and_dimension_checks() {
        let (mp, f, x) = three_dim();
        let be = backend();
        // Coordinate 2 has b = 1.5 >= alpha/2 = 1; shrink b to violate.
        let mut bad = mp.clone();
        bad.coords[2].b = 0.4;
        assert!(matches!(
            multi_ibp(2, &f, 0.75, &x, &bad, &be),
            Err(GreeksError::FellerViolation { .. })
        ));
        assert!(multi_delta(3, &f, 0.75, &x, &mp, &be).is_err());
        assert!(multi_delta(0, &f, 0.75, &x[..2], &mp, &be).is_err());
        assert!(multi_delta(0, &f, 0.75, &[0.8, -1.0, 0.6], &mp, &be).is_err());
    }

    #[test]
    fn mc_backend_couples_all_legs() {
        let (mp, f, x) = three_dim();
        let quad = multi_delta(1, &f, 0.75, &x, &mp, &backend()).unwrap();
        let mc = multi_delta(
            1,
            &f,
            0.75,
            &x,
            &mp,
            &ExpectationBackend::MonteCarlo(crate::simulate::MCConfig::new(200_000, 7)),
        )
        .unwrap();
        let se = mc.std_error.unwrap();
        assert!(
            (mc.value - quad.value).abs() < 3.0 * se,
            "mc {} vs quad {} (se {se})",
            mc.value,
            quad.value
        );
    }
}
