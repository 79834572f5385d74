//! Domain adapters: the CIR short-rate parameterization and a
//! population-evolution model obtained as the diffusion scaling limit of
//! discrete Galton-Watson branching processes.
//!
//! A CIR process `dr = k (theta - r) dt + sigma sqrt(r) dW` is the affine
//! diffusion with `(alpha, beta, b) = (sigma^2, -k, k theta)`; the shift
//! `b -> b + alpha/2` is the long-run-mean shift
//! `theta -> theta + sigma^2/(2k)`, and the downshift needs the Feller
//! condition `2 k theta >= sigma^2`.
//!
//! The population model runs `X_{n+1} = sum of X_n offspring draws`, started
//! from `[N x0]` individuals, and studies `X_{[N t]} / N` for large `N`;
//! with offspring mean `1 + gamma/N` and variance `sigma_N^2 -> sigma^2`
//! the rescaled process converges to the affine diffusion
//! `(sigma^2, gamma, 0)`, whose `gamma`-sensitivity is the drift-slope
//! shift representation.

use crate::affine::{validate_params, AffineParams, DomainError};
use crate::greeks::{
    dbeta_shift, delta_combined, delta_shift, ibp_shift, ExpectationBackend, GreekResult,
    GreeksError,
};
use crate::transforms::TestFunction;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelsError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Greeks(#[from] GreeksError),
    #[error("invalid offspring distribution: {0}")]
    Offspring(String),
    #[error("unrecognized offspring spec `{0}` (expected geom:p, poisson:m or binary:p2)")]
    ParseError(String),
    #[error("offspring draw budget exceeded: {used} draws over cap {cap}")]
    Resource { used: u64, cap: u64 },
}

/// CIR short-rate parameters `(sigma, k, theta)` plus the start rate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CirParams {
    /// Volatility `sigma > 0`.
    pub sigma: f64,
    /// Mean-reversion speed `k > 0`.
    pub k: f64,
    /// Long-run mean `theta > 0`.
    pub theta: f64,
    /// Initial rate `r0 > 0`.
    pub r0: f64,
}

impl CirParams {
    pub fn new(sigma: f64, k: f64, theta: f64, r0: f64) -> Result<Self, DomainError> {
        for (name, v) in [("sigma", sigma), ("k", k), ("theta", theta), ("r0", r0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DomainError::new(name, "positive and finite", v));
            }
        }
        Ok(Self { sigma, k, theta, r0 })
    }

    /// Feller condition `2 k theta >= sigma^2`: the rate never reaches 0,
    /// and the integration-by-parts downshift stays admissible.
    pub fn feller_satisfied(&self) -> bool {
        2.0 * self.k * self.theta >= self.sigma * self.sigma
    }
}

/// Coefficient matching `dr = k(theta - r)dt + sigma sqrt(r) dW` onto the
/// affine triple: `(sigma^2, -k, k theta)`.
pub fn cir_to_affine(c: &CirParams) -> AffineParams {
    validate_params(c.sigma * c.sigma, -c.k, c.k * c.theta)
        .expect("positive CIR parameters always map into the affine domain")
}

/// Inverse mapping, defined when `beta < 0` and `b > 0`.
pub fn affine_to_cir(p: &AffineParams, r0: f64) -> Option<CirParams> {
    if p.beta >= 0.0 || p.b <= 0.0 {
        return None;
    }
    let k = -p.beta;
    CirParams::new(p.alpha.sqrt(), k, p.b / k, r0).ok()
}

/// CIR delta (sensitivity of `E[f(r_t)]` to the start rate); delegates to
/// the affine shift representation, whose factor equals
/// `-2 k e^{-k t} / (sigma^2 (e^{-k t} - 1))`.
pub fn cir_delta(
    f: &TestFunction,
    t: f64,
    c: &CirParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    delta_shift(f, t, c.r0, &cir_to_affine(c), be)
}

/// CIR integration by parts, `E[f'(r_t)]`; the shifted model has long-run
/// mean `theta - sigma^2/(2k)` and the Feller condition is required.
pub fn cir_ibp(
    f: &TestFunction,
    t: f64,
    c: &CirParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    ibp_shift(f, t, c.r0, &cir_to_affine(c), be)
}

/// CIR combined form `e^{-k t} E[f'(r^{up}_t)]`.
pub fn cir_combined(
    f: &TestFunction,
    t: f64,
    c: &CirParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    delta_combined(f, t, c.r0, &cir_to_affine(c), be)
}

/// Parameters of the limiting population diffusion
/// `dZ = gamma Z dt + sigma sqrt(Z) dB`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PopulationParams {
    /// Limit drift `gamma` (any finite real).
    pub gamma: f64,
    /// Limit variance `sigma^2 > 0`.
    pub sigma2: f64,
    /// Initial mass `x0 > 0`.
    pub x0: f64,
}

impl PopulationParams {
    pub fn new(gamma: f64, sigma2: f64, x0: f64) -> Result<Self, DomainError> {
        if !gamma.is_finite() {
            return Err(DomainError::new("gamma", "finite", gamma));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(DomainError::new("sigma2", "positive and finite", sigma2));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(DomainError::new("x0", "positive and finite", x0));
        }
        Ok(Self { gamma, sigma2, x0 })
    }
}

/// Sensitivity of `E[f(Z_t)]` in the limit drift `gamma`: the drift-slope
/// shift representation for the affine triple `(sigma^2, gamma, 0)`. The
/// shifted laws have intercepts `i sigma^2 / 2`, `i = 1, 2`, and at
/// `gamma = 0` the weights reduce to `(1, 0, -1) x / sigma^2`, i.e. the
/// derivative is `(x/sigma^2)(E[f(Z^{2,x}_t)] - E[f(Z^x_t)])` there.
pub fn population_gamma_sensitivity(
    f: &TestFunction,
    t: f64,
    pp: &PopulationParams,
    be: &ExpectationBackend,
) -> Result<GreekResult, GreeksError> {
    let base = validate_params(pp.sigma2, pp.gamma, 0.0)?;
    dbeta_shift(f, t, pp.x0, &base, be)
}

/// Offspring law of one individual; nonnegative integer support with
/// closed-form mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum OffspringDist {
    /// `P(j) = (1-p)^j p` on `{0, 1, 2, ...}`.
    Geometric { p: f64 },
    /// Poisson with the given mean.
    Poisson { mean: f64 },
    /// Two offspring with probability `p_two`, otherwise none.
    Binary { p_two: f64 },
}

impl OffspringDist {
    pub fn geometric(p: f64) -> Result<Self, ModelsError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(ModelsError::Offspring(format!(
                "geometric success probability must be in (0, 1], got {p}"
            )));
        }
        Ok(Self::Geometric { p })
    }

    /// Geometric law tuned to a target mean `m >= 0`: `p = 1/(1+m)`.
    ///
    /// This is the calibration used for near-critical branching runs: the
    /// mean is matched exactly and the variance is then `m (1 + m)`, so the
    /// family's implied limit variance is 2 (not a free parameter).
    pub fn geometric_with_mean(m: f64) -> Result<Self, ModelsError> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(ModelsError::Offspring(format!(
                "geometric mean must be nonnegative and finite, got {m}"
            )));
        }
        Self::geometric(1.0 / (1.0 + m))
    }

    pub fn poisson(mean: f64) -> Result<Self, ModelsError> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(ModelsError::Offspring(format!(
                "poisson mean must be nonnegative and finite, got {mean}"
            )));
        }
        Ok(Self::Poisson { mean })
    }

    pub fn binary(p_two: f64) -> Result<Self, ModelsError> {
        if !(0.0..=1.0).contains(&p_two) {
            return Err(ModelsError::Offspring(format!(
                "binary split probability must be in [0, 1], got {p_two}"
            )));
        }
        Ok(Self::Binary { p_two })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Geometric { p } => (1.0 - p) / p,
            Self::Poisson { mean } => *mean,
            Self::Binary { p_two } => 2.0 * p_two,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Geometric { p } => (1.0 - p) / (p * p),
            Self::Poisson { mean } => *mean,
            Self::Binary { p_two } => 4.0 * p_two * (1.0 - p_two),
        }
    }

    /// One individual's offspring count.
    pub fn sample_one<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Geometric { p } => Geometric::new(*p).expect("validated p").sample(rng),
            Self::Poisson { mean } => {
                if *mean == 0.0 {
                    0
                } else {
                    Poisson::new(*mean).expect("validated mean").sample(rng) as u64
                }
            }
            Self::Binary { p_two } => {
                if rng.random::<f64>() < *p_two {
                    2
                } else {
                    0
                }
            }
        }
    }

    /// Total offspring of `count` independent individuals, drawn in one shot
    /// from the exact law of the sum: a sum of geometrics is negative
    /// binomial (sampled as a Gamma-mixed Poisson), a sum of Poissons is
    /// Poisson, and the binary family sums to twice a binomial.
    pub fn sample_total<R: Rng>(&self, count: u64, rng: &mut R) -> u64 {
        if count == 0 {
            return 0;
        }
        match self {
            Self::Geometric { p } => {
                if *p >= 1.0 {
                    return 0;
                }
                let scale = (1.0 - p) / p;
                let rate: f64 = Gamma::new(count as f64, scale)
                    .expect("positive shape")
                    .sample(rng);
                if rate <= 0.0 {
                    0
                } else {
                    Poisson::new(rate).expect("positive mean").sample(rng) as u64
                }
            }
            Self::Poisson { mean } => {
                let total_mean = count as f64 * mean;
                if total_mean == 0.0 {
                    0
                } else {
                    Poisson::new(total_mean).expect("positive mean").sample(rng) as u64
                }
            }
            Self::Binary { p_two } => {
                2 * Binomial::new(count, *p_two)
                    .expect("validated p_two")
                    .sample(rng)
            }
        }
    }
}

impl FromStr for OffspringDist {
    type Err = ModelsError;

    /// Parses the CLI/config naming scheme `geom:p`, `poisson:m`, `binary:p2`.
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (name, arg) = spec
            .split_once(':')
            .ok_or_else(|| ModelsError::ParseError(spec.to_string()))?;
        let value: f64 = arg
            .trim()
            .parse()
            .map_err(|_| ModelsError::ParseError(spec.to_string()))?;
        match name {
            "geom" => Self::geometric(value),
            "poisson" => Self::poisson(value),
            "binary" => Self::binary(value),
            _ => Err(ModelsError::ParseError(spec.to_string())),
        }
    }
}

/// Knobs of the Galton-Watson simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GwOptions {
    /// Draw every individual's offspring separately instead of sampling the
    /// generation total from its closed-form law. Same distribution, much
    /// slower; kept for validating the pooled sampler.
    pub per_individual_draws: bool,
    /// Budget on aggregate offspring draws (per-individual mode) and on the
    /// population size (pooled mode).
    pub draw_cap: u64,
}

impl Default for GwOptions {
    fn default() -> Self {
        Self {
            per_individual_draws: false,
            draw_cap: 1_000_000_000,
        }
    }
}

/// Population per generation, `0 ..= [N t]`, started from `[N x0]`
/// individuals. Extinction is a valid absorbing outcome.
pub fn galton_watson_path<R: Rng>(
    n_scale: u64,
    x0: f64,
    od: &OffspringDist,
    t: f64,
    opts: &GwOptions,
    rng: &mut R,
) -> Result<Vec<u64>, ModelsError> {
    if n_scale < 1 {
        return Err(DomainError::new("N", "a positive integer", n_scale as f64).into());
    }
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(DomainError::new("x0", "positive and finite", x0).into());
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(DomainError::new("t", "positive and finite", t).into());
    }
    let generations = (n_scale as f64 * t).floor() as u64;
    let mut population = (n_scale as f64 * x0).floor() as u64;
    let mut path = Vec::with_capacity(generations as usize + 1);
    path.push(population);
    let mut draws_used: u64 = 0;
    for _ in 0..generations {
        if population == 0 {
            path.push(0);
            continue;
        }
        population = if opts.per_individual_draws {
            draws_used = draws_used.saturating_add(population);
            if draws_used > opts.draw_cap {
                return Err(ModelsError::Resource {
                    used: draws_used,
                    cap: opts.draw_cap,
                });
            }
            let mut total: u64 = 0;
            for _ in 0..population {
                total += od.sample_one(rng);
            }
            total
        } else {
            od.sample_total(population, rng)
        };
        if population > opts.draw_cap {
            return Err(ModelsError::Resource {
                used: population,
                cap: opts.draw_cap,
            });
        }
        path.push(population);
    }
    Ok(path)
}

/// Rescaled terminal population `X_{[N t]} / N` of one branching run.
pub fn galton_watson_simulate<R: Rng>(
    n_scale: u64,
    x0: f64,
    od: &OffspringDist,
    t: f64,
    rng: &mut R,
) -> Result<f64, ModelsError> {
    let path = galton_watson_path(n_scale, x0, od, t, &GwOptions::default(), rng)?;
    Ok(*path.last().expect("path never empty") as f64 / n_scale as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greeks::FdTarget;
    use crate::simulate::StreamKey;
    use crate::transforms::QuadratureConfig;

    fn inversion() -> ExpectationBackend {
        ExpectationBackend::Inversion(QuadratureConfig::tight())
    }

    #[test]
    fn cir_coefficient_matching() {
        let c = CirParams::new(0.2, 1.5, 0.04, 0.03).unwrap();
        let p = cir_to_affine(&c);
        assert!((p.alpha - 0.04).abs() < 1e-16);
        assert!((p.beta - (-1.5)).abs() < 1e-16);
        assert!((p.b - 0.06).abs() < 1e-16);

        // The intercept up-shift is the long-run-mean shift theta + sigma^2/(2k).
        let up = p.shift_b(0.5 * p.alpha).unwrap();
        let theta_up = c.theta + c.sigma * c.sigma / (2.0 * c.k);
        assert!((up.b - c.k * theta_up).abs() < 1e-15);
    }

    #[test]
    fn cir_round_trip() {
        let c = CirParams::new(0.5, 2.0, 0.04, 0.03).unwrap();
        let back = affine_to_cir(&cir_to_affine(&c), c.r0).unwrap();
        assert_eq!(back, c);
        // Not defined for non-mean-reverting or zero-intercept triples.
        assert!(affine_to_cir(&validate_params(1.0, 0.5, 1.0).unwrap(), 1.0).is_none());
        assert!(affine_to_cir(&validate_params(1.0, -0.5, 0.0).unwrap(), 1.0).is_none());
    }

    #[test]
    fn feller_condition_cases() {
        assert!(CirParams::new(0.2, 1.5, 0.04, 0.03).unwrap().feller_satisfied());
        assert!(!CirParams::new(0.4, 0.5, 0.04, 0.03).unwrap().feller_satisfied());
    }

    #[test]
    fn cir_delta_factor_identity() {
        // The generic shift factor equals -2k e^{-kt}/(sigma^2 (e^{-kt}-1)).
        let c = CirParams::new(1.0, 1.0, 0.8, 0.5).unwrap();
        let t = 1.0;
        let f = TestFunction::gaussian(0.0, 1.0).unwrap();
        let g = cir_delta(&f, t, &c, &inversion()).unwrap();
        let ekt = (-c.k * t).exp();
        let displayed = -2.0 * c.k * ekt / (c.sigma * c.sigma * (ekt - 1.0));
        assert!(
            (g.weights[0] - displayed).abs() <= 1e-12 * displayed.abs(),
            "{} vs {displayed}",
            g.weights[0]
        );

        // Delegation is literal: same numbers as the affine estimator.
        let direct = delta_shift(&f, t, c.r0, &cir_to_affine(&c), &inversion()).unwrap();
        assert_eq!(g.value.to_bits(), direct.value.to_bits());
    }

    #[test]
    fn cir_ibp_gate_and_value() {
        let f = TestFunction::gaussian(0.1, 0.5).unwrap();
        let fine = CirParams::new(0.2, 1.5, 0.04, 0.05).unwrap();
        assert!(cir_ibp(&f, 1.0, &fine, &inversion()).is_ok());

        let violating = CirParams::new(0.4, 0.5, 0.04, 0.05).unwrap();
        assert!(matches!(
            cir_ibp(&f, 1.0, &violating, &inversion()),
            Err(GreeksError::FellerViolation { .. })
        ));

        // Against the direct E[f'] by density quadrature.
        let p = cir_to_affine(&fine);
        let rep = crate::density::transition_rep(1.0, fine.r0, &p).unwrap();
        let direct = crate::density::expectation_via_density(
            |y| f.derivative(y).unwrap(),
            &rep,
            &QuadratureConfig::tight(),
        )
        .unwrap();
        let shift = cir_ibp(&f, 1.0, &fine, &inversion()).unwrap();
        assert!(
            (shift.value - direct).abs() / direct.abs().max(1e-10) < 1e-6,
            "{} vs {direct}",
            shift.value
        );
    }

    #[test]
    fn simulated_cir_mean_reverts() {
        // E[r_t] = theta + (r0 - theta) e^{-kt} under the affine mapping.
        let c = CirParams::new(0.3, 1.2, 0.05, 0.12).unwrap();
        let p = cir_to_affine(&c);
        let t = 0.8;
        let est = crate::simulate::mc_expectation(
            |y| y,
            t,
            c.r0,
            &p,
            &crate::simulate::MCConfig::new(200_000, 314),
        )
        .unwrap();
        let closed = c.theta + (c.r0 - c.theta) * (-c.k * t).exp();
        assert!(
            (est.value - closed).abs() < 4.0 * est.std_error,
            "{} vs {closed}",
            est.value
        );
    }

    #[test]
    fn cir_combined_tracks_delta() {
        let c = CirParams::new(0.3, 0.8, 0.1, 0.07).unwrap();
        let f = TestFunction::gaussian(0.1, 0.3).unwrap();
        let a = cir_delta(&f, 1.0, &c, &inversion()).unwrap();
        let b = cir_combined(&f, 1.0, &c, &inversion()).unwrap();
        assert!((a.value - b.value).abs() < 1e-8);
        // Mean reversion makes the prefactor strictly below 1.
        assert!(b.weights[0] < 1.0);
    }

    #[test]
    fn population_gamma_zero_weights() {
        let pp = PopulationParams::new(0.0, 2.0, 1.5).unwrap();
        let f = TestFunction::gaussian(1.0, 1.0).unwrap();
        let g = population_gamma_sensitivity(&f, 1.0, &pp, &inversion()).unwrap();
        let unit = pp.x0 / pp.sigma2;
        assert!((g.weights[0] - unit).abs() < 1e-12);
        assert_eq!(g.weights[1], 0.0);
        assert!((g.weights[2] + unit).abs() < 1e-12);
        let sum: f64 = g.weights.iter().sum();
        assert!(sum.abs() < 1e-14);
        // Shifted intercepts are i sigma^2 / 2.
        assert_eq!(g.shifted_params[0].b, pp.sigma2);
        assert_eq!(g.shifted_params[1].b, 0.5 * pp.sigma2);
        assert_eq!(g.shifted_params[2].b, 0.0);

        // The gamma = 0 sensitivity collapses to a two-term difference;
        // check it against a centered difference in gamma.
        let fd = {
            let h = 1e-4;
            let up = population_expectation_at_gamma(&f, 1.0, h, &pp);
            let down = population_expectation_at_gamma(&f, 1.0, -h, &pp);
            (up - down) / (2.0 * h)
        };
        assert!(
            (g.value - fd).abs() / fd.abs().max(1e-10) < 1e-5,
            "{} vs {fd}",
            g.value
        );
    }

    fn population_expectation_at_gamma(
        f: &TestFunction,
        t: f64,
        gamma: f64,
        pp: &PopulationParams,
    ) -> f64 {
        let p = validate_params(pp.sigma2, gamma, 0.0).unwrap();
        crate::transforms::expectation_via_inversion(
            f,
            t,
            pp.x0,
            &p,
            &QuadratureConfig::tight(),
        )
        .unwrap()
    }

    #[test]
    fn population_sensitivity_matches_fd() {
        let pp = PopulationParams::new(0.5, 1.5, 1.0).unwrap();
        let f = TestFunction::gaussian(1.0, 1.0).unwrap();
        let be = inversion();
        let g = population_gamma_sensitivity(&f, 1.0, &pp, &be).unwrap();
        let base = validate_params(pp.sigma2, pp.gamma, 0.0).unwrap();
        let fd = crate::greeks::fd_oracle(FdTarget::InBeta, &f, 1.0, pp.x0, &base, &be, 1e-4)
            .unwrap();
        assert!(
            (g.value - fd).abs() / fd.abs().max(1e-10) < 1e-5,
            "{} vs {fd}",
            g.value
        );
    }

    #[test]
    fn offspring_moments_and_parsing() {
        let geom = OffspringDist::geometric(0.25).unwrap();
        assert!((geom.mean() - 3.0).abs() < 1e-15);
        assert!((geom.variance() - 12.0).abs() < 1e-15);

        let tuned = OffspringDist::geometric_with_mean(1.5).unwrap();
        assert!((tuned.mean() - 1.5).abs() < 1e-15);

        let pois: OffspringDist = "poisson:1.25".parse().unwrap();
        assert_eq!(pois.mean(), 1.25);
        assert_eq!(pois.variance(), 1.25);

        let bin: OffspringDist = "binary:0.5".parse().unwrap();
        assert_eq!(bin.mean(), 1.0);
        assert_eq!(bin.variance(), 1.0);

        assert!("geom:0".parse::<OffspringDist>().is_err());
        assert!("uniform:1".parse::<OffspringDist>().is_err());
        assert!("geom".parse::<OffspringDist>().is_err());
    }

    #[test]
    fn pooled_totals_match_per_individual_law() {
        // Same mean and variance as summing individual draws (the pooled
        // laws are the exact distribution of the sum).
        let count = 50u64;
        let n_trials = 20_000u64;
        for od in [
            OffspringDist::geometric(0.4).unwrap(),
            OffspringDist::poisson(1.1).unwrap(),
            OffspringDist::binary(0.45).unwrap(),
        ] {
            let mut stats = [(0.0f64, 0.0f64), (0.0, 0.0)];
            for (mode, slot) in [(false, 0usize), (true, 1usize)] {
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for i in 0..n_trials {
                    let mut rng = StreamKey::new(if mode { 900 } else { 901 }, i).rng();
                    let total = if mode {
                        (0..count).map(|_| od.sample_one(&mut rng)).sum::<u64>()
                    } else {
                        od.sample_total(count, &mut rng)
                    } as f64;
                    sum += total;
                    sumsq += total * total;
                }
                let mean = sum / n_trials as f64;
                let var = (sumsq - n_trials as f64 * mean * mean) / (n_trials - 1) as f64;
                stats[slot] = (mean, var);
            }
            let exact_mean = count as f64 * od.mean();
            let exact_var = count as f64 * od.variance();
            let se_mean = (exact_var / n_trials as f64).sqrt();
            for (mean, var) in stats {
                assert!(
                    (mean - exact_mean).abs() < 4.0 * se_mean,
                    "{od:?}: mean {mean} vs {exact_mean}"
                );
                assert!(
                    (var - exact_var).abs() < 0.1 * exact_var,
                    "{od:?}: var {var} vs {exact_var}"
                );
            }
        }
    }

    #[test]
    fn empty_start_population_stays_empty() {
        // [N x0] = 0 when x0 < 1/N.
        let od = OffspringDist::geometric(0.5).unwrap();
        let mut rng = StreamKey::new(5, 0).rng();
        let z = galton_watson_simulate(100, 0.004, &od, 1.0, &mut rng).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn extinct_offspring_law_dies_in_one_generation() {
        let od = OffspringDist::poisson(0.0).unwrap();
        let mut rng = StreamKey::new(5, 1).rng();
        let path =
            galton_watson_path(50, 1.0, &od, 1.0, &GwOptions::default(), &mut rng).unwrap();
        assert_eq!(path[0], 50);
        assert!(path[1..].iter().all(|&p| p == 0));
    }

    #[test]
    fn branching_mean_is_exactly_multiplicative() {
        // E[X_{[Nt]}] = [N x0] m^{[Nt]} holds at every N, without any
        // scaling-limit error; check the ensemble against it.
        let n_scale = 200u64;
        let gamma = 0.5;
        let od = OffspringDist::geometric_with_mean(1.0 + gamma / n_scale as f64).unwrap();
        let reps = 2_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..reps {
            let mut rng = StreamKey::new(77, i).rng();
            let z = galton_watson_simulate(n_scale, 1.0, &od, 1.0, &mut rng).unwrap();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / reps as f64;
        let sd = ((sumsq - reps as f64 * mean * mean) / (reps - 1) as f64).sqrt();
        let exact = od.mean().powi(n_scale as i32);
        assert!(
            (mean - exact).abs() < 4.0 * sd / (reps as f64).sqrt(),
            "ensemble mean {mean} vs exact branching mean {exact}"
        );
    }

    #[test]
    fn resource_cap_triggers() {
        let od = OffspringDist::poisson(1.0).unwrap();
        let opts = GwOptions {
            per_individual_draws: true,
            draw_cap: 100,
        };
        let mut rng = StreamKey::new(9, 0).rng();
        let out = galton_watson_path(100, 1.0, &od, 1.0, &opts, &mut rng);
        assert!(matches!(out, Err(ModelsError::Resource { .. })));
    }
}
