//! Payoff test functions with closed-form Fourier transforms, and the
//! Fourier-inversion expectation engine
//! `E[f(X_t)] = (1/2pi) * integral of fhat(theta) * phi(theta) d theta`.
//!
//! The transform convention is `fhat(theta) = integral of f(y) e^{-i theta y} dy`.
//! All built-in test functions are integrable with integrable transforms, so
//! the inversion integral is absolutely convergent regardless of the process
//! parameters (`|phi| <= 1`). Integration pairs the `+theta` and `-theta`
//! nodes, which cancels the imaginary part up to rounding; the residual is
//! still measured and checked before being discarded.

use crate::affine::{char_fn, AffineParams, DomainError};
use crate::quad;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

const SQRT_2PI: f64 = 2.506_628_274_631_000_6;

/// Errors from test-function construction and inversion quadrature.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformsError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("quadrature did not converge: error estimate {achieved:.3e} exceeds tolerance {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("inversion integral has imaginary residual {residual:.3e}, above tolerance {tolerance:.3e}")]
    NonReal { residual: f64, tolerance: f64 },
    #[error("test function does not support {0}")]
    Unsupported(&'static str),
    #[error("invalid test function: {0}")]
    InvalidFunction(String),
    #[error("unrecognized test function spec `{0}` (expected gaussian:m,s dampedcos:a,w hermite1:m,s table:<path.csv>)")]
    ParseError(String),
}

/// Tolerances and budget for the adaptive inversion quadrature.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureConfig {
    /// Absolute tolerance on the returned expectation.
    pub abs_tol: f64,
    /// Relative tolerance on the returned expectation.
    pub rel_tol: f64,
    /// Maximum number of adaptive subintervals.
    pub max_intervals: usize,
    /// Fixed truncation point for the inversion integral; `None` selects the
    /// per-function tail bound of [`auto_truncation`].
    pub truncation_theta: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_intervals: 1 << 14,
            truncation_theta: None,
        }
    }
}

impl QuadratureConfig {
    /// Default tolerances scaled down for use as a reference oracle.
    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TransformsError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(TransformsError::InvalidFunction(format!(
                "quadrature tolerances must be positive, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_intervals < 16 {
            return Err(TransformsError::InvalidFunction(format!(
                "max_intervals must be at least 16, got {}",
                self.max_intervals
            )));
        }
        Ok(())
    }
}

/// A payoff `f` with an evaluable closed-form Fourier transform.
///
/// Every variant is in `L^1` with `L^1` transform. `UserTable` is a
/// second-class exploratory kind: its transform comes from an FFT of the
/// tabulated samples and it has no derivative.
#[derive(Debug, Clone)]
pub enum TestFunction {
    /// `exp(-(y-m)^2 / (2 s^2))`.
    Gaussian { mean: f64, width: f64 },
    /// `exp(-a |y|) cos(w y)`; not differentiable at 0.
    DampedCosine { decay: f64, frequency: f64 },
    /// Order 0 is the Gaussian; order 1 is `((y-m)/s) exp(-(y-m)^2/(2 s^2))`.
    HermiteGaussian { order: u8, mean: f64, width: f64 },
    /// Linear interpolation of tabulated samples, zero outside the table.
    UserTable(Tabulated),
}

impl TestFunction {
    pub fn gaussian(mean: f64, width: f64) -> Result<Self, TransformsError> {
        if !(width > 0.0 && width.is_finite() && mean.is_finite()) {
            return Err(TransformsError::InvalidFunction(format!(
                "gaussian requires finite m and s > 0, got m={mean} s={width}"
            )));
        }
        Ok(Self::Gaussian { mean, width })
    }

    pub fn damped_cosine(decay: f64, frequency: f64) -> Result<Self, TransformsError> {
        if !(decay > 0.0 && decay.is_finite() && frequency.is_finite()) {
            return Err(TransformsError::InvalidFunction(format!(
                "damped cosine requires finite w and a > 0, got a={decay} w={frequency}"
            )));
        }
        Ok(Self::DampedCosine { decay, frequency })
    }

    pub fn hermite_gaussian(order: u8, mean: f64, width: f64) -> Result<Self, TransformsError> {
        if order > 1 {
            return Err(TransformsError::InvalidFunction(format!(
                "hermite order must be 0 or 1, got {order}"
            )));
        }
        if !(width > 0.0 && width.is_finite() && mean.is_finite()) {
            return Err(TransformsError::InvalidFunction(format!(
                "hermite requires finite m and s > 0, got m={mean} s={width}"
            )));
        }
        Ok(Self::HermiteGaussian { order, mean, width })
    }

    pub fn user_table(points: &[(f64, f64)]) -> Result<Self, TransformsError> {
        Tabulated::from_points(points).map(Self::UserTable)
    }

    /// Loads a two-column CSV (`y,f(y)`, strictly increasing `y`; an optional
    /// non-numeric header row is skipped).
    pub fn user_table_from_csv(path: &Path) -> Result<Self, TransformsError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            TransformsError::InvalidFunction(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let y = cols.next().map(str::trim).unwrap_or("");
            let v = cols.next().map(str::trim).unwrap_or("");
            match (y.parse::<f64>(), v.parse::<f64>()) {
                (Ok(y), Ok(v)) => points.push((y, v)),
                _ if lineno == 0 => continue, // header row
                _ => {
                    return Err(TransformsError::InvalidFunction(format!(
                        "{}:{}: expected `y,value`, got `{line}`",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::user_table(&points)
    }

    /// Point evaluation of the payoff.
    pub fn evaluate(&self, y: f64) -> f64 {
        match self {
            Self::Gaussian { mean, width } => {
                let u = (y - mean) / width;
                (-0.5 * u * u).exp()
            }
            Self::DampedCosine { decay, frequency } => {
                (-decay * y.abs()).exp() * (frequency * y).cos()
            }
            Self::HermiteGaussian { order, mean, width } => {
                let u = (y - mean) / width;
                let g = (-0.5 * u * u).exp();
                if *order == 0 {
                    g
                } else {
                    u * g
                }
            }
            Self::UserTable(table) => table.evaluate(y),
        }
    }

    /// Whether [`TestFunction::derivative`] is defined.
    pub fn derivative_available(&self) -> bool {
        matches!(self, Self::Gaussian { .. } | Self::HermiteGaussian { .. })
    }

    /// Pointwise derivative `f'(y)` for the differentiable kinds.
    pub fn derivative(&self, y: f64) -> Result<f64, TransformsError> {
        match self {
            Self::Gaussian { mean, width } => {
                let u = (y - mean) / width;
                Ok(-u / width * (-0.5 * u * u).exp())
            }
            Self::HermiteGaussian { order, mean, width } => {
                let u = (y - mean) / width;
                let g = (-0.5 * u * u).exp();
                if *order == 0 {
                    Ok(-u / width * g)
                } else {
                    Ok((1.0 - u * u) / width * g)
                }
            }
            _ => Err(TransformsError::Unsupported("a derivative")),
        }
    }

    /// Fourier transform `fhat(theta)` under the `e^{-i theta y}` convention.
    pub fn transform(&self, theta: f64) -> Complex64 {
        match self {
            Self::Gaussian { mean, width } => gaussian_transform(*mean, *width, theta),
            Self::DampedCosine { decay, frequency } => {
                let a = *decay;
                let lorentz = |u: f64| a / (a * a + u * u);
                Complex64::new(lorentz(theta - frequency) + lorentz(theta + frequency), 0.0)
            }
            Self::HermiteGaussian { order, mean, width } => {
                if *order == 0 {
                    gaussian_transform(*mean, *width, theta)
                } else {
                    let s = *width;
                    let mag = -s * s * SQRT_2PI * theta * (-0.5 * s * s * theta * theta).exp();
                    Complex64::new(0.0, mag) * Complex64::from_polar(1.0, -theta * mean)
                }
            }
            Self::UserTable(table) => table.transform(theta),
        }
    }

    /// True for kinds whose transform is synthesized numerically rather than
    /// known in closed form.
    pub fn is_exploratory(&self) -> bool {
        matches!(self, Self::UserTable(_))
    }
}

impl FromStr for TestFunction {
    type Err = TransformsError;

    /// Parses the CLI/config naming scheme: `gaussian:m,s`, `dampedcos:a,w`,
    /// `hermite0:m,s`, `hermite1:m,s`, `table:<path.csv>`.
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (name, args) = spec
            .split_once(':')
            .ok_or_else(|| TransformsError::ParseError(spec.to_string()))?;
        if name == "table" {
            return Self::user_table_from_csv(Path::new(args));
        }
        let nums: Vec<f64> = args
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| TransformsError::ParseError(spec.to_string()))?;
        match (name, nums.as_slice()) {
            ("gaussian", [m, s]) => Self::gaussian(*m, *s),
            ("dampedcos", [a, w]) => Self::damped_cosine(*a, *w),
            ("hermite0", [m, s]) => Self::hermite_gaussian(0, *m, *s),
            ("hermite1", [m, s]) => Self::hermite_gaussian(1, *m, *s),
            _ => Err(TransformsError::ParseError(spec.to_string())),
        }
    }
}

/// Closed-form transform of the Gaussian bump `exp(-(y-m)^2/(2 s^2))`:
/// `s sqrt(2 pi) exp(-s^2 theta^2 / 2) e^{-i theta m}`.
pub fn gaussian_transform(mean: f64, width: f64, theta: f64) -> Complex64 {
    let mag = width * SQRT_2PI * (-0.5 * width * width * theta * theta).exp();
    Complex64::from_polar(mag, -theta * mean)
}

/// Tabulated payoff resampled onto a uniform grid, with an FFT-derived
/// transform. Exploratory: integrability of the true transform cannot be
/// certified from samples.
#[derive(Debug, Clone)]
pub struct Tabulated {
    y_start: f64,
    dy: f64,
    samples: Vec<f64>,
    theta_step: f64,
    /// Transform values at `k * theta_step` for `k = 0 ..= n_fft/2`.
    spectrum: Vec<Complex64>,
}

const TABLE_SAMPLES: usize = 2048;
const TABLE_FFT: usize = 32768;

impl Tabulated {
    fn from_points(points: &[(f64, f64)]) -> Result<Self, TransformsError> {
        if points.len() < 2 {
            return Err(TransformsError::InvalidFunction(
                "table needs at least two points".into(),
            ));
        }
        for pair in points.windows(2) {
            // NaN grid points fall through here and are caught by the
            // finiteness check below.
            if pair[1].0 <= pair[0].0 {
                return Err(TransformsError::InvalidFunction(format!(
                    "table grid must be strictly increasing, got {} after {}",
                    pair[1].0, pair[0].0
                )));
            }
        }
        if points
            .iter()
            .any(|(y, v)| !y.is_finite() || !v.is_finite())
        {
            return Err(TransformsError::InvalidFunction(
                "table entries must be finite".into(),
            ));
        }

        let y_start = points[0].0;
        let y_end = points[points.len() - 1].0;
        let dy = (y_end - y_start) / (TABLE_SAMPLES - 1) as f64;
        let mut samples = Vec::with_capacity(TABLE_SAMPLES);
        let mut seg = 0usize;
        for j in 0..TABLE_SAMPLES {
            let y = y_start + j as f64 * dy;
            while seg + 2 < points.len() && points[seg + 1].0 < y {
                seg += 1;
            }
            let (y0, v0) = points[seg];
            let (y1, v1) = points[seg + 1];
            let w = ((y - y0) / (y1 - y0)).clamp(0.0, 1.0);
            samples.push(v0 + w * (v1 - v0));
        }

        let mut buf: Vec<rustfft::num_complex::Complex64> = samples
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::default()))
            .take(TABLE_FFT)
            .collect();
        FftPlanner::new().plan_fft_forward(TABLE_FFT).process(&mut buf);

        let theta_step = 2.0 * PI / (TABLE_FFT as f64 * dy);
        let spectrum = buf[..=TABLE_FFT / 2]
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let theta = k as f64 * theta_step;
                dy * v * Complex64::from_polar(1.0, -theta * y_start)
            })
            .collect();

        Ok(Self {
            y_start,
            dy,
            samples,
            theta_step,
            spectrum,
        })
    }

    fn evaluate(&self, y: f64) -> f64 {
        let u = (y - self.y_start) / self.dy;
        if u < 0.0 || u > (self.samples.len() - 1) as f64 {
            return 0.0;
        }
        let j = (u as usize).min(self.samples.len() - 2);
        let w = u - j as f64;
        self.samples[j] + w * (self.samples[j + 1] - self.samples[j])
    }

    fn transform(&self, theta: f64) -> Complex64 {
        if theta < 0.0 {
            return self.transform(-theta).conj();
        }
        let u = theta / self.theta_step;
        if u >= (self.spectrum.len() - 1) as f64 {
            return Complex64::default();
        }
        let k = u as usize;
        let w = u - k as f64;
        self.spectrum[k] + w * (self.spectrum[k + 1] - self.spectrum[k])
    }

    /// Nyquist frequency of the sample grid; the synthesized transform is
    /// taken as zero beyond it.
    pub fn theta_max(&self) -> f64 {
        PI / self.dy
    }
}

/// Truncation point `Theta` such that the discarded transform tail
/// `integral over |theta| > Theta of |fhat|` stays below `tol`, using only
/// `|phi| <= 1` for the process factor.
pub fn auto_truncation(f: &TestFunction, _p: &AffineParams, _t: f64, tol: f64) -> f64 {
    let tol = tol.max(f64::MIN_POSITIVE);
    match f {
        TestFunction::Gaussian { width: s, .. }
        | TestFunction::HermiteGaussian { order: 0, width: s, .. } => {
            // Tail bound: integral_T^inf e^{-s^2 th^2/2} d th <= e^{-s^2 T^2/2}/(s^2 T).
            let arg = SQRT_2PI / (tol * s);
            let from_tail = if arg > 1.0 { (2.0 * arg.ln()).sqrt() / s } else { 0.0 };
            from_tail.max(8.0 / s)
        }
        TestFunction::HermiteGaussian { width: s, .. } => {
            // integral_T^inf s^2 th e^{-s^2 th^2/2} d th = e^{-s^2 T^2/2} exactly.
            let arg = SQRT_2PI / tol;
            let from_tail = if arg > 1.0 { (2.0 * arg.ln()).sqrt() / s } else { 0.0 };
            from_tail.max(8.0 / s)
        }
        TestFunction::DampedCosine { decay, frequency } => {
            // Four arctan tails, each bounded by a / (Theta - |w|).
            frequency.abs() + 4.0 * decay / tol
        }
        TestFunction::UserTable(table) => table.theta_max(),
    }
}

fn inversion_integral<W>(
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    cfg: &QuadratureConfig,
    weight: W,
) -> Result<f64, TransformsError>
where
    W: Fn(f64) -> Complex64,
{
    cfg.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(DomainError::new("t", "positive and finite", t).into());
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(DomainError::new("x", "nonnegative and finite", x).into());
    }
    let theta_max = cfg
        .truncation_theta
        .unwrap_or_else(|| auto_truncation(f, p, t, cfg.abs_tol));

    // Paired nodes: the -theta contribution is the conjugate of the +theta
    // one up to rounding, so the sum is real up to rounding.
    let paired = |theta: f64| {
        weight(theta) * f.transform(theta) * char_fn(t, theta, x, p)
            + weight(-theta) * f.transform(-theta) * char_fn(t, -theta, x, p)
    };
    let (raw, _err) = quad::integrate(
        paired,
        0.0,
        theta_max,
        cfg.abs_tol * 2.0 * PI,
        cfg.rel_tol,
        cfg.max_intervals,
    )
    .map_err(|e| TransformsError::Quadrature {
        achieved: e.achieved / (2.0 * PI),
        requested: e.requested / (2.0 * PI),
    })?;

    let value = raw / (2.0 * PI);
    if value.im.abs() > 10.0 * cfg.abs_tol {
        return Err(TransformsError::NonReal {
            residual: value.im.abs(),
            tolerance: 10.0 * cfg.abs_tol,
        });
    }
    Ok(value.re)
}

/// `E[f(X_t)]` by Fourier inversion against the closed-form characteristic
/// function.
pub fn expectation_via_inversion(
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    cfg: &QuadratureConfig,
) -> Result<f64, TransformsError> {
    inversion_integral(f, t, x, p, cfg, |_| Complex64::new(1.0, 0.0))
}

/// `E[f'(X_t)]` by inversion, using `fhat'(theta) = i theta fhat(theta)`;
/// no pointwise differentiation of `f` is involved.
pub fn expectation_of_derivative_via_inversion(
    f: &TestFunction,
    t: f64,
    x: f64,
    p: &AffineParams,
    cfg: &QuadratureConfig,
) -> Result<f64, TransformsError> {
    if !f.derivative_available() {
        return Err(TransformsError::Unsupported(
            "a derivative (required for E[f'] by inversion)",
        ));
    }
    inversion_integral(f, t, x, p, cfg, |theta| Complex64::new(0.0, theta))
}
