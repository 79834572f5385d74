//! Adaptive Gauss-Kronrod quadrature (15-point Kronrod rule with the
//! embedded 7-point Gauss rule) for complex-valued integrands on a finite
//! interval.
//!
//! The driver bisects the interval with the largest local error estimate
//! until the summed estimate meets `max(abs_tol, rel_tol * |value|)` or the
//! interval budget is exhausted. Interval bookkeeping is a binary heap, the
//! final reduction re-sums all intervals left to right.

use num_complex::Complex64;
use std::collections::BinaryHeap;

// Abscissae of the 15-point Kronrod rule on [-1, 1]; every second entry is a
// node of the embedded 7-point Gauss rule. Digits beyond f64 precision are
// kept so the constants round to the correctly rounded values.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_8,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

/// Hard failure of the adaptive driver.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QuadFailure {
    /// Error estimate at the point the interval budget ran out.
    pub achieved: f64,
    /// Tolerance that was requested.
    pub requested: f64,
}

fn kronrod15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;
    let mut res_abs = WGK[7] * f_center.norm();

    let mut samples = [Complex64::default(); 15];
    samples[7] = f_center;
    for j in 0..7 {
        let lo = f(center - half * XGK[j]);
        let hi = f(center + half * XGK[j]);
        samples[j] = lo;
        samples[14 - j] = hi;
        let pair = lo + hi;
        kronrod += WGK[j] * pair;
        res_abs += WGK[j] * (lo.norm() + hi.norm());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }

    // Scaled error heuristic from QUADPACK: compare against the deviation of
    // the integrand from its mean to avoid over-trusting lucky cancellation.
    let mean = kronrod * 0.5;
    let mut res_asc = 0.0;
    for (j, s) in samples.iter().enumerate() {
        let w = WGK[7 - (7_i64 - j as i64).unsigned_abs() as usize];
        res_asc += w * (s - mean).norm();
    }
    res_asc *= half.abs();
    res_abs *= half.abs();

    let raw = ((kronrod - gauss) * half).norm();
    let mut err = raw;
    if res_asc != 0.0 && raw != 0.0 {
        err = res_asc * 1.0_f64.min((200.0 * raw / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }

    (kronrod * half, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Integrates `f` over `[a, b]`, refining until the error estimate is below
/// `max(abs_tol, rel_tol * |integral|)`.
///
/// Returns the integral and the final error estimate, or the achieved error
/// if `max_intervals` subdivisions were not enough.
pub(crate) fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(Complex64, f64), QuadFailure> {
    // Seed the heap with several segments, not one: a single K15 pass over
    // a wide interval can miss an integrand whose support sits between the
    // nodes and "converge" to 0.
    let seed_segments = 8.min(max_intervals.max(1));
    let mut heap = BinaryHeap::new();
    let mut total_value = Complex64::default();
    let mut total_error = 0.0;
    for j in 0..seed_segments {
        let lo = a + (b - a) * j as f64 / seed_segments as f64;
        let hi = a + (b - a) * (j + 1) as f64 / seed_segments as f64;
        let (value, error) = kronrod15(&f, lo, hi);
        total_value += value;
        total_error += error;
        heap.push(Segment {
            a: lo,
            b: hi,
            value,
            error,
        });
    }

    while total_error > abs_tol.max(rel_tol * total_value.norm()) {
        if heap.len() >= max_intervals {
            return Err(QuadFailure {
                achieved: total_error,
                requested: abs_tol.max(rel_tol * total_value.norm()),
            });
        }
        let worst = heap.pop().expect("heap cannot be empty while refining");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // The worst interval is no longer splittable in f64; its error
            // estimate is the attainable floor.
            heap.push(worst);
            break;
        }
        let (lv, le) = kronrod15(&f, worst.a, mid);
        let (rv, re) = kronrod15(&f, mid, worst.b);
        total_error += le + re - worst.error;
        total_value += lv + rv - worst.value;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }

    let mut segments: Vec<&Segment> = heap.iter().collect();
    segments.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap());
    let mut value = Complex64::default();
    for seg in segments {
        value += seg.value;
    }
    Ok((value, total_error))
}

/// Real-valued convenience wrapper around [`integrate`].
pub(crate) fn integrate_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64), QuadFailure> {
    integrate(
        |x| Complex64::new(f(x), 0.0),
        a,
        b,
        abs_tol,
        rel_tol,
        max_intervals,
    )
    .map(|(v, e)| (v.re, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_interval_length() {
        let wgk_sum: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((wgk_sum - 2.0).abs() < 1e-15, "kronrod sum {wgk_sum}");
        let wg_sum: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((wg_sum - 2.0).abs() < 1e-15, "gauss sum {wg_sum}");
    }

    #[test]
    fn polynomials_integrate_exactly() {
        // K15 is exact for polynomials up to degree 22.
        for k in 0..=10u32 {
            let (v, _) = kronrod15(&|x: f64| Complex64::new(x.powi(k as i32), 0.0), 0.0, 1.0);
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((v.re - exact).abs() < 1e-14, "degree {k}: {} vs {exact}", v.re);
        }
    }

    #[test]
    fn exponential_on_unit_interval() {
        let (v, e) = integrate_real(|x| x.exp(), 0.0, 1.0, 1e-12, 0.0, 64).unwrap();
        assert!((v - (1.0_f64.exp() - 1.0)).abs() < 1e-14);
        assert!(e < 1e-12);
    }

    #[test]
    fn oscillatory_integrand() {
        // integral of cos(40 x) over [0, pi] = sin(40 pi)/40 = 0.
        let (v, _) = integrate_real(
            |x| (40.0 * x).cos(),
            0.0,
            std::f64::consts::PI,
            1e-12,
            0.0,
            1024,
        )
        .unwrap();
        assert!(v.abs() < 1e-12, "value {v}");
    }

    #[test]
    fn integrable_singularity() {
        // integral of x^{-1/2} over (0, 1] = 2.
        let (v, _) = integrate_real(|x| x.sqrt().recip(), 0.0, 1.0, 1e-10, 0.0, 4096).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "value {v}");
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let failure = integrate_real(|x| x.sqrt().recip(), 0.0, 1.0, 1e-13, 0.0, 8);
        assert!(failure.is_err());
    }

    #[test]
    fn complex_integrand() {
        // integral of e^{i x} over [0, pi/2] = sin + i(1 - cos) at pi/2 = 1 + i.
        let (v, _) = integrate(
            |x| Complex64::new(0.0, x).exp(),
            0.0,
            std::f64::consts::FRAC_PI_2,
            1e-13,
            0.0,
            64,
        )
        .unwrap();
        assert!((v - Complex64::new(1.0, 1.0)).norm() < 1e-13);
    }
}
