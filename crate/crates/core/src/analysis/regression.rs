use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::fraction::stable_sum;

/// p-value threshold for the significance flag.
pub const SIGNIFICANCE: f64 = 0.001;

/// Least-squares fit of `iou = beta0 + beta1 * ln(size)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub beta0: f64,
    pub beta1: f64,
    pub r_squared: f64,
    /// Two-sided t-test of `beta1 = 0` with `n - 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
    pub significant: bool,
}

/// Fits IoU against the natural log of region size.
///
/// A constant IoU series gives `beta1 = 0`, `r_squared = 0` and `p_value = 1`.
/// An exact fit gives `p_value = 0`.
pub fn fit_iou_size(points: &[(f64, f64)]) -> Result<RegressionResult, AnalysisError> {
    let n = points.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    if points
        .iter()
        .any(|&(s, y)| !s.is_finite() || !y.is_finite())
    {
        return Err(AnalysisError::NonFinite);
    }
    if points.iter().any(|&(s, _)| s <= 0.0) {
        return Err(AnalysisError::NonPositiveSize);
    }
    let xs: Vec<f64> = points.iter().map(|&(s, _)| s.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let nf = n as f64;
    let mx = stable_sum(xs.iter().copied()) / nf;
    let my = stable_sum(ys.iter().copied()) / nf;
    let sxx = stable_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let syy = stable_sum(ys.iter().map(|y| (y - my) * (y - my)));
    let sxy = stable_sum(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)));
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateFit);
    }
    let beta1 = sxy / sxx;
    let beta0 = my - beta1 * mx;
    let sse = stable_sum(xs.iter().zip(&ys).map(|(x, y)| {
        let e = y - (beta0 + beta1 * x);
        e * e
    }));

    let (r_squared, p_value) = if syy == 0.0 {
        (0.0, 1.0)
    } else {
        let r2 = (1.0 - sse / syy).clamp(0.0, 1.0);
        let df = nf - 2.0;
        let se = (sse / df / sxx).sqrt();
        let p = if se == 0.0 {
            0.0
        } else {
            let t = beta1 / se;
            student_t_two_sided(t, df)
        };
        (r2, p)
    };
    Ok(RegressionResult {
        beta0,
        beta1,
        r_squared,
        p_value,
        n,
        significant: p_value < SIGNIFICANCE,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function (Lanczos approximation), `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` via its continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fastest below the mean of the
    // distribution; use the symmetry relation above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let nudge = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / nudge(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / nudge(1.0 + aa * d);
        c = nudge(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / nudge(1.0 + aa * d);
        c = nudge(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        let pts: Vec<(f64, f64)> = [10.0, 50.0, 200.0, 1000.0, 5000.0]
            .iter()
            .map(|&s: &f64| (s, 0.1 * s.ln() + 0.2))
            .collect();
        let r = fit_iou_size(&pts).unwrap();
        assert!((r.beta1 - 0.1).abs() < 1e-12);
        assert!((r.beta0 - 0.2).abs() < 1e-12);
        assert_eq!(r.r_squared, 1.0);
        assert!(r.significant);
    }

    #[test]
    fn constant_iou() {
        let r = fit_iou_size(&[(1.0, 0.3), (2.0, 0.3), (9.0, 0.3)]).unwrap();
        assert_eq!(
            (r.beta1, r.r_squared, r.p_value, r.significant),
            (0.0, 0.0, 1.0, false)
        );
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_iou_size(&[(4.0, 0.1), (4.0, 0.2), (4.0, 0.9)]),
            Err(AnalysisError::DegenerateFit)
        ));
        assert!(matches!(
            fit_iou_size(&[(4.0, 0.1), (5.0, 0.2)]),
            Err(AnalysisError::TooFewPoints(2))
        ));
        assert!(matches!(
            fit_iou_size(&[(0.0, 0.1), (5.0, 0.2), (6.0, 0.3)]),
            Err(AnalysisError::NonPositiveSize)
        ));
    }

    #[test]
    fn special_functions() {
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
        // I_x(1, 1) = x and I_x(a, 1) = x^a.
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        assert!((regularized_incomplete_beta(3.0, 1.0, 0.5) - 0.125).abs() < 1e-14);
        // t distribution with one degree of freedom is Cauchy.
        let p = student_t_two_sided(1.0, 1.0);
        assert!((p - 0.5).abs() < 1e-13);
        assert_eq!(student_t_two_sided(0.0, 7.0), 1.0);
    }
}
