//! One-dimensional heat kernel and Gaussian helpers.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.5066282746310002;

/// p_t(x) = (2. pi t)^{-1/2} exp(-x^2 / (2t)) for t > 0.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(heat_kernel_unchecked(t, x))
}

#[inline]
pub(crate) fn heat_kernel_unchecked(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (SQRT_2PI * t.sqrt())
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Gaussian density with standard deviation `sd` at `x`.
#[inline]
pub fn gauss_density(sd: f64, x: f64) -> f64 {
    let z = x / sd;
    // The mollifier and delta-family evaluations dominate hot loops; the
    // tail cutoff skips exp() where the result underflows the sums anyway.
    if z * z > 120.0 {
        return 0.0;
    }
    (-0.5 * z * z).exp() / (SQRT_2PI * sd)
}

/// Mass of the heat kernel p_v over the window [a, b]:
/// Phi((b)/sqrt(v)) - Phi((a)/sqrt(v)) for the centered kernel.
#[inline]
pub fn heat_kernel_mass(v: f64, a: f64, b: f64) -> f64 {
    let sd = v.sqrt();
    std_normal_cdf(b / sd) - std_normal_cdf(a / sd)
}

/// Integral of p_v(c - y)^2 over y in [a, b], in closed form:
/// p_{2v}(0) * [Phi((b-c)/sqrt(v/2)) - Phi((a-c)/sqrt(v/2))].
#[inline]
pub fn heat_kernel_sq_mass(v: f64, c: f64, a: f64, b: f64) -> f64 {
    let peak = 1.0 / (SQRT_2PI * (2.0 * v).sqrt());
    let half_sd = (0.5 * v).sqrt();
    peak * (std_normal_cdf((b - c) / half_sd) - std_normal_cdf((a - c) / half_sd))
}

/// A checked heat-kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelEval {
    pub t: f64,
    pub x: f64,
    pub value: f64,
}

impl HeatKernelEval {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        let value = heat_kernel(t, x)?;
        Ok(Self { t, x, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // 1/sqrt(2 pi) and 1/sqrt(4 pi)
        assert!((heat_kernel(1.0, 0.0).unwrap() - 0.3989422804014327).abs() < 1e-12);
        assert!((heat_kernel(2.0, 0.0).unwrap() - 0.28209479177387814).abs() < 1e-12);
    }

    #[test]
    fn domain_error_on_nonpositive_t() {
        assert!(heat_kernel(0.0, 0.0).is_err());
        assert!(heat_kernel(-1.0, 0.5).is_err());
    }

    #[test]
    fn positivity_and_peak_bound() {
        for &t in &[0.1, 1.0, 5.0] {
            for &x in &[-3.0, -0.5, 0.0, 2.0] {
                let v = heat_kernel(t, x).unwrap();
                assert!(v > 0.0);
                assert!(v <= 1.0 / (SQRT_2PI * t.sqrt()) + 1e-15);
            }
        }
    }

    #[test]
    fn eval_struct_checks() {
        let e = HeatKernelEval::new(2.0, 1.0).unwrap();
        assert!((e.value - heat_kernel(2.0, 1.0).unwrap()).abs() == 0.0);
        assert!(HeatKernelEval::new(0.0, 0.0).is_err());
    }

    // Semigroup property: int p_t(x-y) p_s(y) dy = p_{t+s}(x), checked by
    // quadrature on a truncated grid to 1e-8.
    #[test]
    fn semigroup_property() {
        let (t, s) = (0.7, 0.4);
        for &x in &[0.0, 0.8, -1.3] {
            let lo = -12.0f64;
            let hi = 12.0f64;
            let n = 20_000usize;
            let h = (hi - lo) / n as f64;
            // Trapezoid is plenty at this resolution for a smooth integrand.
            let mut acc = 0.0;
            for i in 0..=n {
                let y = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w
                    * heat_kernel_unchecked(t, x - y)
                    * heat_kernel_unchecked(s, y);
            }
            acc *= h;
            let expect = heat_kernel_unchecked(t + s, x);
            assert!((acc - expect).abs() < 1e-8, "x={x}: {acc} vs {expect}");
        }
    }

    #[test]
    fn squared_mass_matches_quadrature() {
        let (v, c, a, b) = (0.3, 0.2, -0.5, 1.1);
        let n = 40_000usize;
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let y = a + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let p = heat_kernel_unchecked(v, c - y);
            acc += w * p * p;
        }
        acc *= h;
        assert!((acc - heat_kernel_sq_mass(v, c, a, b)).abs() < 1e-10);
    }
}
