//! Coefficient-function catalog.
//!
//! Every entry knows how to evaluate itself, whether it has a finite L²
//! norm, and the exact second moment E[phi(Z)^2] for Z ~ N(0, v). The last
//! one is what the deterministic variance oracles integrate.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::{gauss_density, std_normal_cdf, SQRT_2PI};

/// Piecewise-linear function with compact support (zero outside the table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFunction {
    /// Strictly increasing knots (x, value).
    pub points: Vec<(f64, f64)>,
}

impl TableFunction {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Precondition("table needs at least two knots".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Precondition("table knots must be strictly increasing".into()));
            }
        }
        if points.iter().any(|&(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::Precondition("table entries must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x < pts[0].0 || x > pts[pts.len() - 1].0 {
            return 0.0;
        }
        let idx = pts.partition_point(|&(xk, _)| xk <= x).min(pts.len() - 1);
        let (x0, v0) = pts[idx - 1];
        let (x1, v1) = pts[idx];
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Exact integral of the squared table.
    pub fn l2_norm_sq(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let (x0, a) = w[0];
                let (x1, b) = w[1];
                // int of (linear from a to b)^2 over a segment of length h
                (x1 - x0) * (a * a + a * b + b * b) / 3.0
            })
            .sum()
    }

    pub fn max_slope(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }

    /// E[f(Z)^2] for Z ~ N(0, v), exact per segment (truncated Gaussian
    /// moments of the piecewise-quadratic square).
    pub fn mean_square_at_variance(&self, v: f64) -> f64 {
        if v <= 0.0 {
            let x = self.eval(0.0);
            return x * x;
        }
        let sd = v.sqrt();
        let dens = |x: f64| gauss_density(sd, x);
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let (x0, a) = w[0];
            let (x1, b) = w[1];
            let slope = (b - a) / (x1 - x0);
            // f(x) = a + slope (x - x0) = (a - slope x0) + slope x =: c0 + c1 x
            let c0 = a - slope * x0;
            let c1 = slope;
            let m0 = std_normal_cdf(x1 / sd) - std_normal_cdf(x0 / sd);
            let m1 = v * (dens(x0) - dens(x1));
            let m2 = v * (m0 + x0 * dens(x0) - x1 * dens(x1));
            acc += c0 * c0 * m0 + 2.0 * c0 * c1 * m1 + c1 * c1 * m2;
        }
        acc
    }
}

/// Catalog entry for the coefficient function phi (or the nonlinear sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhiSpec {
    /// phi(x) = c
    Constant(f64),
    /// phi(x) = c_plus |x|^alpha for x > 0, c_minus |x|^alpha for x < 0
    HomogeneousPower { alpha: f64, c_plus: f64, c_minus: f64 },
    /// phi(x) = exp(-x^2/2); L2 norm squared sqrt(pi)
    GaussianBump,
    /// phi(x) = 1_{[a,b]}(x); L2 norm squared b - a
    Indicator { a: f64, b: f64 },
    Table(TableFunction),
}

impl PhiSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiSpec::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::Precondition("constant must be finite".into()));
                }
            }
            PhiSpec::HomogeneousPower { alpha, c_plus, c_minus } => {
                if !(*alpha >= 0.0) {
                    return Err(Error::Precondition(format!(
                        "homogeneous power needs alpha >= 0, got {alpha}"
                    )));
                }
                if !c_plus.is_finite() || !c_minus.is_finite() {
                    return Err(Error::Precondition("homogeneous coefficients must be finite".into()));
                }
            }
            PhiSpec::GaussianBump => {}
            PhiSpec::Indicator { a, b } => {
                if !(b > a) {
                    return Err(Error::Precondition(format!("indicator needs b > a, got [{a}, {b}]")));
                }
            }
            PhiSpec::Table(t) => {
                TableFunction::new(t.points.clone())?;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PhiSpec::Constant(c) => *c,
            PhiSpec::HomogeneousPower { alpha, c_plus, c_minus } => {
                if x == 0.0 {
                    return 0.0;
                }
                let c = if x > 0.0 { *c_plus } else { *c_minus };
                if *alpha == 0.0 {
                    c
                } else if *alpha == 1.0 {
                    c * x.abs()
                } else {
                    c * x.abs().powf(*alpha)
                }
            }
            PhiSpec::GaussianBump => {
                let q = 0.5 * x * x;
                if q > 120.0 {
                    0.0
                } else {
                    (-q).exp()
                }
            }
            PhiSpec::Indicator { a, b } => {
                if x >= *a && x <= *b {
                    1.0
                } else {
                    0.0
                }
            }
            PhiSpec::Table(t) => t.eval(x),
        }
    }

    /// Whether the Walsh integrand actually reads the field (Constant does not).
    #[inline]
    pub fn uses_field(&self) -> bool {
        !matches!(self, PhiSpec::Constant(_))
    }

    /// Analytic squared L2 norm where finite.
    pub fn l2_norm_sq(&self) -> Option<f64> {
        match self {
            PhiSpec::Constant(_) | PhiSpec::HomogeneousPower { .. } => None,
            PhiSpec::GaussianBump => Some(std::f64::consts::PI.sqrt()),
            PhiSpec::Indicator { a, b } => Some(b - a),
            PhiSpec::Table(t) => Some(t.l2_norm_sq()),
        }
    }

    /// Representative exponent p < 2 with phi in L^p, where applicable.
    pub fn lp_exponent(&self) -> Option<f64> {
        match self {
            PhiSpec::GaussianBump | PhiSpec::Indicator { .. } | PhiSpec::Table(_) => Some(1.0),
            _ => None,
        }
    }

    /// E[phi(Z)^2] for Z ~ N(0, v). Exact for every catalog kind.
    pub fn mean_square_at_variance(&self, v: f64) -> f64 {
        if v <= 0.0 {
            let x = self.eval(0.0);
            return x * x;
        }
        match self {
            PhiSpec::Constant(c) => c * c,
            PhiSpec::HomogeneousPower { alpha, c_plus, c_minus } => {
                // E|Z_v|^{2a} = v^a 2^a Gamma(a + 1/2)/sqrt(pi), each sign
                // carrying half the mass.
                let a = *alpha;
                let abs_moment = v.powf(a) * 2.0f64.powf(a) * gamma(a + 0.5)
                    / std::f64::consts::PI.sqrt();
                0.5 * (c_plus * c_plus + c_minus * c_minus) * abs_moment
            }
            PhiSpec::GaussianBump => (1.0 + 2.0 * v).powf(-0.5),
            PhiSpec::Indicator { a, b } => {
                let sd = v.sqrt();
                std_normal_cdf(b / sd) - std_normal_cdf(a / sd)
            }
            PhiSpec::Table(t) => t.mean_square_at_variance(v),
        }
    }

    /// Conditional second moment E[phi(scale W)^2 | W ~ N(mu, v)], used by
    /// the bridge-smoothed quadratic-variation estimator. Exact for the L2
    /// catalog kinds.
    pub fn mean_square_gaussian(&self, scale: f64, mu: f64, v: f64) -> f64 {
        if v <= 0.0 {
            let x = self.eval(scale * mu);
            return x * x;
        }
        match self {
            PhiSpec::Constant(c) => c * c,
            PhiSpec::GaussianBump => {
                // E exp(-a X^2), X ~ N(mu, s2), a = scale^2
                let a = scale * scale;
                let s2 = v;
                let denom = 1.0 + 2.0 * a * s2;
                let q = a * mu * mu / denom;
                if q > 120.0 {
                    0.0
                } else {
                    (-q).exp() / denom.sqrt()
                }
            }
            PhiSpec::Indicator { a, b } => {
                let sd = v.sqrt();
                std_normal_cdf((b / scale - mu) / sd) - std_normal_cdf((a / scale - mu) / sd)
            }
            PhiSpec::Table(t) => {
                // Shift the Gaussian into the table's coordinates.
                let shifted: Vec<(f64, f64)> = t
                    .points
                    .iter()
                    .map(|&(x, val)| (x / scale - mu, val))
                    .collect();
                let shifted_table = TableFunction { points: shifted };
                shifted_table.mean_square_at_variance(v)
            }
            PhiSpec::HomogeneousPower { .. } => {
                // Not needed on the L2-only paths; numeric fallback.
                let sd = v.sqrt();
                crate::quad::gl8_panels(
                    |z| {
                        let p = self.eval(scale * (mu + sd * z));
                        p * p * (-0.5 * z * z).exp() / SQRT_2PI
                    },
                    -8.0,
                    8.0,
                    32,
                )
            }
        }
    }

    /// Lipschitz acceptance for the nonlinear solver.
    pub fn is_lipschitz(&self) -> bool {
        match self {
            PhiSpec::Constant(_) | PhiSpec::GaussianBump => true,
            PhiSpec::HomogeneousPower { alpha, .. } => *alpha == 1.0,
            PhiSpec::Indicator { .. } => false,
            PhiSpec::Table(t) => t.max_slope().is_finite(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_norms() {
        assert!((PhiSpec::GaussianBump.l2_norm_sq().unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(PhiSpec::Indicator { a: 0.0, b: 1.0 }.l2_norm_sq().unwrap(), 1.0);
        assert!(PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: 1.0 }
            .l2_norm_sq()
            .is_none());
        assert!(PhiSpec::Constant(1.0).l2_norm_sq().is_none());
    }

    #[test]
    fn homogeneous_eval_signs() {
        let hp = PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 2.0, c_minus: -1.0 };
        assert_eq!(hp.eval(3.0), 6.0);
        assert_eq!(hp.eval(-3.0), -3.0);
        assert_eq!(hp.eval(0.0), 0.0);
        // alpha = 1, c+ = 1, c- = -1 is the identity
        let ident = PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: -1.0 };
        assert_eq!(ident.eval(2.5), 2.5);
        assert_eq!(ident.eval(-2.5), -2.5);
    }

    #[test]
    fn mean_square_matches_quadrature() {
        let v = 0.7;
        for phi in [
            PhiSpec::GaussianBump,
            PhiSpec::Indicator { a: -0.3, b: 0.9 },
            PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: 1.0 },
            PhiSpec::HomogeneousPower { alpha: 0.5, c_plus: 2.0, c_minus: 0.0 },
            PhiSpec::Table(
                TableFunction::new(vec![(-1.0, 0.0), (0.0, 2.0), (1.5, 0.0)]).unwrap(),
            ),
        ] {
            let direct = phi.mean_square_at_variance(v);
            let sd = v.sqrt();
            let quad = crate::quad::adaptive(
                |z| {
                    let p = phi.eval(sd * z);
                    p * p * (-0.5 * z * z).exp() / SQRT_2PI
                },
                -10.0,
                10.0,
                1e-10,
            );
            assert!(
                (direct - quad).abs() < 1e-7,
                "{phi:?}: {direct} vs {quad}"
            );
        }
        // alpha = 1 gives E|Z_v|^2 = v exactly
        let hp = PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: 1.0 };
        assert!((hp.mean_square_at_variance(0.37) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn conditional_mean_square_matches_quadrature() {
        let (scale, mu, v) = (3.0, 0.21, 0.04);
        for phi in [
            PhiSpec::GaussianBump,
            PhiSpec::Indicator { a: 0.0, b: 1.0 },
            PhiSpec::Table(TableFunction::new(vec![(-0.5, 1.0), (0.5, 1.0), (0.6, 0.0)]).unwrap()),
        ] {
            let direct = phi.mean_square_gaussian(scale, mu, v);
            let sd = v.sqrt();
            // Fixed panels: adaptive probing can miss compact supports.
            let quad = crate::quad::gl8_panels(
                |z| {
                    let p = phi.eval(scale * (mu + sd * z));
                    p * p * (-0.5 * z * z).exp() / SQRT_2PI
                },
                -10.0,
                10.0,
                400,
            );
            // Panel quadrature carries O(1e-4) edge error for the
            // discontinuous entries; the formulas under test are exact.
            assert!((direct - quad).abs() < 1e-3, "{phi:?}: {direct} vs {quad}");
        }
    }

    #[test]
    fn lipschitz_catalog() {
        assert!(PhiSpec::Constant(0.0).is_lipschitz());
        assert!(PhiSpec::GaussianBump.is_lipschitz());
        assert!(PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: -1.0 }.is_lipschitz());
        assert!(!PhiSpec::HomogeneousPower { alpha: 0.5, c_plus: 1.0, c_minus: 1.0 }.is_lipschitz());
        assert!(!PhiSpec::Indicator { a: 0.0, b: 1.0 }.is_lipschitz());
    }

    #[test]
    fn table_l2_and_eval() {
        let t = TableFunction::new(vec![(0.0, 2.0), (1.0, 2.0)]).unwrap();
        assert_eq!(t.l2_norm_sq(), 4.0);
        assert_eq!(t.eval(0.5), 2.0);
        assert_eq!(t.eval(-0.1), 0.0);
        assert!(TableFunction::new(vec![(0.0, 1.0)]).is_err());
        assert!(TableFunction::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }
}
