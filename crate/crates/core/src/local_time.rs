//! Weighted local time of the sheet and the martingale quadratic variation,
//! with deterministic quadrature oracles for their expectations.
//!
//! Estimators are "bridge-smoothed": within each spatial cell the
//! delta-family factor (the mollifier p_eps(W), or phi^2(t^{3/4} W) for the
//! quadratic variation) is replaced by its exact conditional expectation
//! given the row's two node values, under the Brownian-bridge law of the
//! row (W(s, .) is a Brownian motion in y of rate s), evaluated at the cell
//! midpoint. This is the conditional expectation of the same pathwise
//! integral, so it is closer to the continuum limit in L^2 than raw node
//! sampling, and its mean hits the continuum envelope exactly at cell
//! midpoints; node sampling would need dy of order eps^2 to resolve the
//! mollifier. The time direction keeps cell-exact integrals of the
//! p^2_{1-s} weight and left-node field rows.
//!
//! The practical mollifier floor of a grid is
//! eps_floor = 2 sqrt(ds dy / 2): below it the mollified delta undersamples
//! the within-cell fluctuation of the sheet (the bridge bandwidth
//! sqrt(s dy)/2 then dominates eps).

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::{gauss_density, heat_kernel_unchecked};
use crate::phi::PhiSpec;
use crate::quad::{
    adaptive, adaptive_quartic_right, adaptive_sqrt_left, gl8_panels,
};
use crate::sheet::SheetSample;
use crate::weights::{KernelShape, WeightTable};

/// Mollified weighted local time over [0, r].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub epsilon: f64,
    pub r: f64,
    pub value: f64,
    pub grid: GridSpec,
}

/// Quadratic variation of the rescaled-solution martingale at radius r.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QvEstimate {
    pub t: f64,
    pub r: f64,
    pub x: f64,
    pub value: f64,
}

/// Mollifier width below which the grid cannot resolve the delta family.
pub fn epsilon_floor(grid: &GridSpec) -> f64 {
    2.0 * (grid.ds() * grid.dy() * 0.5).sqrt()
}

/// Prepared local-time estimator; the p^2 weight table is built once per
/// (grid, shape).
#[derive(Debug, Clone)]
pub struct LocalTimeEstimator {
    pub grid: GridSpec,
    table: Arc<WeightTable>,
}

impl LocalTimeEstimator {
    /// Standard weight p^2_{1-s}(y).
    pub fn new(grid: GridSpec) -> Self {
        Self::with_shape(grid, KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: None })
    }

    /// Custom weight kernel (window-averaged or band-restricted variants).
    pub fn with_shape(grid: GridSpec, shape: KernelShape) -> Self {
        Self { grid, table: WeightTable::cached(grid, shape) }
    }

    /// Generic bridge-smoothed sum: Sum_cells weight * f(mu, v), where mu is
    /// the four-corner node average of the cell and v the exact variance
    /// completion
    ///   v_fill = s dy/4 + ds |y_in|/4 + 3 ds dy / 16,
    /// chosen so Var(mu) + v_fill equals the cell-center variance
    /// (s + ds/2)(|y_in| + dy/2). A Gaussian functional f evaluated with
    /// this completion therefore has expectation exactly equal to the
    /// continuum envelope at the cell center: the estimator's mean is a
    /// midpoint rule with O(ds^2 + dy^2) bias, and the pathwise value is a
    /// smoothed evaluation whose bandwidth floor is set by the grid, not by
    /// the mollifier.
    fn accumulate<F: Fn(f64, f64) -> f64>(&self, sheet: &SheetSample, r: f64, f: F) -> f64 {
        let grid = self.grid;
        let cells = grid.space_cells();
        let mid = grid.n_space;
        let dy = grid.dy();
        let ds = grid.ds();
        let mut acc = 0.0;
        for i in 0..grid.n_time {
            let s0 = grid.s_left(i);
            if s0 >= r {
                break;
            }
            // Straddled final cell: linear clip of the cell weight.
            let frac = ((r - s0) / ds).min(1.0);
            let weights = self.table.cell_int_row(i);
            let lo = sheet.values_row(i);
            let hi = sheet.values_row(i + 1);
            let mut row = 0.0;
            for k in 0..cells {
                let w = weights[k];
                if w == 0.0 {
                    continue;
                }
                let y_in = if k >= mid {
                    (k - mid) as f64 * dy
                } else {
                    (mid - 1 - k) as f64 * dy
                };
                let mu = 0.25 * (lo[k] + lo[k + 1] + hi[k] + hi[k + 1]);
                let v_fill = s0 * dy * 0.25 + ds * y_in * 0.25 + 0.1875 * ds * dy;
                row += w * f(mu, v_fill);
            }
            acc += frac * row;
        }
        acc
    }

    /// L^eps over [0, r] for this sheet.
    pub fn weighted_local_time(
        &self,
        sheet: &SheetSample,
        epsilon: f64,
        r: f64,
    ) -> Result<LocalTimeEstimate> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("r must lie in [0,1], got {r}")));
        }
        let e2 = epsilon * epsilon;
        let value =
            self.accumulate(sheet, r, |mu, v| gauss_density((e2 + v).sqrt(), mu));
        Ok(LocalTimeEstimate { epsilon, r, value, grid: self.grid })
    }

    /// <M_t(., x)>_r = t^{3/4} Sum weight * phi^2(t^{3/4} W).
    pub fn quadratic_variation(
        &self,
        sheet: &SheetSample,
        phi: &PhiSpec,
        t: f64,
        r: f64,
    ) -> Result<f64> {
        if phi.l2_norm_sq().is_none() {
            return Err(Error::Precondition(
                "quadratic variation requires phi with finite L2 norm".into(),
            ));
        }
        if !(t > 0.0) {
            return Err(Error::Domain(format!("t must be positive, got {t}")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("r must lie in [0,1], got {r}")));
        }
        let scale = t.powf(0.75);
        let value =
            self.accumulate(sheet, r, |mu, v| phi.mean_square_gaussian(scale, mu, v));
        Ok(scale * value)
    }
}

/// Mollified weighted local time with the standard p^2 weight.
pub fn weighted_local_time(
    sheet: &SheetSample,
    epsilon: f64,
    r: f64,
) -> Result<LocalTimeEstimate> {
    LocalTimeEstimator::new(sheet.grid).weighted_local_time(sheet, epsilon, r)
}

/// Quadratic variation of the rescaled martingale at (t, x), radius r.
pub fn quadratic_variation(
    sheet: &SheetSample,
    phi: &PhiSpec,
    t: f64,
    x: f64,
    r: f64,
) -> Result<QvEstimate> {
    let est = LocalTimeEstimator::with_shape(
        sheet.grid,
        KernelShape::Heat { time_scale: 1.0, center: x / t.sqrt(), y_clip: None },
    );
    let value = est.quadratic_variation(sheet, phi, t, r)?;
    Ok(QvEstimate { t, r, x, value })
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

const TWO_PI: f64 = std::f64::consts::TAU;

/// E L_{0,r} = int_0^r int p^2_{1-s}(y) (2 pi s |y|)^{-1/2} dy ds, tensor
/// adaptive with sqrt substitutions at every singular edge (y -> 0, s -> 0,
/// s -> 1). Absolute tolerance 1e-6.
pub fn expected_local_time(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("r must lie in [0,1], got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    // u = 1 - s is carried exactly through the endpoint substitution.
    let inner = |s: f64, u: f64| -> f64 {
        if u <= 0.0 || s <= 0.0 {
            return 0.0;
        }
        // The squared kernel confines the mass to |y| <~ sqrt(u); the cut
        // must scale with it or the substituted spike evades the probes.
        let y_cut = 9.0 * u.sqrt();
        let f = |y: f64| {
            let p = heat_kernel_unchecked(u, y);
            p * p * (TWO_PI * s * y).powf(-0.5)
        };
        2.0 * adaptive_sqrt_left(f, 0.0, y_cut, 2e-8)
    };
    let mid = 0.5 * r;
    let left = adaptive_sqrt_left(|s| inner(s, 1.0 - s), 0.0, mid, 2e-7);
    let right = if r == 1.0 {
        adaptive_quartic_right(|d| inner(1.0 - d, d), mid, 1.0, 2e-7)
    } else {
        adaptive(|s| inner(s, 1.0 - s), mid, r, 2e-7)
    };
    Ok(left + right)
}

/// Second, independent quadrature route: fixed-order Gauss-Legendre panels
/// after the substitutions y = u^2 on the half-line, s = q^2 on [0, 1/2]
/// and s = 1 - v^4 on [1/2, r].
pub fn expected_local_time_substituted(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("r must lie in [0,1], got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let inner = |s: f64, w: f64| -> f64 {
        if w <= 0.0 || s <= 0.0 {
            return 0.0;
        }
        // y = u^2: 2 int_0^inf p^2_w(u^2) (2 pi s)^{-1/2} * 2 du
        let u_cut = (9.0 * w.sqrt()).sqrt();
        let g =
            |u: f64| 2.0 * 2.0 * heat_kernel_unchecked(w, u * u).powi(2) * (TWO_PI * s).powf(-0.5);
        gl8_panels(g, 0.0, u_cut, 48)
    };
    let mid = 0.5 * r.min(1.0);
    // s = q^2 on [0, mid]
    let left = gl8_panels(|q| 2.0 * q * inner(q * q, 1.0 - q * q), 0.0, mid.sqrt(), 48);
    // s = 1 - v^4 on [mid, r]; the distance v^4 enters the kernel exactly
    let v_lo = (1.0 - r).powf(0.25);
    let v_hi = (1.0 - mid).powf(0.25);
    let right = gl8_panels(
        |v| {
            let w = v * v * v * v;
            4.0 * v * v * v * inner(1.0 - w, w)
        },
        v_lo,
        v_hi,
        48,
    );
    Ok(left + right)
}

/// E L^eps_{0,r}: the epsilon-smoothed envelope
/// int int p^2_{1-s}(y) (2 pi (s|y| + eps^2))^{-1/2}.
pub fn expected_local_time_mollified(r: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("r must lie in [0,1], got {r}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let e2 = epsilon * epsilon;
    let inner = |s: f64, u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let y_cut = 9.0 * u.sqrt();
        let f = |y: f64| {
            let p = heat_kernel_unchecked(u, y);
            p * p * (TWO_PI * (s * y + e2)).powf(-0.5)
        };
        2.0 * adaptive_sqrt_left(f, 0.0, y_cut, 2e-8)
    };
    let mid = 0.5 * r;
    let left = adaptive(|s| inner(s, 1.0 - s), 0.0, mid, 2e-7);
    let right = if r == 1.0 {
        adaptive_quartic_right(|d| inner(1.0 - d, d), mid, 1.0, 2e-7)
    } else {
        adaptive(|s| inner(s, 1.0 - s), mid, r, 2e-7)
    };
    Ok(left + right)
}

/// Expectation of a weighted delta functional
/// int_0^1 int kappa(s,y)^2 (2 pi (s|y| + eps^2 + s dy/4))^{-1/2} dy ds
/// for any kernel shape. eps = 0 and bridge_dy = 0 give the sharp continuum
/// value; nonzero arguments reproduce the mean of the bridge-smoothed
/// estimator at mollification eps on a grid of spatial step bridge_dy.
pub fn expected_delta_functional(
    shape: KernelShape,
    eps: f64,
    bridge_dy: f64,
    tol: f64,
) -> f64 {
    let e2 = eps * eps;
    let dy4 = bridge_dy * 0.25;
    let ksq = |one_minus_s: f64, y: f64| -> f64 {
        match shape {
            KernelShape::Heat { time_scale, center, y_clip } => {
                if let Some(clip) = y_clip {
                    if y.abs() > clip {
                        return 0.0;
                    }
                }
                let v = time_scale * one_minus_s;
                if v <= 0.0 {
                    return 0.0;
                }
                let p = heat_kernel_unchecked(v, center - y);
                p * p
            }
            KernelShape::Window { half_width, time_scale } => {
                let v = time_scale * one_minus_s;
                if v <= 1e-300 {
                    return if y.abs() < half_width { 1.0 } else { 0.0 };
                }
                let sd = v.sqrt();
                let k = crate::kernels::std_normal_cdf((half_width - y) / sd)
                    - crate::kernels::std_normal_cdf((-half_width - y) / sd);
                k * k
            }
            KernelShape::Band { half_width } => {
                if y.abs() <= half_width {
                    1.0
                } else {
                    0.0
                }
            }
        }
    };
    let inner = |s: f64, one_minus_s: f64| -> f64 {
        // Kernel-width-proportional cuts keep the substituted spike visible
        // to the adaptive probes for every s.
        let y_cut = match shape {
            KernelShape::Heat { time_scale, center, y_clip } => {
                let base = center.abs() + 9.0 * (time_scale * one_minus_s).sqrt();
                y_clip.map_or(base, |c| base.min(c))
            }
            KernelShape::Window { half_width, time_scale } => {
                half_width + 9.0 * (time_scale * one_minus_s).sqrt()
            }
            KernelShape::Band { half_width } => half_width,
        };
        if y_cut <= 0.0 {
            return 0.0;
        }
        let env = |y: f64| (TWO_PI * (s * y + e2 + s * dy4)).powf(-0.5);
        adaptive_sqrt_left(|y| ksq(one_minus_s, y) * env(y), 0.0, y_cut, tol * 0.02)
            + adaptive_sqrt_left(|y| ksq(one_minus_s, -y) * env(y), 0.0, y_cut, tol * 0.02)
    };
    adaptive_sqrt_left(|s| inner(s, 1.0 - s), 0.0, 0.5, tol * 0.2)
        + adaptive_quartic_right(|d| inner(1.0 - d, d), 0.5, 1.0, tol * 0.2)
}

/// Joint density at (0,0) of (W(s,y), W(s',y')) for same-sign y, y':
/// (2 pi)^{-1} det^{-1/2} with det = s y s' y' - (min(s,s') min(y,y'))^2.
fn same_sign_density(s: f64, y: f64, sp: f64, yp: f64) -> f64 {
    let det = s * y * sp * yp - (s.min(sp) * y.min(yp)).powi(2);
    if det <= 0.0 {
        return 0.0;
    }
    1.0 / (TWO_PI * det.sqrt())
}

/// E[L_{0,1}^2]: deterministic 4D quadrature at relative tolerance 1e-3.
///
/// Over opposite-sign pairs the joint density factorizes, so that part is
/// 2 A^2 with A the half-line first moment. The same-sign part is a nested
/// adaptive integral over {s < s'} split along y < y' / y > y', with sqrt
/// substitutions at the y -> 0 and s' -> 1 edges (the proof's change of
/// variables z = s y).
pub fn local_time_second_moment_oracle() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let a_half = expected_local_time(1.0).unwrap() * 0.5;
        let opposite = 2.0 * a_half * a_half;

        // Squared kernels are evaluated from the time distances directly.
        let p2u = |u: f64, y: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let p = heat_kernel_unchecked(u, y);
            p * p
        };
        // Inner double integral over 0 < y, y' with the ordering split;
        // us = 1 - s, usp = 1 - s'. All ranges are kernel-limited.
        let pair = |s: f64, us: f64, sp: f64, usp: f64| -> f64 {
            let cut_y = 9.0 * us.sqrt();
            let cut_yp = 9.0 * usp.sqrt();
            // region y < y'
            let r1 = adaptive(
                &|yp: f64| {
                    if yp <= 0.0 {
                        return 0.0;
                    }
                    let w_outer = p2u(usp, yp);
                    if w_outer == 0.0 {
                        return 0.0;
                    }
                    w_outer
                        * adaptive_sqrt_left(
                            |y| p2u(us, y) * same_sign_density(s, y, sp, yp),
                            0.0,
                            yp.min(cut_y),
                            2e-6,
                        )
                },
                0.0,
                cut_yp,
                1e-5,
            );
            // region y > y'
            let r2 = adaptive(
                &|y: f64| {
                    if y <= 0.0 {
                        return 0.0;
                    }
                    let w_outer = p2u(us, y);
                    if w_outer == 0.0 {
                        return 0.0;
                    }
                    w_outer
                        * adaptive_sqrt_left(
                            |yp| p2u(usp, yp) * same_sign_density(s, y, sp, yp),
                            0.0,
                            y.min(cut_yp),
                            2e-6,
                        )
                },
                0.0,
                cut_y,
                1e-5,
            );
            r1 + r2
        };
        // 2 x ordered time region {s < s'}; s' -> 1 is the singular edge.
        let s_outer = |s: f64, us: f64| -> f64 {
            if s <= 0.0 || us <= 0.0 {
                return 0.0;
            }
            let mid = 0.5 * (s + 1.0);
            // Near-diagonal boundary layer: integrate in the gap s' - s.
            adaptive_sqrt_left(|g| pair(s, us, s + g, us - g), 0.0, mid - s, 4e-5)
                + adaptive_quartic_right(&|d| pair(s, us, 1.0 - d, d), mid, 1.0, 4e-5)
        };
        let ordered = adaptive_sqrt_left(|s| s_outer(s, 1.0 - s), 0.0, 0.5, 2e-4)
            + adaptive_quartic_right(|d| s_outer(1.0 - d, d), 0.5, 1.0, 2e-4);
        // Same-sign carries both (+,+) and (-,-); time ordering doubles.
        let same = 2.0 * 2.0 * ordered;
        opposite + same
    })
}
