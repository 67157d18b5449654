//! Cell-exact kernel weight tables.
//!
//! For a deterministic kernel kappa(s, y) on [0,1] x [-y_max, y_max] the
//! table stores, per grid cell, the exact integral of kappa^2 over the cell.
//! Walsh sums use sqrt(cell_int / (ds dy)) as the coefficient multiplying
//! the cell increment, which makes the second moment of the discretized
//! stochastic integral exactly the truncated continuum integral of kappa^2;
//! local-time quadratures use the cell integrals directly as weights.
//! The time integral is evaluated with Gauss-Legendre after the
//! substitution w^2 = 1 - s, which absorbs the (1-s)^{-1/2} endpoint
//! singularity of squared heat kernels.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::grid::GridSpec;
use crate::kernels::{heat_kernel_sq_mass, std_normal_cdf};
use crate::quad::GL8;

/// Kernel families appearing in the integrals under study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelShape {
    /// kappa(s, y) = p_{v(s)}(center - y), v(s) = time_scale * (1 - s),
    /// optionally restricted to |y| <= y_clip.
    Heat { time_scale: f64, center: f64, y_clip: Option<f64> },
    /// kappa(s, y) = Phi((half_width - y)/sqrt(v)) - Phi((-half_width - y)/sqrt(v)),
    /// v(s) = time_scale * (1 - s): the window-averaged heat kernel.
    Window { half_width: f64, time_scale: f64 },
    /// kappa(s, y) = 1_{|y| <= half_width}.
    Band { half_width: f64 },
}

impl KernelShape {
    fn cache_key(&self, grid: &GridSpec) -> (u8, u64, u64, u64, usize, usize, u64) {
        let (tag, a, b, c) = match *self {
            KernelShape::Heat { time_scale, center, y_clip } => {
                (0u8, time_scale.to_bits(), center.to_bits(), y_clip.unwrap_or(f64::INFINITY).to_bits())
            }
            KernelShape::Window { half_width, time_scale } => {
                (1u8, half_width.to_bits(), time_scale.to_bits(), 0)
            }
            KernelShape::Band { half_width } => (2u8, half_width.to_bits(), 0, 0),
        };
        (tag, a, b, c, grid.n_time, grid.n_space, grid.y_max.to_bits())
    }

    /// Integral of kappa(s, y)^2 over y in [a, b] at fixed s (v = variance).
    fn y_integral(&self, v: f64, a: f64, b: f64) -> f64 {
        match *self {
            KernelShape::Heat { center, y_clip, .. } => {
                let (lo, hi) = match y_clip {
                    Some(clip) => (a.max(-clip), b.min(clip)),
                    None => (a, b),
                };
                if hi <= lo {
                    return 0.0;
                }
                if v <= 0.0 {
                    return 0.0;
                }
                heat_kernel_sq_mass(v, center, lo, hi)
            }
            KernelShape::Window { half_width, .. } => {
                if v <= 1e-300 {
                    // Degenerate limit: indicator of [-R, R].
                    let lo = a.max(-half_width);
                    let hi = b.min(half_width);
                    return (hi - lo).max(0.0);
                }
                let sd = v.sqrt();
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                GL8.iter()
                    .map(|&(x, w)| {
                        let y = mid + half * x;
                        let k = std_normal_cdf((half_width - y) / sd)
                            - std_normal_cdf((-half_width - y) / sd);
                        w * k * k
                    })
                    .sum::<f64>()
                    * half
            }
            KernelShape::Band { half_width } => {
                let lo = a.max(-half_width);
                let hi = b.min(half_width);
                (hi - lo).max(0.0)
            }
        }
    }
}

/// Per-cell integrals of kappa^2 on a grid.
#[derive(Debug)]
pub struct WeightTable {
    pub grid: GridSpec,
    /// [time cell i][space cell k]: integral of kappa^2 over the cell.
    cell_int: Vec<f64>,
    /// sqrt(cell_int / (ds dy)): Walsh coefficient per cell.
    coef: Vec<f64>,
}

impl WeightTable {
    pub fn build(grid: GridSpec, shape: KernelShape) -> Self {
        let n = grid.n_time;
        let cells = grid.space_cells();
        let ds = grid.ds();
        let dy = grid.dy();
        let time_scale = match shape {
            KernelShape::Heat { time_scale, .. } | KernelShape::Window { time_scale, .. } => {
                time_scale
            }
            KernelShape::Band { .. } => 1.0,
        };
        let mut cell_int = vec![0.0; n * cells];
        for i in 0..n {
            let s0 = grid.s_left(i);
            let s1 = grid.s_left(i + 1);
            // w = sqrt(1 - s); the final cell has w_lo = 0.
            let w_lo = (1.0 - s1).max(0.0).sqrt();
            let w_hi = (1.0 - s0).sqrt();
            let mid = 0.5 * (w_lo + w_hi);
            let half = 0.5 * (w_hi - w_lo);
            let row = &mut cell_int[i * cells..(i + 1) * cells];
            for (k, slot) in row.iter_mut().enumerate() {
                let a = grid.y_left(k);
                let b = a + dy;
                let mut acc = 0.0;
                for &(x, wq) in GL8.iter() {
                    let w = mid + half * x;
                    let v = time_scale * w * w;
                    acc += wq * 2.0 * w * shape.y_integral(v, a, b);
                }
                *slot = acc * half;
            }
        }
        let norm = 1.0 / (ds * dy);
        let coef = cell_int.iter().map(|&c| (c * norm).max(0.0).sqrt()).collect();
        Self { grid, cell_int, coef }
    }

    /// Process-wide memoized build (tables are deterministic per
    /// (grid, shape) and reused across replicates).
    pub fn cached(grid: GridSpec, shape: KernelShape) -> Arc<WeightTable> {
        static CACHE: OnceLock<Mutex<HashMap<(u8, u64, u64, u64, usize, usize, u64), Arc<WeightTable>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = shape.cache_key(&grid);
        let mut map = cache.lock().unwrap();
        if let Some(t) = map.get(&key) {
            return Arc::clone(t);
        }
        if map.len() >= 64 {
            map.clear();
        }
        let table = Arc::new(WeightTable::build(grid, shape));
        map.insert(key, Arc::clone(&table));
        table
    }

    #[inline]
    pub fn coef_row(&self, i: usize) -> &[f64] {
        let c = self.grid.space_cells();
        &self.coef[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn cell_int_row(&self, i: usize) -> &[f64] {
        let c = self.grid.space_cells();
        &self.cell_int[i * c..(i + 1) * c]
    }

    /// Total integral of kappa^2 over [0, 1] x [-y_max, y_max].
    pub fn total(&self) -> f64 {
        self.cell_int.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;

    // Sum of the heat-kernel cell integrals must reproduce
    // int_0^1 p_{2(1-s)}(0) ds = 1/sqrt(pi) (up to spatial truncation).
    #[test]
    fn heat_total_matches_closed_form() {
        let grid = GridSpec::new(64, 64, 7.0).unwrap();
        let table = WeightTable::build(
            grid,
            KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: None },
        );
        let expect = 1.0 / std::f64::consts::PI.sqrt();
        assert!(
            (table.total() - expect).abs() < 1e-8,
            "{} vs {}",
            table.total(),
            expect
        );
    }

    #[test]
    fn heat_total_with_horizon_scale() {
        // time_scale = t gives int_0^1 p_{2t(1-s)}(0) ds = 2 sqrt(t) /
        // sqrt(4 pi t) / ... = 1/sqrt(pi t); multiplied by t by the caller.
        let grid = GridSpec::new(64, 96, 14.0).unwrap();
        let t = 4.0;
        let table = WeightTable::build(
            grid,
            KernelShape::Heat { time_scale: t, center: 0.5, y_clip: None },
        );
        let expect = 1.0 / (std::f64::consts::PI * t).sqrt();
        assert!((table.total() - expect).abs() < 1e-8);
    }

    #[test]
    fn band_is_exact() {
        let grid = GridSpec::new(4, 5, 2.5).unwrap();
        let table = WeightTable::build(grid, KernelShape::Band { half_width: 1.0 });
        assert!((table.total() - 2.0).abs() < 1e-12);
        // A cell entirely outside the band carries zero weight.
        assert_eq!(table.cell_int_row(0)[0], 0.0);
    }

    #[test]
    fn window_total_matches_quadrature() {
        let grid = GridSpec::new(48, 48, 9.0).unwrap();
        let (r, t) = (2.0, 1.5);
        let table = WeightTable::build(grid, KernelShape::Window { half_width: r, time_scale: t });
        let expect = adaptive(
            |s| {
                let v = t * (1.0 - s);
                adaptive(
                    |y| {
                        if v <= 0.0 {
                            return 0.0;
                        }
                        let sd = v.sqrt();
                        let k = std_normal_cdf((r - y) / sd) - std_normal_cdf((-r - y) / sd);
                        k * k
                    },
                    -9.0,
                    9.0,
                    1e-10,
                )
            },
            0.0,
            1.0,
            1e-8,
        );
        assert!(
            (table.total() - expect).abs() < 2e-6,
            "{} vs {}",
            table.total(),
            expect
        );
    }

    #[test]
    fn cache_returns_same_table() {
        let grid = GridSpec::new(8, 8, 2.0).unwrap();
        let shape = KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: None };
        let a = WeightTable::cached(grid, shape);
        let b = WeightTable::cached(grid, shape);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
