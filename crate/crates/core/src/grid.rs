use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on total node count so oversized grids fail with a capacity
/// error instead of an allocator abort.
pub const MAX_GRID_NODES: u128 = 1 << 30;

/// Discretization of the rescaled domain [0,1] x [-y_max, y_max].
///
/// Time is split into `n_time` cells of width `ds = 1/n_time`; each spatial
/// half-line carries `n_space` cells of width `dy = y_max / n_space`.
/// Spatial cells are `[y_k, y_{k+1}]` with `y_k = (k - n_space) * dy`, so the
/// origin is always a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_time: usize,
    pub n_space: usize,
    pub y_max: f64,
}

impl GridSpec {
    pub fn new(n_time: usize, n_space: usize, y_max: f64) -> Result<Self> {
        if n_time == 0 || n_space == 0 {
            return Err(Error::Grid("n_time and n_space must be positive".into()));
        }
        if !(y_max > 0.0) || !y_max.is_finite() {
            return Err(Error::Grid(format!("y_max must be positive, got {y_max}")));
        }
        let nodes = (n_time as u128 + 1) * (2 * n_space as u128 + 1);
        if nodes > MAX_GRID_NODES {
            return Err(Error::Capacity { nodes, max: MAX_GRID_NODES });
        }
        Ok(Self { n_time, n_space, y_max })
    }

    #[inline]
    pub fn ds(&self) -> f64 {
        1.0 / self.n_time as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.y_max / self.n_space as f64
    }

    /// Number of spatial cells (both half-lines).
    #[inline]
    pub fn space_cells(&self) -> usize {
        2 * self.n_space
    }

    /// Number of spatial nodes per time row.
    #[inline]
    pub fn space_nodes(&self) -> usize {
        2 * self.n_space + 1
    }

    /// Left edge of spatial cell `k`.
    #[inline]
    pub fn y_left(&self, k: usize) -> f64 {
        (k as f64 - self.n_space as f64) * self.dy()
    }

    /// Coordinate of spatial node `kn` (0 ..= 2*n_space).
    #[inline]
    pub fn y_node(&self, kn: usize) -> f64 {
        (kn as f64 - self.n_space as f64) * self.dy()
    }

    /// Left edge of time cell `i` on the rescaled unit interval.
    #[inline]
    pub fn s_left(&self, i: usize) -> f64 {
        i as f64 * self.ds()
    }

    /// Truncation radius so that a centered heat kernel of variance
    /// `max_kernel_var` evaluated at `x_eval` keeps its mass tail below ~1e-8.
    pub fn recommended_y_max(x_eval: f64, max_kernel_var: f64) -> f64 {
        x_eval.abs() + 6.0 * max_kernel_var.max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_steps() {
        let g = GridSpec::new(8, 4, 2.0).unwrap();
        assert_eq!(g.ds(), 0.125);
        assert_eq!(g.dy(), 0.5);
        assert_eq!(g.space_cells(), 8);
        assert_eq!(g.space_nodes(), 9);
        assert_eq!(g.y_left(0), -2.0);
        assert_eq!(g.y_node(4), 0.0);
        assert_eq!(g.y_left(7), 1.5);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(GridSpec::new(0, 4, 1.0).is_err());
        assert!(GridSpec::new(4, 0, 1.0).is_err());
        assert!(GridSpec::new(4, 4, 0.0).is_err());
        assert!(GridSpec::new(4, 4, -3.0).is_err());
    }

    #[test]
    fn rejects_oversized() {
        let err = GridSpec::new(1 << 20, 1 << 20, 1.0).unwrap_err();
        match err {
            Error::Capacity { .. } => {}
            other => panic!("expected capacity error, got {other}"),
        }
    }

    #[test]
    fn recommended_radius_covers_tail() {
        let y = GridSpec::recommended_y_max(0.0, 16.0);
        assert_eq!(y, 24.0);
        let y = GridSpec::recommended_y_max(-1.0, 1.0);
        assert_eq!(y, 7.0);
    }
}
