//! Two-parameter Wiener sheet on the rescaled grid.
//!
//! The sheet lives on [0,1] x [-y_max, y_max]. Cell increments are i.i.d.
//! N(0, ds*dy); node values are rectangle sums of increments, accumulated
//! outward from the pinned axes W(0, .) = W(., 0) = 0. Increments over
//! opposite-sign cells never share a rectangle, which realizes the
//! covariance (s ^ t)(|x| ^ |y|) 1_{xy > 0} exactly at nodes.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::grid::GridSpec;
use crate::rng::{rng_stream_class, SeedLineage, StreamClass};

#[derive(Debug, Clone)]
pub struct SheetSample {
    pub grid: GridSpec,
    pub lineage: SeedLineage,
    /// Row-major [time cell i][space cell k], length n_time * 2 n_space.
    increments: Vec<f64>,
    /// Row-major [time node i][space node kn], length (n_time+1) * (2 n_space + 1).
    values: Vec<f64>,
}

impl SheetSample {
    /// Draw a sheet from an already-positioned stream.
    ///
    /// Draw order is fixed: increments row-major (time, then space).
    pub fn draw(grid: GridSpec, rng: &mut ChaCha8Rng, lineage: SeedLineage) -> Self {
        let n = grid.n_time;
        let cells = grid.space_cells();
        let sd = (grid.ds() * grid.dy()).sqrt();
        let mut increments = Vec::with_capacity(n * cells);
        for _ in 0..n * cells {
            let z: f64 = StandardNormal.sample(rng);
            increments.push(sd * z);
        }
        let values = Self::values_from_increments(grid, &increments);
        Self { grid, lineage, increments, values }
    }

    /// Rectangle sums in the documented order: per time row, accumulate the
    /// per-cell time prefix, then sweep space outward from the origin node.
    fn values_from_increments(grid: GridSpec, increments: &[f64]) -> Vec<f64> {
        let n = grid.n_time;
        let cells = grid.space_cells();
        let nodes = grid.space_nodes();
        let mid = grid.n_space; // index of the y = 0 node
        let mut values = vec![0.0; (n + 1) * nodes];
        let mut col_prefix = vec![0.0; cells];
        for i in 1..=n {
            let inc_row = &increments[(i - 1) * cells..i * cells];
            for (p, &d) in col_prefix.iter_mut().zip(inc_row) {
                *p += d;
            }
            let row = &mut values[i * nodes..(i + 1) * nodes];
            row[mid] = 0.0;
            for kn in mid + 1..nodes {
                row[kn] = row[kn - 1] + col_prefix[kn - 1];
            }
            for kn in (0..mid).rev() {
                row[kn] = row[kn + 1] + col_prefix[kn];
            }
        }
        values
    }

    /// Re-derive node values from increments (bit-exact against `values`).
    pub fn rebuild_values(&self) -> Vec<f64> {
        Self::values_from_increments(self.grid, &self.increments)
    }

    #[inline]
    pub fn increment(&self, i: usize, k: usize) -> f64 {
        self.increments[i * self.grid.space_cells() + k]
    }

    #[inline]
    pub fn increments_row(&self, i: usize) -> &[f64] {
        let c = self.grid.space_cells();
        &self.increments[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn value(&self, i: usize, kn: usize) -> f64 {
        self.values[i * self.grid.space_nodes() + kn]
    }

    #[inline]
    pub fn values_row(&self, i: usize) -> &[f64] {
        let nn = self.grid.space_nodes();
        &self.values[i * nn..(i + 1) * nn]
    }

    /// Value at the node closest to (s, y).
    pub fn value_at(&self, s: f64, y: f64) -> f64 {
        let i = ((s / self.grid.ds()).round() as usize).min(self.grid.n_time);
        let kn = (((y + self.grid.y_max) / self.grid.dy()).round() as usize)
            .min(self.grid.space_nodes() - 1);
        self.value(i, kn)
    }
}

/// Deterministic sheet realization for (grid, seed).
pub fn sample_sheet(grid: GridSpec, seed: u64) -> Result<SheetSample> {
    let lineage = SeedLineage::new(seed, StreamClass::Driving, 0);
    let mut rng = rng_stream_class(seed, StreamClass::Driving, 0);
    Ok(SheetSample::draw(grid, &mut rng, lineage))
}

/// Covariance of the two-parameter Wiener process:
/// (s ^ t)(|x| ^ |y|) 1_{xy > 0}.
pub fn sheet_covariance(s: f64, x: f64, t: f64, y: f64) -> f64 {
    debug_assert!(s >= 0.0 && t >= 0.0);
    if x * y <= 0.0 {
        return 0.0;
    }
    s.min(t) * x.abs().min(y.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(8, 8, 2.0).unwrap()
    }

    #[test]
    fn covariance_formula() {
        assert_eq!(sheet_covariance(1.0, 2.0, 3.0, 1.0), 1.0);
        assert_eq!(sheet_covariance(1.0, 2.0, 3.0, -1.0), 0.0);
        assert_eq!(sheet_covariance(0.0, 5.0, 7.0, 5.0), 0.0);
    }

    #[test]
    fn axes_are_pinned() {
        let sheet = sample_sheet(grid(), 1).unwrap();
        for kn in 0..grid().space_nodes() {
            assert_eq!(sheet.value(0, kn), 0.0);
        }
        for i in 0..=grid().n_time {
            assert_eq!(sheet.value(i, grid().n_space), 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = sample_sheet(grid(), 42).unwrap();
        let b = sample_sheet(grid(), 42).unwrap();
        assert_eq!(a.increments, b.increments);
        assert_eq!(a.values, b.values);
        let c = sample_sheet(grid(), 43).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn rectangle_sum_rebuild_is_bit_exact() {
        let sheet = sample_sheet(grid(), 7).unwrap();
        let rebuilt = sheet.rebuild_values();
        assert!(sheet.values.iter().zip(&rebuilt).all(|(a, b)| a == b));
    }

    // Sample covariance of (W(0.5, 1.0), W(1.0, 0.5)) over 10^4 seeds must
    // match 0.25 within 3 standard errors; the opposite-sign pair must be 0.
    #[test]
    fn empirical_covariance_same_sign() {
        let g = grid();
        let n = 10_000;
        let (mut s_ab, mut s_ab2) = (0.0, 0.0);
        let (mut s_cd, mut s_cd2) = (0.0, 0.0);
        for seed in 0..n {
            let sheet = sample_sheet(g, seed).unwrap();
            let a = sheet.value_at(0.5, 1.0);
            let b = sheet.value_at(1.0, 0.5);
            let c = sheet.value_at(1.0, -0.5);
            s_ab += a * b;
            s_ab2 += (a * b) * (a * b);
            s_cd += a * c;
            s_cd2 += (a * c) * (a * c);
        }
        let nf = n as f64;
        let mean_ab = s_ab / nf;
        let se_ab = ((s_ab2 / nf - mean_ab * mean_ab) / nf).sqrt();
        assert!(
            (mean_ab - 0.25).abs() < 3.0 * se_ab,
            "cov {mean_ab} vs 0.25 (3se = {})",
            3.0 * se_ab
        );
        let mean_cd = s_cd / nf;
        let se_cd = ((s_cd2 / nf - mean_cd * mean_cd) / nf).sqrt();
        assert!(mean_cd.abs() < 3.0 * se_cd, "cov {mean_cd} vs 0 (3se = {})", 3.0 * se_cd);
    }

    // Scaling identity restated as a variance: Var W(a s, sqrt(a) y) =
    // a^{3/2} s |y|.
    #[test]
    fn scaling_variance() {
        let g = GridSpec::new(10, 10, 2.0).unwrap();
        let (a, s, y) = (0.25, 0.8, 2.0);
        let n = 10_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for seed in 0..n {
            let sheet = sample_sheet(g, 50_000 + seed).unwrap();
            let w = sheet.value_at(a * s, a.sqrt() * y);
            sum += w * w;
            sum2 += w * w * w * w;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sum2 / nf - mean * mean) / nf).sqrt();
        let target = a.powf(1.5) * s * y.abs();
        assert!(
            (mean - target).abs() < 3.0 * se,
            "var {mean} vs {target} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn disjoint_increments_uncorrelated() {
        let g = grid();
        let n = 8_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for seed in 0..n {
            let sheet = sample_sheet(g, 90_000 + seed).unwrap();
            let x = sheet.increment(1, 2) * sheet.increment(5, 11);
            sum += x;
            sum2 += x * x;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sum2 / nf - mean * mean) / nf).sqrt();
        assert!(mean.abs() < 3.0 * se);
    }
}
