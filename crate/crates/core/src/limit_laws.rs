//! Samplers for the large-time limit random variables: the homogeneous
//! limit X, mixed-Gaussian limits Z sqrt(L) ||phi||, the three space-average
//! regimes, and per-chaos limits. Every sampler draws a fresh sheet from the
//! stream it is given; callers keep limit streams in the `Limit` namespace
//! so they are structurally disjoint from the driving noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::local_time::{epsilon_floor, LocalTimeEstimator};
use crate::phi::PhiSpec;
use crate::rng::Stream;
use crate::sheet::SheetSample;
use crate::solver::ChaosSimulator;
use crate::walsh::walsh_sum;
use crate::weights::{KernelShape, WeightTable};

use rand_distr::{Distribution, StandardNormal};

/// Limit regimes of the space-average theorems, indexed by the behavior of
/// R / sqrt(t): a finite constant, vanishing, or diverging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpaceAverageRegime {
    /// R / sqrt(t) -> c in (0, inf).
    Comparable { c: f64 },
    /// R / sqrt(t) -> 0.
    Narrow,
    /// R / sqrt(t) -> infinity.
    Wide,
}

impl SpaceAverageRegime {
    fn validate(&self) -> Result<()> {
        if let SpaceAverageRegime::Comparable { c } = self {
            if !(*c > 0.0) {
                return Err(Error::Precondition(format!(
                    "comparable regime needs c > 0, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Homogeneous-coefficient limit: one Walsh sum of
/// p_{1-s}(y) (c_+ 1_{W>0} + c_- 1_{W<0}) |W|^alpha against a fresh sheet.
pub fn sample_limit_thm12(
    alpha: f64,
    c_plus: f64,
    c_minus: f64,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<f64> {
    let phi = PhiSpec::HomogeneousPower { alpha, c_plus, c_minus };
    phi.validate()?;
    let table =
        WeightTable::cached(grid, KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: None });
    let sheet = SheetSample::draw(grid, &mut stream.rng, stream.lineage);
    Ok(walsh_sum(&sheet, &table, &phi, 1.0, 1.0, &mut stream.rng))
}

/// Mixed-Gaussian limit Z sqrt(L_{0,1}) ||phi||_{L2}: independent sheet for
/// the weighted local time at the grid-floor mollification, then an
/// independent standard normal.
pub fn sample_limit_thm13(phi: &PhiSpec, grid: GridSpec, stream: &mut Stream) -> Result<f64> {
    let l2 = phi.l2_norm_sq().ok_or_else(|| {
        Error::Precondition("limit sampler requires phi with finite L2 norm".into())
    })?;
    let sheet = SheetSample::draw(grid, &mut stream.rng, stream.lineage);
    let est = LocalTimeEstimator::new(grid);
    let local = est.weighted_local_time(&sheet, epsilon_floor(&grid), 1.0)?;
    let z: f64 = StandardNormal.sample(&mut stream.rng);
    Ok(z * (local.value * l2).sqrt())
}

/// Space-average limits for |x|^alpha: window kernel, doubled plain kernel,
/// or the kernel-free band integral, per regime.
pub fn sample_limit_thm31(
    regime: SpaceAverageRegime,
    alpha: f64,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<f64> {
    regime.validate()?;
    let phi = PhiSpec::HomogeneousPower { alpha, c_plus: 1.0, c_minus: 1.0 };
    phi.validate()?;
    let (shape, prefactor) = match regime {
        SpaceAverageRegime::Comparable { c } => {
            (KernelShape::Window { half_width: c, time_scale: 1.0 }, 1.0)
        }
        SpaceAverageRegime::Narrow => {
            (KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: None }, 2.0)
        }
        SpaceAverageRegime::Wide => (KernelShape::Band { half_width: 1.0 }, 1.0),
    };
    let table = WeightTable::cached(grid, shape);
    let sheet = SheetSample::draw(grid, &mut stream.rng, stream.lineage);
    Ok(walsh_sum(&sheet, &table, &phi, 1.0, prefactor, &mut stream.rng))
}

/// Space-average mixed-Gaussian limits: Z times the square root of the
/// regime-weighted local time scaled by ||phi||^2 (factor 2 in the narrow
/// and wide regimes, per the stated limits).
pub fn sample_limit_thm32(
    regime: SpaceAverageRegime,
    phi: &PhiSpec,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<f64> {
    regime.validate()?;
    let l2 = phi.l2_norm_sq().ok_or_else(|| {
        Error::Precondition("limit sampler requires phi with finite L2 norm".into())
    })?;
    let (shape, factor) = match regime {
        SpaceAverageRegime::Comparable { c } => {
            (KernelShape::Window { half_width: c, time_scale: 1.0 }, 1.0)
        }
        SpaceAverageRegime::Narrow => {
            (KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: None }, 2.0)
        }
        SpaceAverageRegime::Wide => {
            (KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: Some(1.0) }, 2.0)
        }
    };
    let est = LocalTimeEstimator::with_shape(grid, shape);
    let sheet = SheetSample::draw(grid, &mut stream.rng, stream.lineage);
    let local = est.weighted_local_time(&sheet, epsilon_floor(&grid), 1.0)?;
    let z: f64 = StandardNormal.sample(&mut stream.rng);
    Ok(z * (factor * l2 * local.value).sqrt())
}

/// Unit-horizon chaos limit of order n (Picard recursion on a fresh sheet).
pub fn sample_limit_chaos(n: usize, grid: GridSpec, stream: &mut Stream) -> Result<f64> {
    Ok(ChaosSimulator::new(n, 1.0, 0.0, grid)?.sample(stream).value)
}

/// Catalog entry describing one limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TheoremLimit {
    Thm12 { alpha: f64, c_plus: f64, c_minus: f64 },
    Thm13 { phi: PhiSpec },
    Thm31 { regime: SpaceAverageRegime, alpha: f64 },
    Thm32 { regime: SpaceAverageRegime, phi: PhiSpec },
    Chaos { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub theorem: TheoremLimit,
    pub grid: GridSpec,
}

impl LimitSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.theorem {
            TheoremLimit::Thm12 { alpha, c_plus, c_minus } => {
                PhiSpec::HomogeneousPower { alpha: *alpha, c_plus: *c_plus, c_minus: *c_minus }
                    .validate()
            }
            TheoremLimit::Thm13 { phi } | TheoremLimit::Thm32 { phi, .. } => {
                phi.validate()?;
                if phi.l2_norm_sq().is_none() {
                    return Err(Error::Precondition("limit spec requires finite L2 norm".into()));
                }
                if let TheoremLimit::Thm32 { regime, .. } = &self.theorem {
                    regime.validate()?;
                }
                Ok(())
            }
            TheoremLimit::Thm31 { regime, alpha } => {
                regime.validate()?;
                if !(*alpha >= 0.0) {
                    return Err(Error::Precondition("alpha must be nonnegative".into()));
                }
                Ok(())
            }
            TheoremLimit::Chaos { .. } => Ok(()),
        }
    }

    pub fn sample(&self, stream: &mut Stream) -> Result<f64> {
        match &self.theorem {
            TheoremLimit::Thm12 { alpha, c_plus, c_minus } => {
                sample_limit_thm12(*alpha, *c_plus, *c_minus, self.grid, stream)
            }
            TheoremLimit::Thm13 { phi } => sample_limit_thm13(phi, self.grid, stream),
            TheoremLimit::Thm31 { regime, alpha } => {
                sample_limit_thm31(*regime, *alpha, self.grid, stream)
            }
            TheoremLimit::Thm32 { regime, phi } => {
                sample_limit_thm32(*regime, phi, self.grid, stream)
            }
            TheoremLimit::Chaos { n } => sample_limit_chaos(*n, self.grid, stream),
        }
    }
}
