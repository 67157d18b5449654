//! Monte Carlo laboratory for the large-time behavior of the stochastic
//! heat equation driven by two-parameter white noise.
//!
//! The crate simulates the mild solution and its rescaled version by
//! predictable Walsh sums over sampled Wiener sheets, estimates weighted
//! local times and martingale quadratic variations, draws from the
//! large-time limit laws on independent sheets, and verifies everything
//! against deterministic quadrature oracles with a statistical test engine
//! (characteristic functions, stable-convergence factorization,
//! Kolmogorov-Smirnov, power-law rate fits).

pub mod error;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod limit_laws;
pub mod local_time;
pub mod phi;
pub mod quad;
pub mod randfield;
pub mod rng;
pub mod solver;
pub mod stats;
mod sheet;
mod walsh;
pub mod weights;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use kernels::{heat_kernel, HeatKernelEval};
pub use phi::{PhiSpec, TableFunction};
pub use rng::{rng_stream, rng_stream_class, SeedLineage, Stream, StreamClass};
pub use sheet::{sample_sheet, sheet_covariance, SheetSample};
pub use stats::{McBatch, RateFit, StableTestReport};
