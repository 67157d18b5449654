//! Random-field generation and exact Gaussian utilities: Wiener-sheet
//! sampling, the sheet covariance, the heat kernel, and reproducible
//! parallel random streams. Thin facade over the concrete submodules so
//! the field toolkit is importable as one unit.

pub use crate::kernels::{heat_kernel, HeatKernelEval};
pub use crate::rng::{rng_stream, rng_stream_class, SeedLineage, StreamClass};
pub use crate::sheet::{sample_sheet, sheet_covariance, SheetSample};
