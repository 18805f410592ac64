//! Source-to-source autotuning of OpenMP loop nests.
//!
//! The pipeline: [`frontend`] parses an annotated kernel file, [`transform`]
//! enumerates directive-placement and loop-collapse candidates, [`codegen`]
//! emits them as Fortran subroutines with thread-count control, [`exec`]
//! runs them in-process, and [`tuner`] searches (candidate, thread count)
//! for the cheapest configuration and persists the choice.

pub mod codegen;
pub mod exec;
pub mod frontend;
pub mod transform;
pub mod tuner;

pub use frontend::{parse_kernel, Kernel, ParseError};
pub use transform::{enumerate_variants, Enumeration, Variant};
pub use tuner::{BasicParams, Measurement, PerformanceParams, TuningResult};
