//! swarmlab: a simulation laboratory for p-alignment collective dynamics.
//!
//! The crate couples an N-agent p-alignment integrator and a 1D
//! finite-volume Euler-alignment solver with entropic pressure to a battery
//! of diagnostics that verify decay inequalities, conservation laws, and
//! budget bounds along every run. Experiments are driven by TOML configs
//! through the `swarmlab` binary (`simulate`, `analyze`, `suite`).

// validation guards use `!(x > 0.0)` so NaN fails closed; stencil loops
// index several parallel arrays at once
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod agents;
pub mod config;
pub mod diagnostics;
pub mod hydro1d;
pub mod kernels;
pub mod linalg;
pub mod runner;

pub use config::ExperimentConfig;
pub use diagnostics::{BoundReport, CheckRecord, DiagnosticsTrace};
pub use kernels::{KernelFamily, KernelSpec};
