//! Numerical laboratory for a mean-field stress-diffusion model of soft glassy flow.
//!
//! Units are rescaled so that the yield stress and the plastic time are 1.
//! The crate is organised by task:
//!
//! * [`grid`], [`observables`], [`protocol`]: discretization and the
//!   quantities every other module consumes.
//! * [`analytic`]: Gaussian kernels, comparison envelopes, a-priori bounds.
//! * [`degeneracy`]: the escape function `F`, uniqueness classification,
//!   escape profiles and branch solutions for degenerate data.
//! * [`evolve`]: time stepping of the regularized and degenerate equations.
//! * [`steady`]: stationary states and flow curves.
//! * [`config`] and [`run`]: the batch front end used by the `hl-lab` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod analytic;
pub mod config;
pub mod degeneracy;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod history;
pub mod observables;
pub mod protocol;
pub mod quadrature;
pub mod run;
pub mod special;
pub mod steady;
pub mod tridiag;

pub use config::{parse_config, RunConfig, Scenario};
pub use error::{Error, Result};
pub use grid::{build_grid, DensityField, ModelParams, StressGrid};
pub use observables::{observables, Observables};
pub use protocol::{shear_integral, ShearProtocol};
pub use run::run;
