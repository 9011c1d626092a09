//! Solvers for generalised time-fractional evolution equations.
//!
//! The time operator is a Caputo or Riemann-Liouville type nonlocal
//! operator built from a Lévy kernel `ν(t, r)`. Its generator produces a
//! decreasing jump process on `[a, b]` whose exit time and occupation
//! functionals give stochastic representations of the solution. For
//! bounded spatial generators the same solutions are available as series
//! in the generalised fractional integral `I^(ν)`, and the nonlinear
//! problem is solved by Picard iteration with Weissinger bounds.
//!
//! Module map:
//!
//! - [`kernels`]: Lévy kernels, tail masses, jump samplers and assumption checks.
//! - [`processes`]: the truncated decreasing process, exit times and occupation times.
//! - [`fracint`]: the generalised fractional integral with exact, Monte Carlo and
//!   potential-kernel backends.
//! - [`feller`]: bounded spatial generators, matrix semigroups, Yosida transforms and
//!   samplers for spatial Markov processes.
//! - [`mittag_series`]: Mittag-Leffler functions and the series solution engine.
//! - [`solver_linear`]: Monte Carlo solvers for the linear problems and the Yosida experiment.
//! - [`solver_nonlinear`]: fixed-point solver for the nonlinear Caputo problem.
//! - [`oracles`]: closed-form and quadrature references used for validation.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. With `std`, Monte Carlo chunks run on the rayon thread pool; the
//! results are bit-identical either way because chunks are merged in a fixed
//! order.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod feller;
pub mod fracint;
pub mod grid;
pub mod kernels;
pub mod mittag_series;
pub mod oracles;
pub mod processes;
pub mod quad;
pub mod solver_linear;
pub mod solver_nonlinear;
pub mod special;
pub mod stats;
pub mod stream;

mod par;

pub use error::{Error, Result};
pub use feller::{BoundedGenerator, FellerSampler, SpaceState};
pub use fracint::{Backend, PotentialKernel};
pub use grid::{GridFunction, SpaceGrid, TimeGrid};
pub use kernels::{KernelFamily, KernelSpec};
pub use processes::{McConfig, PathSample, SmallJumps};

pub(crate) mod prelude {
    pub use alloc::string::String;
    pub use alloc::sync::Arc;
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    #[cfg(not(feature = "std"))]
    pub use num_traits::Float;
}
