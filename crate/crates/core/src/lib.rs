//! Numerical laboratory for the nonlocal bistable reaction-diffusion equation
//!
//! ```text
//! u_t = J*u - u - f(u),   x in R, t >= 0
//! ```
//!
//! with indicator initial data `u(0, x) = 1_{[-L, L]}(x)`. The crate evolves the equation with
//! an explicit finite-difference scheme, brackets the sharp propagation/extinction threshold
//! `L*` by bisection, computes traveling fronts `(U, c)`, and evaluates energy and Lyapunov
//! diagnostics along trajectories.

pub mod config;
pub mod energy;
pub mod error;
pub mod evolve;
pub mod fronts;
pub mod grid;
pub mod kernels;
mod linalg;
pub mod numerics;
pub mod output;
pub mod reaction;
pub mod threshold;
pub mod validation;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use kernels::{ConvolutionPath, DiscreteKernel, KernelFamily, KernelSpec, KernelTable};
pub use reaction::Nonlinearity;
pub use validation::ValidationReport;
