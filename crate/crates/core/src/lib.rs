//! Minimum expected lifetime poverty with a ruin penalty.
//!
//! An individual with wealth `W` consumes at rate `c(W)`, earns income `A`,
//! and splits wealth between a riskless asset and a risky one. Until death
//! (exponential with hazard `lambda`) they pay a running cost `l(W)` while
//! poor, and a lump penalty `rho` if wealth hits the ruin level `a`. This
//! crate computes the minimal expected discounted cost `V` and the optimal
//! dollar amount `pi*` to hold in the risky asset.
//!
//! - [`model`]: parameters, poverty and consumption functions, validation.
//! - [`constant`], [`proportional`]: closed-form solutions for a single
//!   poverty step with constant or proportional consumption.
//! - [`hjb`]: finite-difference policy iteration for staircase poverty
//!   functions and general consumption.
//! - [`monte_carlo`]: simulation of the cost under any feedback policy.
//! - [`policy`]: feedback policies, tabulated and closed form.
//! - [`export`]: CSV and JSON writers used by the command-line tool.

pub mod constant;
pub mod dual;
pub mod error;
pub mod export;
pub mod hjb;
pub mod model;
pub mod monte_carlo;
pub mod numeric;
pub mod policy;
pub mod proportional;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use dual::Side;
pub use error::{Error, Result};
pub use model::{validate, ProblemSpec, ValidatedProblem};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problem-files.md")]
    mod problem_files {}
    #[doc = include_str!("../../../book/src/closed-forms.md")]
    mod closed_forms {}
    #[doc = include_str!("../../../book/src/finite-differences.md")]
    mod finite_differences {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
