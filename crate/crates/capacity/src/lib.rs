//! Capacities of finite subsets of the integer lattice.
//!
//! Three notions are implemented: the Newtonian (random-walk) capacity via
//! equilibrium measures, Bessel-Riesz capacities via certified energy
//! minimization on the probability simplex, and the branching capacity of
//! critical branching random walks via Monte Carlo escape estimators. For
//! each notion, a "derivative sweep" measures the second-order term in the
//! capacity of a union of two far-apart sets, which approaches twice the
//! product of the individual capacities times the relevant kernel.

// indexed loops mirror the matrix algebra; `!(x > 0)` guards reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod error;
pub mod exec;
pub mod green;
pub mod lattice;
pub mod newtonian;
pub mod numerics;
pub mod reference;
pub mod riesz;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
