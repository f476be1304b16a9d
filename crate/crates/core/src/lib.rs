//! Forced-root approximations to the optimal sphere packing functions in
//! dimensions 8 and 24, computed in multiprecision arithmetic.

pub mod analysis;
pub mod eigensingle;
pub mod energy;
pub mod error;
pub mod lattice;
pub mod magic;
pub mod mpnum;
pub mod polybasis;
pub mod schedule;

pub use error::{Error, Result};
