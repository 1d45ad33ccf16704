//! Symbolic solvers for first-order MDPs: situation-calculus regression,
//! case algebra, first-order linear programs, basis generation and
//! universal-reward decomposition, with a ground-MDP oracle.

pub mod basisgen;
pub mod cases;
pub mod cli;
pub mod error;
pub mod folp;
pub mod fomdp;
pub mod logic;
pub mod oracle;
pub mod sitcalc;
pub mod solvers;
pub mod unidecomp;

pub use error::{Error, ParseError, Result};
