//! Ground-space solver for two-body frustration-free qubit Hamiltonians
//! (quantum 2-SAT).
//!
//! Given constraints as two-qubit projectors, the library decides
//! satisfiability, counts the exact ground-space dimension, and emits the
//! whole ground space as a forest of single-qubit→two-qubit isometries
//! applied to a span of product states, every step checkable against a
//! brute-force kernel oracle.
//!
//! See the crate examples for runnable entry points into each capability.

pub mod error;
pub mod numerics;
pub mod instance;
pub mod oracle;
pub mod reduction;
pub mod graph;
pub mod dashed;
pub mod tails;
pub mod ttn;
pub mod pipeline;
pub mod cli;

pub use error::{Error, Result};
pub use instance::{Instance, Lit, Pair, QubitId};
pub use numerics::{CMat, CVec, Tolerance, C64};
pub use pipeline::{decide, solve, SolveMode};
pub use ttn::{GroundSpaceDescription, Verdict};
