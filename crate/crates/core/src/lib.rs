//! Decide whether a dense graph has a `K_r`-factor, and back every answer
//! with something a third party can check: the factor itself, or evidence
//! that none exists.
//!
//! The entry point is [`solver::solve_auto`]. The building blocks are public
//! so that each stage can be exercised and validated on its own.

pub mod absorbing;
pub mod bench;
pub mod bitset;
pub mod certificate;
pub mod colorcode;
pub mod extremal;
pub mod gen;
pub mod graph;
pub mod matching;
pub mod oracle;
pub mod slackalg;
pub mod solver;

pub use certificate::{verify_certificate, Certificate, Evidence, Verdict};
pub use graph::{Graph, Partition, Rational, Tiling};
pub use solver::{solve_auto, Mode, SolverConfig};
