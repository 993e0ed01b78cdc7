//! Expansion planning for steady-state gas transmission networks.
//!
//! The crate builds a mixed-integer second-order cone relaxation of the
//! expansion problem, solves it with branch-and-bound over linear outer
//! approximations of the cone rows, recovers feasible operating points of
//! the exact nonconvex model by fixing the discrete design, and certifies
//! the result against every constraint of that model.
//!
//! Start with [`instances::by_name`] to load a benchmark network, build a
//! program with [`model::build_misocp`], and run [`bnb::solve_misocp`]. The
//! `examples/` directory has one runnable walk-through per capability; the
//! thin `gtnep` binary wraps the same entry points as subcommands.

pub mod bench;
pub mod bnb;
pub mod export;
pub mod instances;
pub mod lp;
pub mod model;
pub mod network;
pub mod recovery;
