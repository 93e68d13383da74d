//! Entropy bounds for Glass network attractors.
//!
//! The pipeline builds the box transition graph of a network, finds the
//! first-return cycles through a starting wall, computes their exact
//! returning cones, checks that they form a trapping region and then refines
//! the graph by cycle-word context. Each graph's Perron entropy bounds the
//! attractor's entropy from above; a float wall-to-wall simulator provides
//! block-count estimates for comparison.

pub mod cones;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod graph;
pub mod netspec;
pub mod rational;
pub mod refine;

pub use error::{Error, Result};
