//! Random quadrangulations with a boundary.
//!
//! Half-edge maps, labeled forests and bridges, the BDG encoding (finite
//! and infinite), Boltzmann samplers for the skewness family, the looptree
//! branching decomposition, and a seeded experiment harness.

pub mod bdg;
pub mod boltzmann;
pub mod branching;
pub mod error;
pub mod lab;
pub mod planar_map;
pub mod rng;
pub mod stats;
pub mod trees;

pub use error::{Error, Result};
pub use planar_map::{HalfEdgeMap, QuadrangulationWithBoundary};
