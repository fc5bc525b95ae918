//! Coupled dynamical percolation in a box.
//!
//! A free bond-percolation process `X` and a process `Y` conditioned on the
//! top and bottom faces staying disconnected are driven by the same stream of
//! edge updates. This crate simulates the pair, extracts the interface, the
//! pivotal edges and the separating sets they determine, builds and validates
//! space-time paths through the recorded history, and checks everything
//! against exact enumeration on tiny boxes.

pub mod clusters;
pub mod connectivity;
pub mod dynamics;
pub mod edge_set;
pub mod experiments;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod stp;

pub use connectivity::Config;
pub use edge_set::EdgeSet;
pub use lattice::{BoxLattice, EdgeId, Side};
