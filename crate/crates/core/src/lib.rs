//! Pathwise simulation of the SEIS interacting particle system on finite
//! truncations of the integer line, together with its four companion
//! processes (contact, two-stage lower bound, upper bound, large-latency
//! limit), and two engines that certify bounds on their critical values:
//!
//! * [`edgechain`]: the renormalized edge (window) process, its embedded
//!   jump chain, invariant measure and mean edge increment, root-found in
//!   the infection parameter.
//! * [`blockcert`]: block construction against oriented site percolation,
//!   with an exact uniformized jump matrix and a truncated Poisson sum.
//!
//! Every trajectory is built from a [`substructure::Substructure`]: seeded
//! Poisson label streams on site and directed-edge fibers.

pub mod blockcert;
pub mod coupling;
pub mod dynamics;
pub mod edgechain;
mod error;
pub mod lattice;
pub mod percolation;
pub mod stats;
pub mod substructure;

pub use error::{Error, Result};
pub use lattice::{Configuration, Graph, GraphKind, Model};
pub use dynamics::Process;
pub use substructure::Substructure;
