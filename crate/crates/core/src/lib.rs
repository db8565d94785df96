//! Numerical laboratory for four-dimensional tensor-monopole semimetals.
//!
//! * [`model`]: the four-band momentum-space model, its valley expansions,
//!   symmetries and the map to diamond-coupled qubits.
//! * [`topo`]: non-Abelian Berry curvature on link-variable lattices, second
//!   Chern numbers in Hopf coordinates and 3D winding numbers.
//! * [`pme`]: synthetic gauge fields, pseudo-electric fields and the
//!   parity-magnetic-effect current.
//! * [`device`]: superconducting-circuit emulation: circuit Hamiltonian,
//!   parametric Floquet couplings, Autler–Townes dressing, Lindblad dynamics
//!   and the slow-ramp curvature protocol.
//! * [`acceptance`]: the end-to-end acceptance criteria as a report.
//!
//! Energies are MHz (cycles, not radians), times µs, momenta radians.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod device;
pub mod error;
pub mod exec;
pub mod fit;
pub mod linalg;
pub mod model;
pub mod pme;
pub mod topo;

pub use error::{Error, Result};
pub use exec::Exec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
