//! Time evolution of an infinite projected entangled pair state (iPEPS) on
//! the square lattice.
//!
//! The crate implements real-time (sudden quench) and imaginary-time
//! (thermal purification) evolution of a two-sublattice checkerboard iPEPS
//! for the 2D quantum Ising model, with three bond-truncation schemes:
//!
//! * **SVDU** — local truncated SVD of the gated bond,
//! * **NTU** — alternating least squares in the exactly contracted metric of
//!   the nearest-neighbor cluster around the gated bond,
//! * **FTU** — the same optimization in a CTMRG-approximated infinite
//!   environment.
//!
//! Observables (magnetizations, bond energies, connected correlators,
//! correlation lengths) come from a directional corner transfer matrix
//! renormalization of the double-layer network. Experiment drivers reproduce
//! quench survival-time comparisons and the pseudo-critical-temperature
//! power-law fit for the thermal transition.
//!
//! Contractions are canonicalized into a single row-major GEMM kernel which
//! is data-parallel under the default `parallel` feature and bit-identical
//! to the sequential fallback.

pub mod checkpoint;
pub mod ctmrg;
pub mod error;
pub mod experiments;
pub mod gates;
pub mod lattice;
pub mod scalar;
pub mod tensor;
pub mod thermal;
pub mod truncation;

pub use error::{Error, Result};
pub use scalar::{Scalar, ScalarKind};
pub use tensor::DenseTensor;
