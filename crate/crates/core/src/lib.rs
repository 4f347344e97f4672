//! Pointer-state measurement model for macroscopically distinguishable branches.
//!
//! A system observable `O` is premeasured by an apparatus pointer with one active
//! coordinate `q`. After the coupling the joint state is
//!
//! ```text
//! |Psi> = sum_n c_n |phi_n> (x) exp(-i L O_n p) |psi>
//! ```
//!
//! and each branch pointer then evolves under the apparatus Hamiltonian. The crate
//! evaluates the Hermitian phase operators of a branch pair, the overlap factor
//! `Z_ij(t)`, the relative phase `Phi_ij(t)`, Fubini-Study distances and the family of
//! lower bounds on the relative phase that follow from the Robertson uncertainty
//! relation and the triangle inequality.
//!
//! Units are natural (`hbar = 1`). The translation `exp(-i a p)` moves a wave's
//! centre by `+a`.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command line
//! front end live in the companion `macrophase-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bounds;
pub mod composite;
pub mod dense;
pub mod dynamics;
mod error;
pub mod falsifier;
mod fft;
pub mod pointer;
pub mod scenarios;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use bounds::{BoundInputs, BoundKind, BoundReport, FSDistances, OverlapZ, Verdict};
pub use composite::{Branch, BranchSpec, CompositeState, Normalization, PhasePair, StateVector};
pub use dynamics::{ApparatusHamiltonian, Evolver, Potential, PropagatorConfig};
pub use pointer::{Grid, PointerWave};
pub use scenarios::{PeresReport, ScenarioConfig, ScenarioKind, TimeRow, TimeSeries};
