//! Quantum-trajectory simulation of Markovian open-system dynamics with
//! gauge-adaptive unravelings.
//!
//! A master equation admits infinitely many stochastic unravelings: any
//! right-unitary mixing of a channel's Kraus operators produces the same
//! density matrix from different pure-state ensembles. Because the cost of
//! representing a trajectory as a matrix product state is set by its
//! entanglement, the gauge choice is a computational resource. This crate
//! implements:
//!
//! - Schmidt-canonical MPS states with gate application, truncation and
//!   entropy read-off ([`mps`]);
//! - Kraus channels, isometric gauge transforms and Trotterized Lindblad
//!   discretization ([`channel`]);
//! - stochastic trajectory propagation under fixed gauges (quantum jump,
//!   projector, state diffusion) and greedy adaptive gauges that minimize
//!   the ensemble-averaged entanglement entropy or its small-step rate
//!   ([`engine`], [`geo`]);
//! - model constructors for dephasing qubits, noisy Brownian circuits, a
//!   SWAP transport circuit and XX chains ([`models`]);
//! - a vectorized-density-matrix baseline with operator-entanglement
//!   diagnostics ([`mpo`]);
//! - dense brute-force oracles ([`oracle`], [`dense`]) and
//!   ensemble/scaling statistics ([`stats`]).

pub mod channel;
pub mod dense;
pub mod engine;
pub mod error;
pub mod geo;
pub mod io;
pub mod linalg;
pub mod models;
pub mod mpo;
pub mod mps;
pub mod oracle;
pub mod stats;

pub use channel::{IsometryParams, KrausSet, LindbladModel, TrotterPlan};
pub use engine::{RecordOptions, Strategy, TrajectoryRecord};
pub use error::{Error, Result};
pub use mps::{MpsState, SchmidtSpectrum};
