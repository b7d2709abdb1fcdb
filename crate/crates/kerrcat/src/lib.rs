//! Simulation toolkit for a pair of Kerr-cat qubits coupled through a single
//! flux-tunable resonator.
//!
//! The library covers the full path from raw circuit design values to gate
//! performance numbers:
//!
//! * [`params`] — circuit quantization: capacitance matrix, charging energies,
//!   and the rotating-frame Hamiltonian coefficients as functions of the bias
//!   fluxes, including the closed-form inversion flux ↦ detuning used for
//!   pulse synthesis.
//! * [`fock`] — truncated Fock-space linear algebra: tensor-product states and
//!   operators, coherent states, Löwdin orthonormalization.
//! * [`model`] — assembly of the rotating-frame Hamiltonian on a Fock space,
//!   both in the direct form and in the exactly equivalent decomposition
//!   `H = H0 + H_ZZ + H_X`.
//! * [`perturb`] — the analytic layer: coherent-product logical basis,
//!   first-order energies, the ζ decomposition, and the ZZ-null flux search.
//! * [`evolve`] — high-accuracy propagation of the time-dependent Schrödinger
//!   equation (adaptive embedded Runge-Kutta, fixed-step RK4, and a
//!   static-exponential path for time-independent Hamiltonians).
//! * [`gate`] — flux-pulse synthesis for the R_ZZ(−π/2) gate, the
//!   residual-coupling experiment, and average gate fidelity.
//! * [`config`] / [`verify`] — JSON run configuration and the bundled
//!   self-verification suite used by the CLI.
//!
//! # Unit policy
//!
//! Every energy-like quantity (frequencies, Kerr coefficients, pump rates,
//! couplings, charging and Josephson energies, ζ values) is an ordinary
//! frequency `E/h` in GHz, and time is in ns. The angular factor 2π appears in
//! exactly one place: the equation of motion integrated by [`evolve`],
//! `dψ/dt = −i·2π·H(t)ψ`. Flux variables are radians internally; user-facing
//! fields and files carry `_over_2pi` suffixes and are dimensionless.

// `!(x > 0.0)`-style guards are deliberate: unlike `x <= 0.0` they also
// reject NaN. The indexed loops in the matrix code walk several arrays in
// lockstep, where an iterator chain would hide the coupling.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod constants;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod gate;
pub mod model;
pub mod params;
pub mod perturb;
pub mod verify;

pub use error::{Error, Result};

/// Complex double — the only scalar type used for amplitudes and operators.
pub type C64 = num_complex::Complex64;

/// 2π, the lone angular factor of the unit policy.
pub const TAU: f64 = std::f64::consts::TAU;
