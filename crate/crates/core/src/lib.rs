#![cfg_attr(not(feature = "std"), no_std)]

//! Simulation and data-driven identification of fractional-order,
//! control-affine nonlinear systems.
//!
//! The crate covers both continuous-time systems (Caputo derivative,
//! discretized with a full-memory Grünwald–Letnikov scheme) and
//! discrete-time systems driven by the Grünwald–Letnikov difference
//! operator. On top of the simulators sit the two learning pipelines:
//! experiments with memory-reset replicas isolate the fractional order,
//! and least-squares regression over an orthonormal Legendre basis
//! recovers the control and drift vector fields.
//!
//! Everything here is pure computation over `alloc` collections; file
//! formats, configuration and the command-line front end live in the
//! `fracdyn` companion crate.
//!
//! ```
//! use fracdyn_core::systems::make_logistic_map;
//! use fracdyn_core::simulate::simulate_discrete;
//!
//! let bench = make_logistic_map(1.0, 0.6).unwrap();
//! let traj = simulate_discrete(&bench.system, &[0.5], &vec![vec![0.0]; 3], 3).unwrap();
//! assert!((traj.states[1][0] - 0.55).abs() < 1e-15);
//! ```

extern crate alloc;

pub mod basis;
pub mod error;
pub mod frac;
pub mod harness;
pub mod learn;
pub mod linalg;
pub mod rng;
pub mod simulate;
pub mod systems;

pub use error::{Error, Result};
pub use frac::{FractionalOrderVector, MemoryCoefficients};
pub use systems::{ControlAffine, ControlAffineSystem, DomainBox, TimeKind};

/// A state (or input) vector.
pub type State = alloc::vec::Vec<f64>;
