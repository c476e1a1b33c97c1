#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation of continuous ac-Stark-shift protection of a qubit embedded in
//! a doubly driven three-level emitter, under classical time-dependent
//! dephasing noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`noise`]: Ornstein-Uhlenbeck and random telegraph noise traces.
//! * [`emitter`]: rotating-frame Hamiltonian, Stark shifts and the
//!   Bessel-function protection condition.
//! * [`propagator`]: fixed-step RK4 for pure states and the GKSL equation.
//! * [`experiments`]: Ramsey/FID ensembles, T2 fits, gain sweeps and the
//!   weak-probe spectroscopy map.
//! * [`tomography`]: square-pulse gates, state and process tomography.
//! * [`cli`]: configuration, orchestration and CSV/JSON output.

pub mod cli;
pub mod emitter;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod noise;
pub mod parallel;
pub mod propagator;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64;
