//! Finite-difference PDEs with piecewise-constant coefficients, compiled into
//! linear-combination-of-Hamiltonian-simulation (LCHS) circuits and executed
//! on a statevector backend.
//!
//! The pipeline is:
//!
//! 1. [`grid`] and [`pde`] describe the problem and assemble the coefficient
//!    matrix `A` of `dw/dt = −A w` as a [`qubit_op::QubitOperator`].
//! 2. [`logic_min`] turns each piecewise-constant coefficient into a short sum
//!    of projector strings.
//! 3. [`mps`] builds the square-rooted LCU weights as a tensor train, and
//!    [`circuit`] turns that train into a coefficient oracle, Trotterizes the
//!    Hermitian parts of `A`, and runs the full LCHS circuit.
//! 4. [`reference`] provides dense matrix exponentials, the Trotter-free
//!    quadrature and explicit finite-difference stepping for validation.
//! 5. [`config`] and [`pipeline`] drive the whole chain from a TOML file and
//!    [`output`] writes the resulting fields.

pub mod circuit;
pub mod config;
pub mod error;
pub mod grid;
pub mod logic_min;
pub mod mps;
pub mod output;
pub mod pde;
pub mod pipeline;
pub mod qubit_op;
pub mod reference;

pub use error::{Error, Result};
