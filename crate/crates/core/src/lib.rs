//! Emptiness formation probability of the spin-1/2 XXZ model.
//!
//! Three independent routes compute the probability that a block of spins
//! is all up: exact diagonalization ([`exact`]), Monte Carlo over the
//! Poisson loop representation ([`loops`]) and the six-vertex transfer
//! matrix ([`sixvertex`]). The [`bounds`] module evaluates the analytic
//! bounds and checks the operator inequalities behind them, and [`opc`]
//! implements the osculating-path moves on six-vertex configurations.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod loops;
pub mod opc;
pub mod sixvertex;

pub use error::{Error, Result};
