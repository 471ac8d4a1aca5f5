//! Eigenvalues and weight numbers of fourth-order operators
//! `y'''' + (tau2 y')' + (tau1 y)' + tau1 y' + tau0 y` on `[0, 1]` with
//! distributional `tau0`, under three kinds of separated boundary conditions.
//!
//! The pipeline runs [`coefficients`] → [`regularization`] → [`integrator`] →
//! [`spectral`], with [`asymptotics`] supplying starting guesses and the
//! reference values that numeric results are compared against.

pub mod asymptotics;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod integrator;
pub mod regularization;
pub mod spectral;
