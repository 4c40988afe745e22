//! Synthesis and certification of boundary-feedback stabilization for
//! intrinsic geometrically exact beams.
//!
//! Pipeline: build the beam's coefficient matrices ([`beam_model`]),
//! compile the Lyapunov matrix inequalities into a sum-of-squares
//! semidefinite program ([`sos_program`]), solve it with the built-in
//! interior-point method ([`sdp_solver`]), maximize the region-of-attraction
//! ratio over the Lyapunov eigenvalue bounds and evaluate the bound
//! formulas ([`roa_optimizer`]), and validate the certified decay in closed
//! loop ([`simulator`]).

pub mod beam_model;
pub mod config;
pub mod error;
pub mod linalg;
pub mod polynomials;
pub mod roa_optimizer;
pub mod sdp_solver;
pub mod simulator;
pub mod sos_program;

pub use beam_model::{build_model, BeamModel, BeamParameters};
pub use error::{Error, Result};
