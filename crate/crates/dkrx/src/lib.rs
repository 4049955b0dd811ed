//! Decentralized iterative uplink receivers for massive and extra-large MIMO.
//!
//! This crate simulates fully decentralized uplink detection where per-antenna
//! processing nodes, wired as a daisy chain or a two-level sub-array tree,
//! cooperatively solve the linear system `y = Hx` one equation at a time.
//! Three iterative receivers are provided:
//!
//! - **SDK** — distributed Kaczmarz projections with a configurable relaxation
//!   schedule,
//! - **BDK** — a Bayesian variant that solves the Tikhonov-augmented consistent
//!   system `y = Hx + sqrt(xi) u`, letting each node keep a local noise
//!   estimate,
//! - **SRC** — successive residual cancellation, the SIC-style formulation that
//!   coincides with SDK at unit relaxation.
//!
//! Centralized ZF/RZF solvers act as oracles, and the [`harness`] module runs
//! reproducible Monte Carlo BER experiments over 16-QAM with stationary or
//! spatially non-stationary (per-antenna visibility-masked) channels.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod harness;
pub mod modem;
pub mod numerics;
pub mod receivers;
pub mod relaxation;
pub mod topology;

pub use error::{Error, Result};
