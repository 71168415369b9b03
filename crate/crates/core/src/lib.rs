//! Simulation engine and analysis toolkit for multi-stage distributed average
//! tracking (DAT) over unreliable networks.
//!
//! Each of `N` agents runs an `n`-stage cascade of consensus filters. Stage 1
//! tracks the agent's own noisy reference signal (estimated by a scalar Kalman
//! filter), stage `p` tracks stage `p - 1`, and every stage mixes in its
//! neighbours over links that drop packets with per-edge Bernoulli
//! probabilities. Inputs reach the plant `tau` ticks late; a one-step predictor
//! rolled forward over the buffered inputs compensates for the delay.
//!
//! Module map:
//!
//! - [`graph`]: topology, Laplacians, expected Laplacian under packet drops.
//! - [`eigen`]: cyclic Jacobi eigensolver for small dense symmetric matrices.
//! - [`reference`]: reference processes and their scalar Kalman filters.
//! - [`prediction`]: input delay lines and the delay-compensating predictor.
//! - [`controller`]: control law and the closed-loop stochastic stepper.
//! - [`analysis`]: steady states, the stage bound, parameter gate, metrics.
//! - [`scenario`], [`monte_carlo`], [`output`]: configuration, seeded
//!   ensembles and file emission used by the `dat` binary.

pub mod analysis;
pub mod controller;
pub mod eigen;
pub mod error;
pub mod graph;
pub mod monte_carlo;
pub mod output;
pub mod prediction;
pub mod reference;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
