//! Probe-drogue docking for aerial refuelling with terminal iterative
//! learning control.
//!
//! All positions live in the tanker joint frame: origin at the hose root,
//! `x` forward, `y` right, `z` down. The drogue trails along `−x`, and an
//! attempt ends when the probe reaches the drogue's `x` coordinate.
//!
//! - [`hose`]: link-chain hose and drogue dynamics and statics.
//! - [`receiver`]: linear receiver model with a PI docking autopilot.
//! - [`disturbances`]: bow-wave surrogate, offset map, turbulence and gusts.
//! - [`tilc`]: the learning law that shifts the docking reference.
//! - [`convergence`]: error recursion of the learning loop and its certificate.
//! - [`sim`]: attempts, campaigns and Monte Carlo sweeps.
//! - [`config`], [`export`], [`cli`]: scenario files, outputs and the binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod convergence;
pub mod disturbances;
pub mod export;
pub mod geometry;
pub mod hose;
pub mod integrator;
pub mod linalg;
pub mod receiver;
pub mod scalar;
pub mod sim;
pub mod tilc;

pub use convergence::{build_augmented, certify, iterate_recursion, AugmentedIteration, Certificate};
pub use geometry::{detect_terminal_time, docking_outcome, radial_error, DockingOutcome, DockingSample};
pub use sim::{monte_carlo, run_campaign, run_docking_attempt, Scenario};
pub use tilc::{compute_reference, record_attempt, TilcGains, TilcState};

/// Double-precision position or force in the tanker frame.
pub type Vec3 = nalgebra::Vector3<f64>;
