//! Wheel-odometry calibration for planar robots.
//!
//! The crate learns a mapping from wheel-encoder tick increments to the
//! roto-translation of an on-board sensor over a fixed time interval, then
//! uses that mapping to dead-reckon trajectories and score them against
//! ground truth. Two model families are provided:
//!
//! * **Gaussian-process regression** ([`gp`]) with zero or linear mean
//!   functions and RBF / linear / RBF+linear kernels, trained on measured
//!   displacement samples with known per-sample noise covariance.
//! * **Robust linear regression** ([`linear`]): a weight matrix fitted by
//!   iteratively reweighted least squares under a Huber loss.
//!
//! Supporting pieces: SE(2) pose composition ([`pose`]), a differential-drive
//! and mecanum simulator with wheel-deformation injection ([`sim`]), edge
//! selection and trajectory integration ([`pipeline`]), trajectory error
//! metrics ([`metrics`]), and file formats plus a CLI front end ([`io`],
//! [`cli`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod gp;
pub mod io;
pub mod linear;
pub mod metrics;
pub mod pipeline;
pub mod pose;
pub mod sim;

pub use data::{DisplacementSample, TickVector};
pub use error::{Error, Result};
pub use pose::Pose2D;
