//! Precoder optimization for simultaneous secondary-user communication,
//! adversarial-user pilot jamming and primary-user interference protection
//! in a multi-antenna multi-carrier cognitive-radio setting.
//!
//! The crate is organized around the simulation pipeline:
//!
//! * [`channels`] generates frequency-selective channels and the
//!   transmitter-side knowledge models;
//! * [`metrics`] evaluates SINRs, MSEs, mutual information, jamming and
//!   interference powers;
//! * [`thresholds`] derives feasible jamming floors and interference caps;
//! * [`conic`] holds the numerical kernels (eigensolver, SDP, rank-one
//!   extraction, proximal solve);
//! * [`solver`] runs the alternating-optimization consensus algorithm;
//! * [`harness`] drives sweeps, link-level BER studies and file emission.

pub mod channels;
pub mod config;
pub mod conic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod solver;
pub mod thresholds;

pub use config::{ScenarioConfig, Scheme};
pub use error::{Error, Result};
