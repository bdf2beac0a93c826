//! Link-level building blocks for RIS-assisted direct-to-satellite IoT uplinks.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is pure
//! computation:
//!
//! * [`matrix`] and [`nn`]: dense row-major matrices, activations, losses, inverted
//!   dropout, Adam and a central-difference gradient oracle.
//! * [`gat`] and [`train`]: the two-layer graph attention estimator with global
//!   attention pooling and a dense head, hand-written backward pass, and the
//!   early-stopping training loop.
//! * [`channel`] and [`signaling`]: Rician cascaded channels, RIS phase
//!   configuration, AWGN, residual Doppler, PN pilots, BPSK and TDD frames.
//! * [`dataset`]: graph encoding of pilot observations and corpus generation.
//! * [`estimate`]: LS baseline, NMSE, phase sets and quantization, histograms.
//! * [`link`]: a single uplink frame with genie-aided coherent BPSK detection.
//!
//! Randomness always flows through explicitly seeded [`rng::Stream`]s so that every
//! result is a pure function of its seeds.
#![no_std]
#![warn(missing_docs)]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod dataset;
mod error;
pub mod estimate;
pub mod gat;
pub mod link;
pub mod matrix;
pub mod nn;
pub mod rng;
pub mod signaling;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
