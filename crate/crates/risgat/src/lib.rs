//! File formats, experiment drivers and command-line front end for the RIS channel
//! estimator in `risgat-core`.
//!
//! * [`config`]: the `key = value` run configuration and its overrides.
//! * [`store`]: the `RISD` dataset container and its manifest.
//! * [`weights`]: the `GATW` weight file.
//! * [`experiments`]: NMSE, Doppler, BER, confidence-band and histogram reports.
//! * [`cli`]: the `risgat` subcommands.
#![warn(missing_docs)]

mod error;

pub mod cli;
pub mod config;
pub mod experiments;
pub mod store;
pub mod weights;

pub use error::{Error, Result};
