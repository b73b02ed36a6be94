//! Blind configuration of programmable metasurfaces from received-signal-strength
//! samples alone.
//!
//! The crate covers the whole loop of the method:
//!
//! * [`geometry`]: scene placement, link angles and line-of-sight phases.
//! * [`channel`]: Rician channel ensembles, realizations, SNR and RSS.
//! * [`sampling`]: random phase schedules and RSS dataset collection.
//! * [`bcm`]: conditional sample means, phase selection and phase retrieval.
//! * [`sensing`]: angle-of-arrival estimation and two-anchor triangulation.
//! * [`baselines`]: zero phase shifts, beam scanning and a CSI genie.
//! * [`harness`]: config-driven sweeps, metrics and result files.

pub mod baselines;
pub mod bcm;
pub mod channel;
pub mod dataset_io;
mod error;
pub mod geometry;
pub mod harness;
pub mod phase;
pub mod rng;
pub mod sampling;
pub mod scene_file;
pub mod sensing;

pub use error::{Error, Result};
