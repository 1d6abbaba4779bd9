//! RIS-aided passive localization: statistical RIS beamforming from a
//! position prior, MUSIC direction finding, Zadoff-Chu ranging and iterative
//! search-area refinement, plus a Monte Carlo harness.

pub mod beamform;
pub mod channel;
pub mod dsp;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod harness;
pub mod papir;
pub mod sdp;
pub mod seeds;

pub use error::{Error, Result};
