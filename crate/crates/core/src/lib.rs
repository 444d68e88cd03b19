//! Baseline-free guided-wave damage detection and localization.
//!
//! A Kolmogorov-Arnold autoencoder (KAE) is trained on pristine
//! actuator-sensor waveforms. Its reconstruction error on a current waveform
//! is that path's damage index (DI). Per-region health indices are compared
//! against thresholds calibrated on held-out pristine data, and damaged
//! regions are imaged with a modified elliptical probabilistic fusion of the
//! path DIs. Overlapping regions are merged into one final damage list.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line pipeline live in the `gwkae` companion crate.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod bspline;
pub mod damage_index;
mod error;
pub mod imaging;
pub mod kae;
pub mod kan;
mod math;
pub mod metrics;
pub mod multi_damage;
pub mod signal;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
