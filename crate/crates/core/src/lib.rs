//! Qualification toolkit for QRNGs built on semiconductor-laser phase noise.
//!
//! Two decision criteria are provided: the statistical distance between a
//! recorded intensity histogram and a fitted ideal arcsine, and the lag-1
//! autocorrelation coefficient in dB. Around them sit the Monte-Carlo boundary
//! calibration, a gain-switched laser simulator that produces synthetic
//! pulse trains, per-pulse extraction and a sweep harness producing
//! acceptance maps.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adc;
pub mod autocorr;
pub mod criteria;
pub mod error;
pub mod extract;
pub mod io;
pub mod laser;
pub mod par;
pub mod phasesim;
pub mod qualify;

pub use adc::{
    build_histogram, dynamic_range_fraction, quantize, wrap_phase, AdcModel, IntensityHistogram, SampleSequence,
};
pub use error::{Error, Result};
