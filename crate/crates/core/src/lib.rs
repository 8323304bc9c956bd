//! Hydration classification from 18-channel absorbance spectra.

pub mod dsp;
pub mod edge;
pub mod features;
pub mod forest;
pub mod io;
pub mod pipeline;
pub mod seed;
pub mod spectra;
pub mod synth;
