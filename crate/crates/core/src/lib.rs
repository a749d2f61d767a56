//! Differentiable SNR model and launch-power optimizer for multi-span WDM
//! links amplified by EDFAs without gain flattening.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: channel grid, power spectra, unit conversions
//! - [`oracle`]: synthetic physical EDFA used to generate training data
//! - [`surrogate`]: neural gain and noise-figure models
//! - [`fiber`]: span propagation with SRS and GN-model NLI
//! - [`amplifier`]: amplifier models the link can query
//! - [`cascade`]: multi-span SNR model with gradients
//! - [`optimizer`]: cost functions and launch-profile optimization
//! - [`network`]: topology runs and launch-power sweeps
//! - [`io`]: file formats

pub mod amplifier;
pub mod cascade;
pub mod error;
pub mod fiber;
pub mod io;
pub mod network;
pub mod optimizer;
pub mod oracle;
pub mod spectral;
pub mod surrogate;

pub use error::{Error, Result};
pub use spectral::{ChannelGrid, Domain, NoiseSpectrum, PowerSpectrum};
