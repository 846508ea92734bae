//! Multimodal fault detection for FDM 3D printing.
//!
//! The crate is organised along the monitoring pipeline:
//!
//! - [`signal`]: shared sensor window types, fault taxonomy, windowing.
//! - [`dsp`]: bandpass filtering, STFT / mel spectrograms, vibration FFT and
//!   the fixed-size tensors fed to the classifiers.
//! - [`cnn`]: a small convolutional network with backpropagation, momentum
//!   SGD, evaluation and a binary model format.
//! - [`fusion`]: sensitivity-weighted fusion of per-modality scores,
//!   thresholding, debouncing and stereo localization.
//! - [`simulator`]: seeded synthetic printer scenes for every fault class.
//! - [`datasets`]: WAV / accelerometer CSV / PGM / manifest formats.
//! - [`features`]: the per-modality preprocessing chains shared by training
//!   and monitoring.

pub mod cnn;
pub mod datasets;
pub mod dsp;
pub mod error;
pub mod features;
pub mod fusion;
pub mod rng;
pub mod signal;
pub mod simulator;

pub use error::{Error, Location, Result};
pub use signal::{AudioWindow, FaultClass, Modality, Scene, ThermalFrame, VibrationWindow};
