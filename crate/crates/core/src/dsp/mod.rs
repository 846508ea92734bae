//! Signal preprocessing: bandpass filtering, normalization, spectrograms and
//! the fixed-size tensors the classifiers consume.

mod filter;
mod spectrum;
mod tensor;

pub use filter::{design_bandpass, filter_apply, Biquad, FilterCoeffs};
pub use spectrum::{
    hann, hz_to_mel, mel_project, mel_to_hz, stft, vibration_fft, window_gain, AxisSpectra,
    FrequencyScale, MelFilterbank, Spectrogram, MEL_BANDS, MEL_FMAX_HZ, MEL_FMIN_HZ, STFT_FFT_SIZE,
    STFT_HOP, VIBRATION_FFT_SIZE,
};
pub use tensor::{
    axis_spectra_to_tensor, bilinear_resize, db_unit, spectrogram_to_tensor, thermal_to_tensor,
    InputTensor, DB_CEIL, DB_FLOOR, TENSOR_SIDE,
};

use crate::error::{Error, Result};
use crate::signal::{rms, AudioWindow};

pub const BAND_LOW_HZ: f64 = 100.0;
pub const BAND_HIGH_HZ: f64 = 1000.0;

/// Below this RMS a channel counts as silent for balance measurements.
pub const SILENCE_RMS: f64 = 1e-6;

/// Scales the signal so its largest absolute sample is 1. All-zero input
/// is returned unchanged.
pub fn normalize_peak(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::invalid("cannot normalize an empty signal"));
    }
    let peak = signal.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if !peak.is_finite() {
        return Err(Error::invalid("signal contains non-finite samples"));
    }
    if peak == 0.0 {
        return Ok(signal.to_vec());
    }
    Ok(signal.iter().map(|s| s / peak).collect())
}

/// Left/right RMS ratio in dB; positive means louder on the left. Returns 0
/// when either channel is silent.
pub fn channel_balance_db(win: &AudioWindow) -> f64 {
    let l = rms(win.left()).unwrap_or(0.0);
    let r = rms(win.right()).unwrap_or(0.0);
    if l <= SILENCE_RMS || r <= SILENCE_RMS {
        return 0.0;
    }
    20.0 * (l / r).log10()
}
