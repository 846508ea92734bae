//! Preprocessing chains turning raw sensor windows into classifier inputs.
//! Training, evaluation and live monitoring all go through these.

use crate::dsp::{
    axis_spectra_to_tensor, design_bandpass, filter_apply, mel_project, normalize_peak,
    spectrogram_to_tensor, stft, thermal_to_tensor, vibration_fft, window_gain, InputTensor,
    BAND_HIGH_HZ, BAND_LOW_HZ, MEL_BANDS, MEL_FMAX_HZ, MEL_FMIN_HZ, STFT_FFT_SIZE, STFT_HOP,
    VIBRATION_FFT_SIZE,
};
use crate::error::{Error, Result};
use crate::signal::{AudioWindow, ThermalFrame, VibrationWindow};

/// Bandpass each channel, average to mono, peak-normalize, then a 64-band
/// mel spectrogram of the amplitude-calibrated STFT.
pub fn acoustic_features(win: &AudioWindow) -> Result<InputTensor> {
    if win.len() < STFT_FFT_SIZE {
        return Err(Error::invalid(format!(
            "audio window of {} samples is shorter than one {STFT_FFT_SIZE}-point frame",
            win.len()
        )));
    }
    let rate = f64::from(win.sample_rate_hz());
    let coeffs = design_bandpass(BAND_LOW_HZ, BAND_HIGH_HZ, rate)?;
    let left = filter_apply(&coeffs, win.left())?;
    let right = filter_apply(&coeffs, win.right())?;
    let mono: Vec<f64> = left
        .iter()
        .zip(&right)
        .map(|(l, r)| 0.5 * (l + r))
        .collect();
    let mono = normalize_peak(&mono)?;
    let spec = stft(&mono, rate, STFT_FFT_SIZE, STFT_HOP)?.scaled(1.0 / window_gain(STFT_FFT_SIZE));
    let mel = mel_project(&spec, MEL_BANDS, MEL_FMIN_HZ, MEL_FMAX_HZ.min(rate / 2.0))?;
    spectrogram_to_tensor(&mel)
}

pub fn vibration_features(win: &VibrationWindow) -> Result<InputTensor> {
    axis_spectra_to_tensor(&vibration_fft(win, VIBRATION_FFT_SIZE)?)
}

/// Uses the most recent frame.
pub fn thermal_features(frames: &[ThermalFrame]) -> Result<InputTensor> {
    let last = frames
        .iter()
        .max_by_key(|f| f.ts_ms())
        .ok_or_else(|| Error::NoData("no thermal frames".into()))?;
    Ok(thermal_to_tensor(last))
}
