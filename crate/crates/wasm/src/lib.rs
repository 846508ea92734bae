//! Browser bindings for the static demo page in `www/`: bandpass response,
//! spectrograms of synthetic scenes, and late fusion of hand-set scores.

use std::collections::BTreeMap;

use fdms_core::cnn::ClassScores;
use fdms_core::dsp::{
    db_unit, design_bandpass, filter_apply, stft, window_gain, BAND_HIGH_HZ, BAND_LOW_HZ,
    STFT_FFT_SIZE, STFT_HOP,
};
use fdms_core::fusion::{default_sensitivity, flag, fuse, FusionConfig, TimedScores};
use fdms_core::simulator::{synth_scene, SimConfig};
use fdms_core::{Error, FaultClass, Modality, Result};
use wasm_bindgen::prelude::*;

fn js_err(e: fdms_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Gain of the analysis bandpass at `points` log-spaced frequencies from
/// 10 Hz to Nyquist, as `[f0, g0, f1, g1, ...]` (Hz, dB).
#[wasm_bindgen]
pub fn filter_response(sample_rate_hz: f64, points: usize) -> Result<Vec<f64>, JsError> {
    bandpass_response(sample_rate_hz, points).map_err(js_err)
}

pub fn bandpass_response(sample_rate_hz: f64, points: usize) -> Result<Vec<f64>> {
    let coeffs = design_bandpass(BAND_LOW_HZ, BAND_HIGH_HZ, sample_rate_hz)?;
    let (lo, hi) = (10f64.ln(), (sample_rate_hz / 2.0).ln());
    let n = points.max(2);
    Ok((0..n)
        .flat_map(|i| {
            let f = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
            [f, coeffs.gain_db(f)]
        })
        .collect())
}

/// Grayscale spectrogram, lowest frequency in the bottom row.
#[wasm_bindgen]
pub struct SpectrogramImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    bin_hz: f64,
}

#[wasm_bindgen]
impl SpectrogramImage {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Frequency step between rows.
    #[wasm_bindgen(getter)]
    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    /// One byte per pixel, row-major.
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }
}

/// Synthesizes a 2 s scene of `fault` and returns the spectrogram of its
/// mono mix, optionally after the bandpass. A NaN `noise_snr_db` means no
/// room noise.
#[wasm_bindgen]
pub fn scene_spectrogram(
    fault: &str,
    seed: u64,
    noise_snr_db: f64,
    filtered: bool,
) -> Result<SpectrogramImage, JsError> {
    spectrogram_image(fault, seed, noise_snr_db, filtered).map_err(js_err)
}

pub fn spectrogram_image(
    fault: &str,
    seed: u64,
    noise_snr_db: f64,
    filtered: bool,
) -> Result<SpectrogramImage> {
    let mut cfg = SimConfig::new(fault.parse::<FaultClass>()?, seed, 2.0);
    cfg.ambient_noise_snr_db = (!noise_snr_db.is_nan()).then_some(noise_snr_db);
    let scene = synth_scene(&cfg)?;
    let rate = f64::from(scene.audio.sample_rate_hz());
    let mut mono: Vec<f64> = scene
        .audio
        .left()
        .iter()
        .zip(scene.audio.right())
        .map(|(l, r)| 0.5 * (l + r))
        .collect();
    if filtered {
        mono = filter_apply(&design_bandpass(BAND_LOW_HZ, BAND_HIGH_HZ, rate)?, &mono)?;
    }
    let spec = stft(&mono, rate, STFT_FFT_SIZE, STFT_HOP)?.scaled(1.0 / window_gain(STFT_FFT_SIZE));
    let (w, h) = (spec.n_frames(), spec.n_bins());
    let mut pixels = vec![0u8; w * h];
    for t in 0..w {
        for k in 0..h {
            pixels[(h - 1 - k) * w + t] = (db_unit(spec.get(t, k)) * 255.0).round() as u8;
        }
    }
    Ok(SpectrogramImage {
        width: w,
        height: h,
        pixels,
        bin_hz: spec.bin_hz,
    })
}

/// Result of fusing one set of per-modality scores.
#[wasm_bindgen]
pub struct FusionResult {
    probs: Vec<f64>,
    flagged: Option<String>,
}

#[wasm_bindgen]
impl FusionResult {
    /// Fused probability per class, in the order given.
    pub fn probs(&self) -> Vec<f64> {
        self.probs.clone()
    }

    /// Flagged fault name, or undefined.
    #[wasm_bindgen(getter)]
    pub fn flagged(&self) -> Option<String> {
        self.flagged.clone()
    }
}

/// Fuses three score vectors over the comma-separated `classes` with the
/// default sensitivity matrix. Each vector is normalized to sum to 1; an
/// empty vector leaves that modality out.
#[wasm_bindgen]
pub fn fuse_scores(
    classes: &str,
    acoustic: &[f64],
    vibration: &[f64],
    thermal: &[f64],
    threshold: f64,
) -> Result<FusionResult, JsError> {
    fusion_result(classes, [acoustic, vibration, thermal], threshold).map_err(js_err)
}

/// Score vectors are in acoustic, vibration, thermal order.
pub fn fusion_result(classes: &str, vectors: [&[f64]; 3], threshold: f64) -> Result<FusionResult> {
    let classes: Vec<FaultClass> = classes
        .split(',')
        .map(|c| c.trim().parse())
        .collect::<Result<_>>()?;
    let mut scores = BTreeMap::new();
    for (modality, raw) in Modality::ALL.into_iter().zip(vectors) {
        if raw.is_empty() {
            continue;
        }
        if raw.len() != classes.len() {
            return Err(Error::InvalidArgument(format!(
                "{modality}: expected {} scores, got {}",
                classes.len(),
                raw.len()
            )));
        }
        let total: f64 = raw.iter().sum();
        if !total.is_finite() || total <= 0.0 || raw.iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{modality}: scores must be non-negative with a positive sum"
            )));
        }
        let probs = raw.iter().map(|p| p / total).collect();
        scores.insert(
            modality,
            TimedScores {
                scores: ClassScores {
                    classes: classes.clone(),
                    probs,
                    modality,
                },
                ts_ms: 0,
            },
        );
    }
    let config = FusionConfig {
        threshold,
        ..FusionConfig::default()
    };
    config.validate()?;
    let fused = fuse(&scores, &default_sensitivity(), &config, 0)?;
    Ok(FusionResult {
        flagged: flag(&fused, &config).map(|c| c.to_string()),
        probs: fused.probs,
    })
}
