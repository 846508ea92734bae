//! Short-time spectra, mel projection and per-axis vibration spectra.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::VibrationWindow;

pub const STFT_FFT_SIZE: usize = 512;
pub const STFT_HOP: usize = 256;
pub const MEL_BANDS: usize = 64;
pub const MEL_FMIN_HZ: f64 = 50.0;
pub const MEL_FMAX_HZ: f64 = 2000.0;
pub const VIBRATION_FFT_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyScale {
    Linear,
    Mel,
}

/// Time-frequency magnitudes, stored frame-major (`[n_frames x n_bins]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    mags: Vec<f64>,
    n_frames: usize,
    n_bins: usize,
    pub bin_hz: f64,
    pub hop_s: f64,
    pub scale: FrequencyScale,
}

impl Spectrogram {
    pub fn new(
        mags: Vec<f64>,
        n_frames: usize,
        n_bins: usize,
        bin_hz: f64,
        hop_s: f64,
        scale: FrequencyScale,
    ) -> Result<Self> {
        if mags.len() != n_frames * n_bins {
            return Err(Error::invalid("spectrogram size does not match its shape"));
        }
        if mags.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid(
                "spectrogram magnitudes must be finite and non-negative",
            ));
        }
        Ok(Self {
            mags,
            n_frames,
            n_bins,
            bin_hz,
            hop_s,
            scale,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn is_empty(&self) -> bool {
        self.mags.is_empty()
    }

    pub fn mags(&self) -> &[f64] {
        &self.mags
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.mags[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.mags[t * self.n_bins + k]
    }

    /// Multiplies every magnitude by `factor` (non-negative).
    pub fn scaled(mut self, factor: f64) -> Self {
        debug_assert!(factor >= 0.0);
        self.mags.iter_mut().for_each(|m| *m *= factor);
        self
    }

    /// Mean magnitude of bin `k` over all frames.
    pub fn bin_mean(&self, k: usize) -> f64 {
        (0..self.n_frames).map(|t| self.get(t, k)).sum::<f64>() / self.n_frames as f64
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Magnitude STFT with a periodic Hann window and no padding.
///
/// Magnitudes are raw `|DFT|` values; callers feeding the tensor mapping
/// divide by the window sum (see [`window_gain`]) to get amplitude units.
pub fn stft(
    signal: &[f64],
    sample_rate_hz: f64,
    fft_size: usize,
    hop: usize,
) -> Result<Spectrogram> {
    if fft_size == 0 || hop == 0 {
        return Err(Error::invalid("fft size and hop must be positive"));
    }
    if signal.len() < fft_size {
        return Err(Error::invalid(format!(
            "signal of {} samples shorter than fft size {fft_size}",
            signal.len()
        )));
    }
    let window = hann(fft_size);
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let n_bins = fft_size / 2 + 1;
    let n_frames = (signal.len() - fft_size) / hop + 1;
    let mut mags = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex64::default(); fft_size];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for t in 0..n_frames {
        let seg = &signal[t * hop..t * hop + fft_size];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        mags.extend(buf[..n_bins].iter().map(|c| c.norm()));
    }
    Spectrogram::new(
        mags,
        n_frames,
        n_bins,
        sample_rate_hz / fft_size as f64,
        hop as f64 / sample_rate_hz,
        FrequencyScale::Linear,
    )
}

/// Sum of the Hann window: dividing `|DFT|` by this gives amplitude units.
pub fn window_gain(fft_size: usize) -> f64 {
    hann(fft_size).iter().sum()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `[n_mels x n_bins]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
}

impl MelFilterbank {
    /// Filters are triangles on the HTK mel scale, evaluated at bin centers.
    /// A triangle narrower than the bin spacing that catches no bin center
    /// gets unit weight on the bin nearest its center instead.
    pub fn new(
        n_bins: usize,
        bin_hz: f64,
        n_mels: usize,
        fmin_hz: f64,
        fmax_hz: f64,
    ) -> Result<Self> {
        if n_mels == 0 || n_bins < 2 {
            return Err(Error::invalid(
                "mel filterbank needs at least one band and two bins",
            ));
        }
        if !(fmin_hz >= 0.0 && fmax_hz > fmin_hz) {
            return Err(Error::invalid(format!(
                "mel range requires fmax > fmin, got {fmin_hz}..{fmax_hz}"
            )));
        }
        let nyquist = (n_bins - 1) as f64 * bin_hz;
        if fmax_hz > nyquist + 1e-9 {
            return Err(Error::invalid(format!(
                "mel fmax {fmax_hz} Hz above Nyquist {nyquist} Hz"
            )));
        }
        let (mlo, mhi) = (hz_to_mel(fmin_hz), hz_to_mel(fmax_hz));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                *w = if f > lo && f <= center {
                    (f - lo) / (center - lo)
                } else if f > center && f < hi {
                    (hi - f) / (hi - center)
                } else {
                    0.0
                };
            }
            if row.iter().all(|&w| w == 0.0) {
                let nearest = ((center / bin_hz).round() as usize).min(n_bins - 1);
                row[nearest] = 1.0;
            }
        }
        Ok(Self {
            weights,
            n_mels,
            n_bins,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Applies the filterbank to one linear-magnitude frame.
    pub fn apply_frame(&self, frame: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.row(m).iter().zip(frame).map(|(w, x)| w * x).sum();
        }
    }
}

/// Projects a linear spectrogram onto `n_mels` triangular mel bands.
pub fn mel_project(
    spec: &Spectrogram,
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Result<Spectrogram> {
    if spec.scale != FrequencyScale::Linear {
        return Err(Error::invalid(
            "mel projection needs a linear-frequency spectrogram",
        ));
    }
    let bank = MelFilterbank::new(spec.n_bins, spec.bin_hz, n_mels, fmin_hz, fmax_hz)?;
    let mut mags = vec![0.0; spec.n_frames * n_mels];
    for (t, out) in mags.chunks_exact_mut(n_mels).enumerate() {
        bank.apply_frame(spec.frame(t), out);
    }
    let mel_step_hz = (fmax_hz - fmin_hz) / n_mels as f64;
    Spectrogram::new(
        mags,
        spec.n_frames,
        n_mels,
        mel_step_hz,
        spec.hop_s,
        FrequencyScale::Mel,
    )
}

/// Per-axis amplitude spectra of one vibration window.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpectra {
    pub axes: [Vec<f64>; 3],
    pub bin_hz: f64,
}

/// Mean-removed, Hann-windowed magnitude spectrum of each axis over the
/// first `fft_size` samples, bins `0..=fft_size/2`, divided by the window sum.
pub fn vibration_fft(win: &VibrationWindow, fft_size: usize) -> Result<AxisSpectra> {
    if fft_size < 2 {
        return Err(Error::invalid("vibration fft size must be at least 2"));
    }
    if win.len() < fft_size {
        return Err(Error::invalid(format!(
            "vibration window of {} samples shorter than fft size {fft_size}",
            win.len()
        )));
    }
    let window = hann(fft_size);
    let gain: f64 = window.iter().sum();
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let spectrum = |axis: &[f64]| {
        let seg = &axis[..fft_size];
        let mean = seg.iter().sum::<f64>() / fft_size as f64;
        let mut buf: Vec<Complex64> = seg
            .iter()
            .zip(&window)
            .map(|(&x, &w)| Complex64::new((x - mean) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        buf[..=fft_size / 2]
            .iter()
            .map(|c| c.norm() / gain)
            .collect::<Vec<_>>()
    };
    let [x, y, z] = win.axes();
    Ok(AxisSpectra {
        axes: [spectrum(x), spectrum(y), spectrum(z)],
        bin_hz: f64::from(win.sample_rate_hz()) / fft_size as f64,
    })
}
