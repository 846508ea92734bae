//! Butterworth bandpass design and biquad cascades.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Complex frequency response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Magnitudes of the two poles.
    pub fn pole_radii(&self) -> [f64; 2] {
        // Roots of z^2 + a1 z + a2.
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        let p1 = (-self.a1 + disc) / 2.0;
        let p2 = (-self.a1 - disc) / 2.0;
        [p1.norm(), p2.norm()]
    }

    pub fn is_stable(&self) -> bool {
        self.pole_radii().iter().all(|&r| r < 1.0)
    }
}

/// A cascade of biquads together with the band it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoeffs {
    pub sections: Vec<Biquad>,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterCoeffs {
    /// Magnitude response of the whole cascade at `freq_hz`, in dB.
    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let h: Complex64 = self.sections.iter().map(|s| s.response(w)).product();
        20.0 * h.norm().log10()
    }
}

/// 4th-order Butterworth bandpass: the 2nd-order analog lowpass prototype is
/// mapped to a bandpass and discretized with the prewarped bilinear transform,
/// giving two biquads. Each section is scaled to unit gain at the geometric
/// band center.
pub fn design_bandpass(low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Result<FilterCoeffs> {
    let nyquist = sample_rate_hz / 2.0;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(Error::invalid(format!(
            "bandpass requires 0 < low < high < fs/2, got low={low_hz} high={high_hz} fs={sample_rate_hz}"
        )));
    }
    let fs2 = 2.0 * sample_rate_hz;
    let warp = |f: f64| fs2 * (PI * f / sample_rate_hz).tan();
    let (wl, wh) = (warp(low_hz), warp(high_hz));
    let w0 = (wl * wh).sqrt();
    let bw = wh - wl;

    // Upper-half-plane prototype pole; its conjugate yields the mirrored pair.
    let proto = Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    let half = proto * bw / 2.0;
    let root = (half * half - w0 * w0).sqrt();
    let analog_poles = [half + root, half - root];

    let center_w = 2.0 * (w0 / fs2).atan();
    let sections = analog_poles
        .iter()
        .map(|&s| {
            let z = (fs2 + s) / (fs2 - s);
            let mut sec = Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * z.re,
                a2: z.norm_sqr(),
            };
            let g = 1.0 / sec.response(center_w).norm();
            sec.b0 *= g;
            sec.b2 *= g;
            sec
        })
        .collect();

    Ok(FilterCoeffs {
        sections,
        low_hz,
        high_hz,
        sample_rate_hz,
    })
}

/// Runs the cascade (direct form II transposed, zero initial state).
pub fn filter_apply(coeffs: &FilterCoeffs, signal: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = signal.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite input sample at index {i}"
        )));
    }
    let mut out = signal.to_vec();
    for sec in &coeffs.sections {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in out.iter_mut() {
            let x = *v;
            let y = sec.b0 * x + s1;
            s1 = sec.b1 * x - sec.a1 * y + s2;
            s2 = sec.b2 * x - sec.a2 * y;
            *v = y;
        }
    }
    Ok(out)
}
