//! Seeded synthetic printer scenes.
//!
//! Every signature level lives in [`params`] so the recipes can be retuned
//! in one place. A scene is fully determined by its [`SimConfig`].

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::datasets::{self, Manifest, ManifestEntry, Rates};
use crate::dsp::{design_bandpass, filter_apply, BAND_HIGH_HZ, BAND_LOW_HZ};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::signal::{
    AudioWindow, FaultClass, Scene, ThermalFrame, VibrationWindow, DEFAULT_AUDIO_RATE_HZ,
    DEFAULT_THERMAL_FPS, DEFAULT_THERMAL_HEIGHT, DEFAULT_THERMAL_WIDTH, DEFAULT_VIBRATION_RATE_HZ,
    MIN_AUDIO_RATE_HZ,
};

/// Signature constants for every recipe.
pub mod params {
    // Audio (dimensionless amplitude).
    pub const STEPPER_F0_HZ: f64 = 220.0;
    pub const STEPPER_F0_JITTER: f64 = 0.03;
    pub const STEPPER_HARMONICS: [f64; 4] = [0.06, 0.02, 0.01, 0.005];
    pub const HISS_LOW_HZ: f64 = 300.0;
    pub const HISS_HIGH_HZ: f64 = 900.0;
    pub const HISS_RMS: f64 = 0.04;
    pub const CLOG_HISS_DB: f64 = -10.0;
    pub const OVEREXTRUSION_HISS_DB: f64 = 6.0;
    pub const MIC_NOISE_STD: f64 = 0.002;
    pub const CLICK_RATE_HZ: f64 = 2.0;
    pub const CLICK_AMPLITUDE: f64 = 0.25;
    pub const CLICK_DECAY_S: f64 = 0.004;
    pub const SCRAPE_RATE_HZ: f64 = 1.5;
    pub const SCRAPE_AMPLITUDE: f64 = 0.08;
    pub const SCRAPE_SECONDS: (f64, f64) = (0.10, 0.25);
    pub const THUD_HZ: f64 = 120.0;
    pub const THUD_AMPLITUDE: f64 = 0.3;
    pub const THUD_DECAY_S: f64 = 0.06;
    pub const SLAP_AMPLITUDE: f64 = 0.15;
    pub const SLAP_DECAY_S: f64 = 0.008;
    pub const GRIND_RATE_HZ: f64 = 3.0;
    pub const GRIND_SECONDS: f64 = 0.08;
    pub const GRIND_AMPLITUDE: f64 = 0.1;
    pub const GRIND_BAND_HZ: (f64, f64) = (500.0, 1500.0);
    pub const GRIND_PULSE_HZ: f64 = 40.0;

    // Vibration (g). Per axis: (amplitude, frequency) pairs.
    pub const VIB_TONES: [[(f64, f64); 2]; 3] = [
        [(0.02, 12.0), (0.01, 31.0)],
        [(0.015, 9.0), (0.008, 27.0)],
        [(0.01, 18.0), (0.005, 41.0)],
    ];
    pub const VIB_NOISE_STD: f64 = 0.003;
    pub const SHIFT_AMPLITUDE: f64 = 0.5;
    pub const SHIFT_HZ: f64 = 25.0;
    pub const SHIFT_DECAY_S: f64 = 0.08;
    /// The transient starts within this fraction of the scene.
    pub const SHIFT_ONSET: (f64, f64) = (0.1, 0.6);
    pub const BELT_BURST_RATE_HZ: f64 = 1.0;
    pub const BELT_BURST_AMPLITUDE: f64 = 0.1;
    pub const BELT_BURST_HZ: f64 = 35.0;
    pub const BELT_BURST_SECONDS: f64 = 0.15;
    pub const GEAR_SPIKE_AMPLITUDE: f64 = 0.06;

    // Thermal (normalized intensity, pixels).
    pub const BACKGROUND: f64 = 0.2;
    pub const THERMAL_NOISE_STD: f64 = 0.01;
    pub const NOZZLE_INTENSITY: f64 = 0.9;
    pub const CLOG_NOZZLE_INTENSITY: f64 = 1.0;
    pub const NOZZLE_SIGMA_PX: f64 = 6.0;
    pub const CLOG_NOZZLE_SIGMA_PX: f64 = 9.0;
    pub const NOZZLE_COL: f64 = 80.0;
    pub const NOZZLE_ROW: f64 = 40.0;
    pub const NOZZLE_JITTER_PX: f64 = 3.0;
    pub const TRAIL_INTENSITY: f64 = 0.6;
    pub const TRAIL_WIDTH_PX: f64 = 10.0;
    pub const OVEREXTRUSION_TRAIL_WIDTH_PX: f64 = 18.0;
    pub const TRAIL_END_ROW: f64 = 110.0;
    pub const RUNOUT_TRAIL_DECAY_S: f64 = 0.5;
    pub const ADHESION_TRAIL_JITTER_PX: f64 = 6.0;
    pub const DRIFT_SPAN: f64 = 0.2;
}

use params::*;

/// Rows and columns (half-open) guaranteed inside the trail of a default
/// frame for any nozzle jitter.
pub const TRAIL_REGION: ((usize, usize), (usize, usize)) = ((60, 100), (78, 83));
/// A strip of pure background.
pub const BACKGROUND_REGION: ((usize, usize), (usize, usize)) = ((0, 120), (0, 40));

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub fault: FaultClass,
    pub duration_s: f64,
    pub audio_rate_hz: u32,
    pub vibration_rate_hz: u32,
    pub thermal_fps: u32,
    /// Pink room noise mixed into each audio channel at this SNR.
    pub ambient_noise_snr_db: Option<f64>,
    /// Gain applied to the left channel, dB.
    pub stereo_bias_db: f64,
}

impl SimConfig {
    pub fn new(fault: FaultClass, seed: u64, duration_s: f64) -> Self {
        Self {
            seed,
            fault,
            duration_s,
            audio_rate_hz: DEFAULT_AUDIO_RATE_HZ,
            vibration_rate_hz: DEFAULT_VIBRATION_RATE_HZ,
            thermal_fps: DEFAULT_THERMAL_FPS,
            ambient_noise_snr_db: None,
            stereo_bias_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        if self.audio_rate_hz < MIN_AUDIO_RATE_HZ
            || self.vibration_rate_hz == 0
            || self.thermal_fps == 0
        {
            return Err(Error::invalid(
                "sample rates must be positive (audio at least 2000 Hz)",
            ));
        }
        if self.ambient_noise_snr_db.is_some_and(|s| !s.is_finite())
            || !self.stereo_bias_db.is_finite()
        {
            return Err(Error::invalid("noise SNR and stereo bias must be finite"));
        }
        // Grind bursts need their band below Nyquist.
        if f64::from(self.audio_rate_hz) / 2.0 <= GRIND_BAND_HZ.1 {
            return Err(Error::invalid(
                "audio rate too low for the simulator recipes (need > 3000 Hz)",
            ));
        }
        Ok(())
    }
}

pub type SimScene = Scene;

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn white(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gauss(rng)).collect()
}

fn scale_to_rms(mut x: Vec<f64>, target: f64) -> Vec<f64> {
    let r = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / r);
    }
    x
}

fn db(gain: f64) -> f64 {
    10f64.powf(gain / 20.0)
}

/// Event times of a roughly periodic process with +-10 % period jitter and
/// a random phase.
fn periodic_times(rng: &mut Rng, rate_hz: f64, duration_s: f64) -> Vec<f64> {
    let period = 1.0 / rate_hz;
    let mut t = rng.gen_range(0.0..period);
    let mut out = Vec::new();
    while t < duration_s {
        out.push(t);
        t += period * rng.gen_range(0.9..1.1);
    }
    out
}

/// Adds `shape(dt)` for `dt` in `[0, len_s)` starting at `t0`.
fn add_event(buf: &mut [f64], rate: f64, t0: f64, len_s: f64, mut shape: impl FnMut(f64) -> f64) {
    let start = (t0 * rate).round().max(0.0) as usize;
    let end = (((t0 + len_s) * rate).round() as usize).min(buf.len());
    for (i, v) in buf.iter_mut().enumerate().take(end).skip(start) {
        *v += shape(i as f64 / rate - t0);
    }
}

/// Approximate 1/f noise (Kellet's filter over white noise).
fn pink(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..n)
        .map(|_| {
            let w = gauss(rng);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            out
        })
        .collect()
}

/// Onset of the layer-shift transient, shared by audio and vibration.
fn shift_onset(seed: u64, duration_s: f64) -> f64 {
    let mut r = rng::seeded(rng::substream(seed, "shift"));
    duration_s * r.gen_range(SHIFT_ONSET.0..SHIFT_ONSET.1)
}

fn synth_audio(cfg: &SimConfig) -> Result<AudioWindow> {
    let mut r = rng::seeded(rng::substream(cfg.seed, "audio"));
    let rate = f64::from(cfg.audio_rate_hz);
    let n = ((cfg.duration_s * rate).round() as usize).max(1);
    let d = cfg.duration_s;
    let fault = cfg.fault;

    let f0 = STEPPER_F0_HZ * (1.0 + r.gen_range(-STEPPER_F0_JITTER..STEPPER_F0_JITTER));
    let phases: Vec<f64> = STEPPER_HARMONICS
        .iter()
        .map(|_| r.gen_range(0.0..2.0 * PI))
        .collect();
    let mut src: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            STEPPER_HARMONICS
                .iter()
                .zip(&phases)
                .enumerate()
                .filter(|(k, _)| f0 * (*k as f64 + 1.0) < rate / 2.0)
                .map(|(k, (a, p))| a * (2.0 * PI * f0 * (k as f64 + 1.0) * t + p).sin())
                .sum()
        })
        .collect();

    let hiss_gain = match fault {
        FaultClass::MaterialRunout => 0.0,
        FaultClass::NozzleClog => db(CLOG_HISS_DB),
        FaultClass::OverExtrusion => db(OVEREXTRUSION_HISS_DB),
        _ => 1.0,
    };
    let hiss_band = design_bandpass(HISS_LOW_HZ, HISS_HIGH_HZ, rate)?;
    let hiss = scale_to_rms(
        filter_apply(&hiss_band, &white(&mut r, n))?,
        HISS_RMS * hiss_gain,
    );
    src.iter_mut().zip(&hiss).for_each(|(s, h)| *s += h);

    match fault {
        FaultClass::NozzleClog => {
            for t0 in periodic_times(&mut r, CLICK_RATE_HZ, d) {
                let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
                let burst = white(&mut r, (rate * 6.0 * CLICK_DECAY_S) as usize + 1);
                add_event(&mut src, rate, t0, 6.0 * CLICK_DECAY_S, |dt| {
                    let i = ((dt * rate) as usize).min(burst.len() - 1);
                    sign * CLICK_AMPLITUDE
                        * (-dt / CLICK_DECAY_S).exp()
                        * (0.5 + 0.5 * burst[i].tanh())
                });
            }
        }
        FaultClass::BedAdhesionFailure => {
            for t0 in periodic_times(&mut r, SCRAPE_RATE_HZ, d) {
                if !r.gen_bool(0.7) {
                    continue;
                }
                let len = r.gen_range(SCRAPE_SECONDS.0..SCRAPE_SECONDS.1);
                let burst = white(&mut r, (rate * len) as usize + 1);
                add_event(&mut src, rate, t0, len, |dt| {
                    let env = (PI * dt / len).sin().powi(2);
                    SCRAPE_AMPLITUDE * env * burst[((dt * rate) as usize).min(burst.len() - 1)]
                });
            }
        }
        FaultClass::LayerShift => {
            let t0 = shift_onset(cfg.seed, d);
            add_event(&mut src, rate, t0, 6.0 * THUD_DECAY_S, |dt| {
                THUD_AMPLITUDE * (-dt / THUD_DECAY_S).exp() * (2.0 * PI * THUD_HZ * dt).sin()
            });
        }
        FaultClass::BeltSlip => {
            for t0 in periodic_times(&mut r, BELT_BURST_RATE_HZ, d) {
                let burst = white(&mut r, (rate * 6.0 * SLAP_DECAY_S) as usize + 1);
                add_event(&mut src, rate, t0, 6.0 * SLAP_DECAY_S, |dt| {
                    SLAP_AMPLITUDE
                        * (-dt / SLAP_DECAY_S).exp()
                        * burst[((dt * rate) as usize).min(burst.len() - 1)].clamp(-2.5, 2.5)
                        / 2.5
                });
            }
        }
        FaultClass::ExtruderGearSlip => {
            let band = design_bandpass(GRIND_BAND_HZ.0, GRIND_BAND_HZ.1, rate)?;
            for t0 in periodic_times(&mut r, GRIND_RATE_HZ, d) {
                let m = (rate * GRIND_SECONDS) as usize + 1;
                let burst = scale_to_rms(filter_apply(&band, &white(&mut r, m))?, 1.0);
                add_event(&mut src, rate, t0, GRIND_SECONDS, |dt| {
                    let pulse = if (dt * GRIND_PULSE_HZ).fract() < 0.5 {
                        1.0
                    } else {
                        0.3
                    };
                    GRIND_AMPLITUDE * pulse * burst[((dt * rate) as usize).min(m - 1)] / 2.0
                });
            }
        }
        _ => {}
    }

    let mut left: Vec<f64> = src
        .iter()
        .map(|s| s + MIC_NOISE_STD * gauss(&mut r))
        .collect();
    let mut right: Vec<f64> = src
        .iter()
        .map(|s| s + MIC_NOISE_STD * gauss(&mut r))
        .collect();

    if let Some(snr) = cfg.ambient_noise_snr_db {
        // SNR is referred to the 100-1000 Hz analysis band.
        let band = design_bandpass(BAND_LOW_HZ, BAND_HIGH_HZ, rate)?;
        let in_band = |x: &[f64]| -> Result<f64> {
            let y = filter_apply(&band, x)?;
            Ok(y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64)
        };
        let clean = 0.5 * (in_band(&left)? + in_band(&right)?);
        let mut nr = rng::seeded(rng::substream(cfg.seed, "ambient"));
        for ch in [&mut left, &mut right] {
            let noise = pink(&mut nr, n);
            let gain = (clean / 10f64.powf(snr / 10.0) / in_band(&noise)?.max(1e-30)).sqrt();
            ch.iter_mut().zip(&noise).for_each(|(s, v)| *s += gain * v);
        }
    }

    let bias = db(cfg.stereo_bias_db);
    left.iter_mut()
        .for_each(|s| *s = (*s * bias).clamp(-1.0, 1.0));
    right.iter_mut().for_each(|s| *s = s.clamp(-1.0, 1.0));
    AudioWindow::new(left, right, cfg.audio_rate_hz, 0)
}

fn synth_vibration(cfg: &SimConfig) -> Result<VibrationWindow> {
    let mut r = rng::seeded(rng::substream(cfg.seed, "vibration"));
    let rate = f64::from(cfg.vibration_rate_hz);
    let n = ((cfg.duration_s * rate).round() as usize).max(1);
    let d = cfg.duration_s;

    let mut axes: [Vec<f64>; 3] = Default::default();
    for (axis, tones) in axes.iter_mut().zip(VIB_TONES) {
        let phases = [r.gen_range(0.0..2.0 * PI), r.gen_range(0.0..2.0 * PI)];
        *axis = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                tones
                    .iter()
                    .zip(phases)
                    .filter(|((_, f), _)| *f < rate / 2.0)
                    .map(|((a, f), p)| a * (2.0 * PI * f * t + p).sin())
                    .sum::<f64>()
                    + VIB_NOISE_STD * gauss(&mut r)
            })
            .collect();
    }

    match cfg.fault {
        FaultClass::LayerShift => {
            let t0 = shift_onset(cfg.seed, d);
            let shift_hz = SHIFT_HZ.min(rate / 4.0);
            for (axis, gain) in axes.iter_mut().zip([1.0, 0.6, 0.2]) {
                add_event(axis, rate, t0, 8.0 * SHIFT_DECAY_S, |dt| {
                    gain * SHIFT_AMPLITUDE
                        * (-dt / SHIFT_DECAY_S).exp()
                        * (2.0 * PI * shift_hz * dt + PI / 2.0).sin()
                });
            }
        }
        FaultClass::BeltSlip => {
            let hz = BELT_BURST_HZ.min(rate / 4.0);
            for t0 in periodic_times(&mut r, BELT_BURST_RATE_HZ, d) {
                for (axis, gain) in axes.iter_mut().zip([1.0, 0.8, 0.3]) {
                    add_event(axis, rate, t0, BELT_BURST_SECONDS, |dt| {
                        gain * BELT_BURST_AMPLITUDE
                            * (PI * dt / BELT_BURST_SECONDS).sin()
                            * (2.0 * PI * hz * dt).sin()
                    });
                }
            }
        }
        FaultClass::ExtruderGearSlip => {
            for t0 in periodic_times(&mut r, GRIND_RATE_HZ, d) {
                let i = ((t0 * rate) as usize).min(n - 1);
                axes[2][i] += GEAR_SPIKE_AMPLITUDE;
                if i + 1 < n {
                    axes[2][i + 1] -= 0.5 * GEAR_SPIKE_AMPLITUDE;
                }
            }
        }
        _ => {}
    }
    let [x, y, z] = axes;
    VibrationWindow::new(x, y, z, cfg.vibration_rate_hz, 0)
}

fn synth_thermal(cfg: &SimConfig) -> Result<Vec<ThermalFrame>> {
    let mut r = rng::seeded(rng::substream(cfg.seed, "thermal"));
    let (w, h) = (DEFAULT_THERMAL_WIDTH, DEFAULT_THERMAL_HEIGHT);
    let fps = f64::from(cfg.thermal_fps);
    let n = ((cfg.duration_s * fps).ceil() as usize).max(1);
    let fault = cfg.fault;

    let col0 = NOZZLE_COL + r.gen_range(-NOZZLE_JITTER_PX..NOZZLE_JITTER_PX);
    let row0 = NOZZLE_ROW + r.gen_range(-NOZZLE_JITTER_PX..NOZZLE_JITTER_PX);
    let drift_sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    let (peak0, sigma) = match fault {
        FaultClass::NozzleClog => (CLOG_NOZZLE_INTENSITY, CLOG_NOZZLE_SIGMA_PX),
        _ => (NOZZLE_INTENSITY, NOZZLE_SIGMA_PX),
    };
    let width = match fault {
        FaultClass::OverExtrusion => OVEREXTRUSION_TRAIL_WIDTH_PX,
        _ => TRAIL_WIDTH_PX,
    };

    (0..n)
        .map(|k| {
            let t = k as f64 / fps;
            let progress = if n > 1 {
                k as f64 / (n - 1) as f64
            } else {
                1.0
            };
            let peak = match fault {
                FaultClass::HotEndTempDrift => peak0 + drift_sign * DRIFT_SPAN * progress,
                _ => peak0,
            };
            let trail = match fault {
                FaultClass::MaterialRunout => {
                    (TRAIL_INTENSITY - BACKGROUND) * (-t / RUNOUT_TRAIL_DECAY_S).exp()
                }
                _ => TRAIL_INTENSITY - BACKGROUND,
            };
            let trail_col = match fault {
                FaultClass::BedAdhesionFailure => {
                    col0 + r.gen_range(-ADHESION_TRAIL_JITTER_PX..ADHESION_TRAIL_JITTER_PX)
                }
                _ => col0,
            };
            let mut px = Vec::with_capacity(w * h);
            for row in 0..h {
                for col in 0..w {
                    let (y, x) = (row as f64, col as f64);
                    let mut v = BACKGROUND;
                    if y >= row0 && y <= TRAIL_END_ROW && (x - trail_col).abs() <= width / 2.0 {
                        // Soft taper towards the trail end.
                        let fade = ((TRAIL_END_ROW - y) / 10.0).min(1.0);
                        v += trail * fade;
                    }
                    let d2 = (x - col0).powi(2) + (y - row0).powi(2);
                    let blob =
                        BACKGROUND + (peak - BACKGROUND) * (-d2 / (2.0 * sigma * sigma)).exp();
                    v = v.max(blob);
                    v += THERMAL_NOISE_STD * gauss(&mut r);
                    px.push(v.clamp(0.0, 1.0));
                }
            }
            ThermalFrame::new(px, w, h, k as u64 * 1000 / u64::from(cfg.thermal_fps))
        })
        .collect()
}

/// Deterministic per seed: the same config always yields identical scenes.
pub fn synth_scene(config: &SimConfig) -> Result<SimScene> {
    config.validate()?;
    Ok(SimScene {
        label: config.fault,
        audio: synth_audio(config)?,
        vibration: synth_vibration(config)?,
        thermal: synth_thermal(config)?,
    })
}

/// Options for [`generate_corpus`] beyond class list and count.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOptions {
    pub duration_s: f64,
    pub ambient_noise_snr_db: Option<f64>,
    pub stereo_bias_db: f64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            duration_s: 2.0,
            ambient_noise_snr_db: None,
            stereo_bias_db: 0.0,
        }
    }
}

/// Seed of the `index`-th scene of `class` in a corpus with `master` seed.
/// Independent of which other classes are generated.
pub fn scene_seed(master: u64, class: FaultClass, index: usize) -> u64 {
    rng::derive_seed(
        rng::derive_seed(master, u64::from(class.code())),
        index as u64,
    )
}

pub fn scene_id(class: FaultClass, index: usize) -> String {
    format!("{}_{index:04}", class.name())
}

/// Writes `per_class_count` scenes per class under `out_dir/scenes/` and a
/// `manifest.json` at `out_dir`. Returns the manifest.
pub fn generate_corpus(
    per_class_count: usize,
    classes: &[FaultClass],
    seed: u64,
    out_dir: &Path,
    options: &CorpusOptions,
) -> Result<Manifest> {
    if per_class_count == 0 {
        return Err(Error::invalid("per-class count must be at least 1"));
    }
    if classes.is_empty() {
        return Err(Error::invalid("class list is empty"));
    }
    let mut unique = classes.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() != classes.len() {
        return Err(Error::invalid("class list contains duplicates"));
    }

    let mut entries = Vec::with_capacity(per_class_count * classes.len());
    for &class in classes {
        for i in 0..per_class_count {
            let mut cfg = SimConfig::new(class, scene_seed(seed, class, i), options.duration_s);
            cfg.ambient_noise_snr_db = options.ambient_noise_snr_db;
            cfg.stereo_bias_db = options.stereo_bias_db;
            let scene = synth_scene(&cfg)?;
            let id = scene_id(class, i);
            let rel = Path::new("scenes").join(&id);
            let dir = out_dir.join(&rel);
            fs::create_dir_all(&dir)?;
            datasets::write_audio(&dir.join("audio.wav"), &scene.audio)?;
            datasets::write_accel_csv(&dir.join("vibration.csv"), &scene.vibration)?;
            datasets::write_thermal_dir(&dir.join("thermal"), &scene.thermal)?;
            entries.push(ManifestEntry {
                scene_id: id,
                label: class.name().to_string(),
                audio_path: rel.join("audio.wav"),
                vibration_path: rel.join("vibration.csv"),
                thermal_dir: rel.join("thermal"),
                duration_s: cfg.duration_s,
                rates: Rates {
                    audio_hz: cfg.audio_rate_hz,
                    vibration_hz: cfg.vibration_rate_hz,
                    thermal_fps: cfg.thermal_fps,
                },
            });
        }
    }
    let manifest = Manifest::new(entries);
    datasets::write_manifest(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
