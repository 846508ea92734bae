//! Sensor windows, fault taxonomy and basic signal statistics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_AUDIO_RATE_HZ: u32 = 16_000;
pub const DEFAULT_VIBRATION_RATE_HZ: u32 = 200;
pub const DEFAULT_THERMAL_FPS: u32 = 8;
pub const DEFAULT_THERMAL_WIDTH: usize = 160;
pub const DEFAULT_THERMAL_HEIGHT: usize = 120;

/// Lowest audio rate that still resolves the 100-1000 Hz band with margin.
pub const MIN_AUDIO_RATE_HZ: u32 = 2000;

/// The printer conditions the classifiers distinguish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    Normal,
    MaterialRunout,
    NozzleClog,
    OverExtrusion,
    BedAdhesionFailure,
    LayerShift,
    BeltSlip,
    HotEndTempDrift,
    ExtruderGearSlip,
}

impl FaultClass {
    pub const ALL: [FaultClass; 9] = [
        FaultClass::Normal,
        FaultClass::MaterialRunout,
        FaultClass::NozzleClog,
        FaultClass::OverExtrusion,
        FaultClass::BedAdhesionFailure,
        FaultClass::LayerShift,
        FaultClass::BeltSlip,
        FaultClass::HotEndTempDrift,
        FaultClass::ExtruderGearSlip,
    ];

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<FaultClass> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultClass::Normal => "normal",
            FaultClass::MaterialRunout => "material_runout",
            FaultClass::NozzleClog => "nozzle_clog",
            FaultClass::OverExtrusion => "over_extrusion",
            FaultClass::BedAdhesionFailure => "bed_adhesion_failure",
            FaultClass::LayerShift => "layer_shift",
            FaultClass::BeltSlip => "belt_slip",
            FaultClass::HotEndTempDrift => "hot_end_temp_drift",
            FaultClass::ExtruderGearSlip => "extruder_gear_slip",
        }
    }

    pub fn is_fault(self) -> bool {
        self != FaultClass::Normal
    }

    pub fn valid_names() -> String {
        Self::ALL.map(FaultClass::name).join(", ")
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaultClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown fault class '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Acoustic,
    Vibration,
    Thermal,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Acoustic, Modality::Vibration, Modality::Thermal];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Acoustic => "acoustic",
            Modality::Vibration => "vibration",
            Modality::Thermal => "thermal",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown modality '{s}' (expected acoustic, vibration or thermal)"
                ))
            })
    }
}

fn check_finite(name: &str, samples: &[f64]) -> Result<()> {
    match samples.iter().position(|s| !s.is_finite()) {
        Some(i) => Err(Error::invalid(format!(
            "{name}: non-finite sample at index {i}"
        ))),
        None => Ok(()),
    }
}

/// A stereo audio slice, samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioWindow {
    left: Vec<f64>,
    right: Vec<f64>,
    sample_rate_hz: u32,
    start_ts_ms: u64,
}

impl AudioWindow {
    pub fn new(
        left: Vec<f64>,
        right: Vec<f64>,
        sample_rate_hz: u32,
        start_ts_ms: u64,
    ) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::invalid(format!(
                "channel length mismatch: left {} vs right {}",
                left.len(),
                right.len()
            )));
        }
        if left.is_empty() {
            return Err(Error::invalid("audio window is empty"));
        }
        if sample_rate_hz < MIN_AUDIO_RATE_HZ {
            return Err(Error::invalid(format!(
                "audio rate {sample_rate_hz} Hz below minimum {MIN_AUDIO_RATE_HZ} Hz"
            )));
        }
        check_finite("left", &left)?;
        check_finite("right", &right)?;
        Ok(Self {
            left,
            right,
            sample_rate_hz,
            start_ts_ms,
        })
    }

    /// Duplicates a mono signal into both channels.
    pub fn mono(samples: Vec<f64>, sample_rate_hz: u32, start_ts_ms: u64) -> Result<Self> {
        let right = samples.clone();
        Self::new(samples, right, sample_rate_hz, start_ts_ms)
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn start_ts_ms(&self) -> u64 {
        self.start_ts_ms
    }

    pub fn end_ts_ms(&self) -> u64 {
        self.start_ts_ms + samples_to_ms(self.len(), self.sample_rate_hz)
    }

    /// Sub-window `[start, start + len)` in samples.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start.checked_add(len).filter(|&e| e <= self.len());
        let Some(end) = end else {
            return Err(Error::invalid("audio slice out of range"));
        };
        Self::new(
            self.left[start..end].to_vec(),
            self.right[start..end].to_vec(),
            self.sample_rate_hz,
            self.start_ts_ms + samples_to_ms(start, self.sample_rate_hz),
        )
    }
}

/// Three-axis accelerometer slice in g.
#[derive(Debug, Clone, PartialEq)]
pub struct VibrationWindow {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    sample_rate_hz: u32,
    start_ts_ms: u64,
}

impl VibrationWindow {
    pub fn new(
        x: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
        sample_rate_hz: u32,
        start_ts_ms: u64,
    ) -> Result<Self> {
        if x.len() != y.len() || x.len() != z.len() {
            return Err(Error::invalid("vibration axes have different lengths"));
        }
        if x.is_empty() {
            return Err(Error::invalid("vibration window is empty"));
        }
        if sample_rate_hz == 0 {
            return Err(Error::invalid("vibration rate must be positive"));
        }
        check_finite("x", &x)?;
        check_finite("y", &y)?;
        check_finite("z", &z)?;
        Ok(Self {
            x,
            y,
            z,
            sample_rate_hz,
            start_ts_ms,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn axes(&self) -> [&[f64]; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn start_ts_ms(&self) -> u64 {
        self.start_ts_ms
    }

    pub fn end_ts_ms(&self) -> u64 {
        self.start_ts_ms + samples_to_ms(self.len(), self.sample_rate_hz)
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start.checked_add(len).filter(|&e| e <= self.len());
        let Some(end) = end else {
            return Err(Error::invalid("vibration slice out of range"));
        };
        Self::new(
            self.x[start..end].to_vec(),
            self.y[start..end].to_vec(),
            self.z[start..end].to_vec(),
            self.sample_rate_hz,
            self.start_ts_ms + samples_to_ms(start, self.sample_rate_hz),
        )
    }
}

/// A normalized grayscale thermal image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalFrame {
    pixels: Vec<f64>,
    width: usize,
    height: usize,
    ts_ms: u64,
}

impl ThermalFrame {
    pub fn new(pixels: Vec<f64>, width: usize, height: usize, ts_ms: u64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("thermal frame dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "thermal frame has {} pixels, expected {width}x{height}",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!("thermal pixel {i} outside [0,1]")));
        }
        Ok(Self {
            pixels,
            width,
            height,
            ts_ms,
        })
    }

    pub fn uniform(value: f64, width: usize, height: usize, ts_ms: u64) -> Result<Self> {
        Self::new(vec![value; width * height], width, height, ts_ms)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ts_ms(&self) -> u64 {
        self.ts_ms
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn with_ts(mut self, ts_ms: u64) -> Self {
        self.ts_ms = ts_ms;
        self
    }
}

/// One aligned multimodal recording with a single label.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub label: FaultClass,
    pub audio: AudioWindow,
    pub vibration: VibrationWindow,
    pub thermal: Vec<ThermalFrame>,
}

pub fn samples_to_ms(n: usize, rate_hz: u32) -> u64 {
    (n as u64 * 1000) / u64::from(rate_hz)
}

/// Start offsets of every full window of `window_len` samples advanced by `hop`.
pub fn window_starts(
    stream_len: usize,
    window_len: usize,
    hop: usize,
) -> Result<std::iter::StepBy<std::ops::RangeInclusive<usize>>> {
    if window_len == 0 || hop == 0 {
        return Err(Error::invalid("window length and hop must be positive"));
    }
    if hop > window_len {
        return Err(Error::invalid(format!(
            "hop {hop} exceeds window length {window_len}"
        )));
    }
    // An empty inclusive range when the stream is shorter than one window.
    let (lo, hi) = if stream_len >= window_len {
        (0, stream_len - window_len)
    } else {
        (1, 0)
    };
    Ok((lo..=hi).step_by(hop))
}

/// Splits `stream` into overlapping windows; window `i` starts at `i * hop`.
pub fn make_windows(stream: &[f64], window_len: usize, hop: usize) -> Result<Vec<&[f64]>> {
    Ok(window_starts(stream.len(), window_len, hop)?
        .map(|s| &stream[s..s + window_len])
        .collect())
}

/// Root mean square level.
pub fn rms(signal: &[f64]) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::invalid("rms of an empty signal"));
    }
    let sum_sq: f64 = signal.iter().map(|s| s * s).sum();
    Ok((sum_sq / signal.len() as f64).sqrt())
}
