//! Fusion configuration files (TOML, or JSON when the extension is `.json`).
//!
//! ```toml
//! [fusion]
//! threshold = 0.8
//! debounce_k = 3
//! staleness_ms = 2000
//!
//! [weights]
//! high = 1.0
//! partial = 0.5
//! low = 0.1
//!
//! [sensitivity.material_runout]
//! acoustic = "high"
//! vibration = "low"
//!
//! [rates]
//! audio_hz = 16000
//! vibration_hz = 200
//! thermal_fps = 8
//! ```
//!
//! Every table and key is optional; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::signal::{
    FaultClass, Modality, DEFAULT_AUDIO_RATE_HZ, DEFAULT_THERMAL_FPS, DEFAULT_VIBRATION_RATE_HZ,
    MIN_AUDIO_RATE_HZ,
};

use super::{default_sensitivity, FusionConfig, Level, SensitivityMatrix};

/// Weight assigned to each sensitivity level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelWeights {
    pub high: f64,
    pub partial: f64,
    pub low: f64,
}

impl Default for LevelWeights {
    fn default() -> Self {
        Self {
            high: 1.0,
            partial: 0.5,
            low: 0.1,
        }
    }
}

impl LevelWeights {
    pub fn of(&self, level: Level) -> f64 {
        match level {
            Level::High => self.high,
            Level::Partial => self.partial,
            Level::Low => self.low,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("high", self.high),
            ("partial", self.partial),
            ("low", self.low),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "weight {name} = {w} must be positive"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub audio_hz: u32,
    pub vibration_hz: u32,
    pub thermal_fps: u32,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            audio_hz: DEFAULT_AUDIO_RATE_HZ,
            vibration_hz: DEFAULT_VIBRATION_RATE_HZ,
            thermal_fps: DEFAULT_THERMAL_FPS,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.audio_hz < MIN_AUDIO_RATE_HZ {
            return Err(Error::invalid(format!(
                "audio rate {} Hz is below {MIN_AUDIO_RATE_HZ} Hz",
                self.audio_hz
            )));
        }
        if self.vibration_hz == 0 || self.thermal_fps == 0 {
            return Err(Error::invalid("sample rates must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModalityLevels {
    acoustic: Option<Level>,
    vibration: Option<Level>,
    thermal: Option<Level>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    fusion: Option<FusionSection>,
    #[serde(default)]
    weights: Option<LevelWeights>,
    #[serde(default)]
    sensitivity: BTreeMap<String, ModalityLevels>,
    #[serde(default)]
    rates: Option<RateConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FusionSection {
    threshold: f64,
    debounce_k: u32,
    staleness_ms: u64,
}

impl Default for FusionSection {
    fn default() -> Self {
        let d = FusionConfig::default();
        Self {
            threshold: d.threshold,
            debounce_k: d.debounce_k,
            staleness_ms: d.staleness_ms,
        }
    }
}

/// Everything a configuration file can set, with defaults filled in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub fusion: FusionConfig,
    pub sensitivity: SensitivityMatrix,
    pub rates: RateConfig,
}


impl FileConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| Location::Line(text[..s.start.min(text.len())].matches('\n').count() + 1))
                .unwrap_or(Location::Offset(0));
            Error::format(at, e.message().to_string())
        })?;
        Self::from_raw(raw)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)
            .map_err(|e| Error::format(Location::Line(e.line()), e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let parsed = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        };
        parsed.map_err(|e| match e {
            Error::Format { at, message } => Error::Format {
                at: Location::File(path.to_path_buf()),
                message: format!("{at}: {message}"),
            },
            other => other,
        })
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let f = raw.fusion.unwrap_or_default();
        let fusion = FusionConfig {
            threshold: f.threshold,
            debounce_k: f.debounce_k,
            staleness_ms: f.staleness_ms,
        };
        fusion.validate()?;
        let mut sensitivity =
            default_sensitivity().with_weights(raw.weights.unwrap_or_default())?;
        for (name, levels) in raw.sensitivity {
            let fault: FaultClass = name.parse()?;
            for (m, l) in [
                (Modality::Acoustic, levels.acoustic),
                (Modality::Vibration, levels.vibration),
                (Modality::Thermal, levels.thermal),
            ] {
                if let Some(l) = l {
                    sensitivity.set_level(fault, m, l);
                }
            }
        }
        let rates = raw.rates.unwrap_or_default();
        rates.validate()?;
        Ok(Self {
            fusion,
            sensitivity,
            rates,
        })
    }
}
