//! Sensitivity-weighted fusion of per-modality class scores, threshold
//! flagging, alarm debouncing and stereo localization.

mod config;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cnn::ClassScores;
use crate::error::{Error, Result};
use crate::signal::{FaultClass, Modality};

pub use config::{FileConfig, LevelWeights, RateConfig};

/// How well a modality reveals a fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    High,
    Partial,
    Low,
}

/// Per (fault, modality) sensitivity levels and the weights they map to.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    levels: [[Level; 3]; 9],
    weights: LevelWeights,
}

fn modality_index(m: Modality) -> usize {
    match m {
        Modality::Acoustic => 0,
        Modality::Vibration => 1,
        Modality::Thermal => 2,
    }
}

impl SensitivityMatrix {
    pub fn uniform(level: Level) -> Self {
        Self {
            levels: [[level; 3]; 9],
            weights: LevelWeights::default(),
        }
    }

    pub fn level(&self, fault: FaultClass, modality: Modality) -> Level {
        self.levels[fault.code() as usize][modality_index(modality)]
    }

    pub fn set_level(&mut self, fault: FaultClass, modality: Modality, level: Level) {
        self.levels[fault.code() as usize][modality_index(modality)] = level;
    }

    pub fn weights(&self) -> LevelWeights {
        self.weights
    }

    pub fn with_weights(mut self, weights: LevelWeights) -> Result<Self> {
        weights.validate()?;
        self.weights = weights;
        Ok(self)
    }

    pub fn weight(&self, fault: FaultClass, modality: Modality) -> f64 {
        self.weights.of(self.level(fault, modality))
    }
}

impl Default for SensitivityMatrix {
    fn default() -> Self {
        default_sensitivity()
    }
}

/// Acoustic sensing is strong on extrusion faults, vibration on motion
/// faults, thermal on hot-end and flow faults.
pub fn default_sensitivity() -> SensitivityMatrix {
    use FaultClass::*;
    use Level::*;
    let mut m = SensitivityMatrix::uniform(Low);
    let table: [(FaultClass, [Level; 3]); 9] = [
        //                   acoustic vibration thermal
        (Normal, [Partial, Partial, Partial]),
        (MaterialRunout, [High, Low, High]),
        (NozzleClog, [High, Low, High]),
        (OverExtrusion, [High, Low, Partial]),
        (BedAdhesionFailure, [Partial, Partial, Low]),
        (LayerShift, [Low, High, Low]),
        (BeltSlip, [Low, High, Low]),
        (HotEndTempDrift, [Low, Low, High]),
        (ExtruderGearSlip, [High, Partial, Low]),
    ];
    for (fault, levels) in table {
        for (modality, level) in Modality::ALL.into_iter().zip(levels) {
            m.set_level(fault, modality, level);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub threshold: f64,
    pub debounce_k: u32,
    pub staleness_ms: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            threshold: 0.8,
            debounce_k: 3,
            staleness_ms: 2000,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "threshold {} must lie in (0, 1)",
                self.threshold
            )));
        }
        if self.debounce_k == 0 {
            return Err(Error::invalid("debounce_k must be at least 1"));
        }
        if self.staleness_ms == 0 {
            return Err(Error::invalid("staleness_ms must be positive"));
        }
        Ok(())
    }
}

/// A modality's latest scores with the time they describe.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedScores {
    pub scores: ClassScores,
    pub ts_ms: u64,
}

/// Fused per-class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedScores {
    pub classes: Vec<FaultClass>,
    pub probs: Vec<f64>,
    pub modalities_used: Vec<Modality>,
}

impl FusedScores {
    pub fn prob(&self, class: FaultClass) -> Option<f64> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .map(|i| self.probs[i])
    }

    /// Highest fused probability over all classes, Normal included; ties go
    /// to the lowest class code.
    pub fn top(&self) -> FaultClass {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best]
                || (self.probs[i] == self.probs[best] && self.classes[i] < self.classes[best])
            {
                best = i;
            }
        }
        self.classes[best]
    }
}

/// Weighted average per class over present, non-stale modalities:
/// `fused[f] = sum_m w(f,m) p_m[f] / sum_m w(f,m)`.
pub fn fuse(
    scores: &BTreeMap<Modality, TimedScores>,
    matrix: &SensitivityMatrix,
    config: &FusionConfig,
    now_ms: u64,
) -> Result<FusedScores> {
    let usable: Vec<(&Modality, &TimedScores)> = scores
        .iter()
        .filter(|(_, s)| now_ms.saturating_sub(s.ts_ms) <= config.staleness_ms)
        .collect();
    let Some((_, first)) = usable.first() else {
        return Err(Error::NoData(format!(
            "no modality scores fresher than {} ms",
            config.staleness_ms
        )));
    };
    let classes = first.scores.classes.clone();
    for (m, s) in &usable {
        if s.scores.classes != classes {
            return Err(Error::invalid(format!(
                "{m} scores cover a different class set"
            )));
        }
        if s.scores.probs.len() != classes.len() {
            return Err(Error::invalid(format!("{m} scores have the wrong length")));
        }
    }
    let probs = classes
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let (num, den) = usable.iter().fold((0.0, 0.0), |(n, d), (m, s)| {
                let w = matrix.weight(class, **m);
                (n + w * s.scores.probs[i], d + w)
            });
            num / den
        })
        .collect();
    Ok(FusedScores {
        classes,
        probs,
        modalities_used: usable.iter().map(|(m, _)| **m).collect(),
    })
}

/// The most probable fault (Normal excluded) when it reaches the threshold.
pub fn flag(fused: &FusedScores, config: &FusionConfig) -> Option<FaultClass> {
    let mut best: Option<(FaultClass, f64)> = None;
    for (&c, &p) in fused.classes.iter().zip(&fused.probs) {
        if !c.is_fault() {
            continue;
        }
        best = match best {
            Some((bc, bp)) if bp > p || (bp == p && bc < c) => Some((bc, bp)),
            _ => Some((c, p)),
        };
    }
    best.filter(|&(_, p)| p >= config.threshold).map(|(c, _)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmEvent {
    Raised(FaultClass),
    Cleared(FaultClass),
}

/// Alarm state carried across fusion windows.
///
/// `run_length` counts consecutive windows flagging `current_fault`. An alarm
/// is raised when a run reaches `debounce_k`; it clears after `debounce_k`
/// consecutive windows that do not flag the alarmed fault. A different fault
/// reaching `debounce_k` replaces the active alarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DebounceState {
    pub current_fault: Option<FaultClass>,
    pub run_length: u32,
    pub alarm: Option<FaultClass>,
    pub quiet_run: u32,
}

impl DebounceState {
    pub fn alarm_active(&self) -> bool {
        self.alarm.is_some()
    }
}

pub fn debounce_step(
    state: DebounceState,
    flagged: Option<FaultClass>,
    config: &FusionConfig,
) -> (DebounceState, Option<AlarmEvent>) {
    let k = config.debounce_k;
    let mut next = state;
    match flagged {
        Some(f) if state.current_fault == Some(f) => {
            next.run_length = state.run_length.saturating_add(1)
        }
        Some(f) => {
            next.current_fault = Some(f);
            next.run_length = 1;
        }
        None => {
            next.current_fault = None;
            next.run_length = 0;
        }
    }
    if let Some(active) = state.alarm {
        next.quiet_run = if flagged == Some(active) {
            0
        } else {
            state.quiet_run + 1
        };
    }

    if let (Some(f), true) = (flagged, next.run_length == k) {
        next.alarm = Some(f);
        next.quiet_run = 0;
        return (next, Some(AlarmEvent::Raised(f)));
    }
    if let Some(active) = next.alarm {
        if next.quiet_run >= k {
            next.alarm = None;
            next.quiet_run = 0;
            return (next, Some(AlarmEvent::Cleared(active)));
        }
    }
    (next, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localization {
    Left,
    Right,
    Center,
    Unknown,
}

impl fmt::Display for Localization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Localization::Left => "left",
            Localization::Right => "right",
            Localization::Center => "center",
            Localization::Unknown => "unknown",
        })
    }
}

/// Half-width of the centered dead zone, dB.
pub const LOCALIZATION_DEAD_ZONE_DB: f64 = 3.0;

pub fn localize(balance_db: f64) -> Localization {
    if !balance_db.is_finite() {
        Localization::Unknown
    } else if balance_db > LOCALIZATION_DEAD_ZONE_DB {
        Localization::Left
    } else if balance_db < -LOCALIZATION_DEAD_ZONE_DB {
        Localization::Right
    } else {
        Localization::Center
    }
}

/// Outcome of one fusion window.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionDecision {
    pub fused: FusedScores,
    pub flagged: Option<FaultClass>,
    pub modalities_used: Vec<Modality>,
    pub localization: Localization,
}

/// Fuses, flags and localizes in one call. `balance_db` is the stereo
/// balance of the acoustic window, when one is available.
pub fn decide(
    scores: &BTreeMap<Modality, TimedScores>,
    matrix: &SensitivityMatrix,
    config: &FusionConfig,
    now_ms: u64,
    balance_db: Option<f64>,
) -> Result<FusionDecision> {
    let fused = fuse(scores, matrix, config, now_ms)?;
    let flagged = flag(&fused, config);
    let localization = match balance_db {
        Some(b) if fused.modalities_used.contains(&Modality::Acoustic) => localize(b),
        _ => Localization::Unknown,
    };
    Ok(FusionDecision {
        modalities_used: fused.modalities_used.clone(),
        fused,
        flagged,
        localization,
    })
}
