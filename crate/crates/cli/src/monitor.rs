//! The streaming monitor: one ingestion worker per enabled modality feeds
//! classified windows through a bounded queue to a single fusion consumer,
//! which emits one JSON event per fusion window.
//!
//! Alignment is by timestamp only. The consumer processes the window ending
//! at `T` once every live stream has delivered something stamped `>= T` (or
//! finished), so the output does not depend on thread scheduling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread;

use fdms_core::cnn::{ClassScores, Model};
use fdms_core::datasets::{read_thermal_dir, AccelStream, PgmStream, WavStream};
use fdms_core::dsp::channel_balance_db;
use fdms_core::features::{acoustic_features, thermal_features, vibration_features};
use fdms_core::fusion::{
    debounce_step, decide, AlarmEvent, DebounceState, FusionConfig, Localization, RateConfig,
    SensitivityMatrix, TimedScores,
};
use fdms_core::signal::samples_to_ms;
use fdms_core::{AudioWindow, FaultClass, Modality, VibrationWindow};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Bounded queue depth between each worker and the consumer.
pub const QUEUE_CAPACITY: usize = 4;
pub const WINDOW_MS: u64 = 2000;
pub const HOP_MS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Acoustic only.
    Baseline,
    /// Acoustic, vibration and thermal.
    Hybrid,
}

impl Preset {
    pub fn modalities(self) -> &'static [Modality] {
        match self {
            Preset::Baseline => &[Modality::Acoustic],
            Preset::Hybrid => &Modality::ALL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmKind {
    Raised,
    Cleared,
}

/// One line of monitor output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorEvent {
    /// End of the fusion window, ms from stream start.
    pub ts_ms: u64,
    /// 0-based index of the fusion window.
    pub window_id: u64,
    /// Latest fresh class probabilities of each enabled modality.
    pub scores: BTreeMap<Modality, BTreeMap<FaultClass, f64>>,
    /// Fused probabilities; absent when no modality was fresh.
    pub fused: Option<BTreeMap<FaultClass, f64>>,
    pub flagged: Option<FaultClass>,
    pub alarm: Option<AlarmKind>,
    /// Fault the alarm transition refers to.
    pub alarm_fault: Option<FaultClass>,
    pub localization: Localization,
    pub modalities_used: Vec<Modality>,
    /// `true` for each enabled modality with no result within the
    /// staleness limit.
    pub stale: BTreeMap<Modality, bool>,
    pub error: Option<String>,
}

/// Where each modality's data comes from. A thermal path may be a directory
/// of numbered frames or a stream of concatenated P5 images.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub audio: Option<PathBuf>,
    pub vibration: Option<PathBuf>,
    pub thermal: Option<PathBuf>,
}

impl Inputs {
    /// The file layout written by the simulator for one scene.
    pub fn scene_dir(dir: &Path) -> Self {
        Self {
            audio: Some(dir.join("audio.wav")),
            vibration: Some(dir.join("vibration.csv")),
            thermal: Some(dir.join("thermal")),
        }
    }

    fn get(&self, m: Modality) -> Option<&PathBuf> {
        match m {
            Modality::Acoustic => self.audio.as_ref(),
            Modality::Vibration => self.vibration.as_ref(),
            Modality::Thermal => self.thermal.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonitorOptions {
    pub preset: Preset,
    pub fusion: FusionConfig,
    pub matrix: SensitivityMatrix,
    pub rates: RateConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonitorSummary {
    pub events: u64,
    pub raised: Vec<FaultClass>,
    pub errors: u64,
}

enum Msg {
    Window {
        ts_ms: u64,
        scores: ClassScores,
        balance_db: Option<f64>,
    },
    Error {
        ts_ms: Option<u64>,
        message: String,
    },
}

impl Msg {
    fn ts(&self) -> Option<u64> {
        match self {
            Msg::Window { ts_ms, .. } => Some(*ts_ms),
            Msg::Error { ts_ms, .. } => *ts_ms,
        }
    }
}

/// Checks that every enabled modality has a model and input, and that the
/// models share one class list.
pub fn check_setup(
    models: &BTreeMap<Modality, Model>,
    inputs: &Inputs,
    preset: Preset,
) -> CliResult<()> {
    let mut classes: Option<&[FaultClass]> = None;
    for &m in preset.modalities() {
        let model = models
            .get(&m)
            .ok_or_else(|| CliError::usage(format!("preset {preset:?} needs a {m} model")))?;
        if inputs.get(m).is_none() {
            return Err(CliError::usage(format!(
                "preset {preset:?} needs a {m} input"
            )));
        }
        match classes {
            Some(c) if c != model.classes() => {
                return Err(CliError::usage("all models must share the same class list"));
            }
            _ => classes = Some(model.classes()),
        }
    }
    Ok(())
}

/// Runs the monitor to input exhaustion, writing one JSON line per fusion
/// window to `out` (flushed per line).
pub fn run_monitor(
    inputs: &Inputs,
    models: &BTreeMap<Modality, Model>,
    opts: &MonitorOptions,
    out: &mut dyn Write,
) -> CliResult<MonitorSummary> {
    check_setup(models, inputs, opts.preset)?;
    opts.fusion.validate()?;
    opts.rates.validate()?;
    let enabled = opts.preset.modalities();

    // Open everything up front so a missing input fails before any output.
    let mut sources = Vec::new();
    for &m in enabled {
        let path = inputs.get(m).expect("checked").clone();
        sources.push((m, open_source(m, &path)?));
    }

    thread::scope(|scope| {
        let mut receivers = BTreeMap::new();
        for (m, source) in sources {
            let (tx, rx) = sync_channel(QUEUE_CAPACITY);
            let model = &models[&m];
            let rates = opts.rates;
            scope.spawn(move || ingest(source, model, rates, &tx));
            receivers.insert(m, rx);
        }
        consume(receivers, opts, out)
    })
}

enum Source {
    Audio(Box<dyn Read + Send>),
    Vibration(Box<dyn Read + Send>),
    ThermalDir(PathBuf),
    ThermalStream(Box<dyn Read + Send>),
}

fn open_source(m: Modality, path: &Path) -> CliResult<Source> {
    let open = |p: &Path| -> CliResult<Box<dyn Read + Send>> {
        let f = File::open(p).map_err(|e| CliError::io(format!("{m} input {}", p.display()), e))?;
        Ok(Box::new(BufReader::new(f)))
    };
    Ok(match m {
        Modality::Acoustic => Source::Audio(open(path)?),
        Modality::Vibration => Source::Vibration(open(path)?),
        Modality::Thermal if path.is_dir() => Source::ThermalDir(path.to_path_buf()),
        Modality::Thermal => Source::ThermalStream(open(path)?),
    })
}

/// Worker body. Returns when the source is exhausted, on an unrecoverable
/// read error, or when the consumer has gone away.
fn ingest(source: Source, model: &Model, rates: RateConfig, tx: &SyncSender<Msg>) {
    let send = |msg: Msg| tx.send(msg).is_ok();
    let fail = |ts_ms: Option<u64>, e: &dyn std::fmt::Display| Msg::Error {
        ts_ms,
        message: e.to_string(),
    };
    match source {
        Source::Audio(r) => {
            let mut wav = match WavStream::new(r) {
                Ok(w) => w,
                Err(e) => {
                    send(fail(None, &e));
                    return;
                }
            };
            let rate = wav.sample_rate_hz();
            let (win, hop) = (samples_for(WINDOW_MS, rate), samples_for(HOP_MS, rate));
            let (mut left, mut right) = (Vec::new(), Vec::new());
            let mut offset = 0usize;
            loop {
                let (l, r) = match wav.read_frames(hop) {
                    Ok(x) => x,
                    Err(e) => {
                        send(fail(None, &e));
                        return;
                    }
                };
                if l.is_empty() {
                    return;
                }
                left.extend(l);
                right.extend(r);
                while left.len() >= win {
                    let ts = samples_to_ms(offset + win, rate);
                    let msg = AudioWindow::new(
                        left[..win].to_vec(),
                        right[..win].to_vec(),
                        rate,
                        samples_to_ms(offset, rate),
                    )
                    .and_then(|w| {
                        let scores = model.forward(&acoustic_features(&w)?, Modality::Acoustic)?;
                        Ok(Msg::Window {
                            ts_ms: ts,
                            scores,
                            balance_db: Some(channel_balance_db(&w)),
                        })
                    })
                    .unwrap_or_else(|e| fail(Some(ts), &e));
                    if !send(msg) {
                        return;
                    }
                    left.drain(..hop);
                    right.drain(..hop);
                    offset += hop;
                }
            }
        }
        Source::Vibration(r) => {
            let rows = match AccelStream::new(r) {
                Ok(s) => s,
                Err(e) => {
                    send(fail(None, &e));
                    return;
                }
            };
            let rate = rates.vibration_hz;
            let (win, hop) = (samples_for(WINDOW_MS, rate), samples_for(HOP_MS, rate));
            let mut axes: [Vec<f64>; 3] = Default::default();
            let mut offset = 0usize;
            for row in rows {
                let row = match row {
                    Ok(r) => r,
                    Err(e @ fdms_core::Error::Io(_)) => {
                        send(fail(None, &e));
                        return;
                    }
                    Err(e) => {
                        if !send(fail(None, &e)) {
                            return;
                        }
                        continue;
                    }
                };
                for (a, v) in axes.iter_mut().zip(&row[1..]) {
                    a.push(*v);
                }
                if axes[0].len() == win {
                    let ts = samples_to_ms(offset + win, rate);
                    let [x, y, z] = &axes;
                    let msg = VibrationWindow::new(
                        x.clone(),
                        y.clone(),
                        z.clone(),
                        rate,
                        samples_to_ms(offset, rate),
                    )
                    .and_then(|w| {
                        Ok(Msg::Window {
                            ts_ms: ts,
                            scores: model.forward(&vibration_features(&w)?, Modality::Vibration)?,
                            balance_db: None,
                        })
                    })
                    .unwrap_or_else(|e| fail(Some(ts), &e));
                    if !send(msg) {
                        return;
                    }
                    for a in &mut axes {
                        a.drain(..hop);
                    }
                    offset += hop;
                }
            }
        }
        Source::ThermalDir(dir) => match read_thermal_dir(&dir, rates.thermal_fps) {
            Ok(seq) => {
                for w in &seq.warnings {
                    if !send(fail(None, w)) {
                        return;
                    }
                }
                for f in seq.frames {
                    if !send(thermal_msg(model, f)) {
                        return;
                    }
                }
            }
            Err(e) => {
                send(fail(None, &e));
            }
        },
        Source::ThermalStream(r) => {
            let frames = match PgmStream::new(r, rates.thermal_fps) {
                Ok(s) => s,
                Err(e) => {
                    send(fail(None, &e));
                    return;
                }
            };
            for f in frames {
                let msg = match f {
                    Ok(f) => thermal_msg(model, f),
                    Err(e) => fail(None, &e),
                };
                if !send(msg) {
                    return;
                }
            }
        }
    }
}

fn thermal_msg(model: &Model, frame: fdms_core::ThermalFrame) -> Msg {
    let ts = frame.ts_ms();
    match thermal_features(std::slice::from_ref(&frame))
        .and_then(|t| model.forward(&t, Modality::Thermal))
    {
        Ok(scores) => Msg::Window {
            ts_ms: ts,
            scores,
            balance_db: None,
        },
        Err(e) => Msg::Error {
            ts_ms: Some(ts),
            message: e.to_string(),
        },
    }
}

fn samples_for(ms: u64, rate: u32) -> usize {
    ((ms * u64::from(rate)) / 1000).max(1) as usize
}

struct Lane {
    rx: Receiver<Msg>,
    stash: Option<Msg>,
    done: bool,
    latest: Option<(u64, ClassScores, Option<f64>)>,
    max_ts: Option<u64>,
}

impl Lane {
    /// Pulls messages stamped `<= t` (and unstamped ones); stops at the
    /// first later message, which is kept for the next window.
    fn advance(&mut self, t: u64, errors: &mut Vec<String>, m: Modality) {
        loop {
            let msg = match self.stash.take() {
                Some(msg) => msg,
                None if self.done => return,
                None => match self.rx.recv() {
                    Ok(msg) => msg,
                    Err(_) => {
                        self.done = true;
                        return;
                    }
                },
            };
            if let Some(ts) = msg.ts() {
                self.max_ts = Some(self.max_ts.map_or(ts, |x| x.max(ts)));
                if ts > t {
                    self.stash = Some(msg);
                    return;
                }
            }
            match msg {
                Msg::Window {
                    ts_ms,
                    scores,
                    balance_db,
                } => self.latest = Some((ts_ms, scores, balance_db)),
                Msg::Error { message, .. } => errors.push(format!("{m}: {message}")),
            }
        }
    }
}

fn consume(
    receivers: BTreeMap<Modality, Receiver<Msg>>,
    opts: &MonitorOptions,
    out: &mut dyn Write,
) -> CliResult<MonitorSummary> {
    let mut lanes: BTreeMap<Modality, Lane> = receivers
        .into_iter()
        .map(|(m, rx)| {
            (
                m,
                Lane {
                    rx,
                    stash: None,
                    done: false,
                    latest: None,
                    max_ts: None,
                },
            )
        })
        .collect();
    let mut state = DebounceState::default();
    let mut summary = MonitorSummary::default();
    let mut t = WINDOW_MS;
    let mut window_id = 0;
    loop {
        let mut errors = Vec::new();
        for (&m, lane) in lanes.iter_mut() {
            lane.advance(t, &mut errors, m);
        }
        let finished = lanes.values().all(|l| l.done && l.stash.is_none());
        let reached = lanes
            .values()
            .filter_map(|l| l.max_ts)
            .max()
            .is_some_and(|x| x >= t);
        if finished && !reached {
            if !errors.is_empty() {
                // Trailing errors after the last window still get reported.
                summary.errors += errors.len() as u64;
                write_event(out, &empty_event(t, window_id, &lanes, errors.join("; ")))?;
                summary.events += 1;
            }
            return Ok(summary);
        }

        let mut fresh = BTreeMap::new();
        let mut balance = None;
        for (&m, lane) in &lanes {
            if let Some((ts, scores, b)) = &lane.latest {
                fresh.insert(
                    m,
                    TimedScores {
                        scores: scores.clone(),
                        ts_ms: *ts,
                    },
                );
                if m == Modality::Acoustic && t.saturating_sub(*ts) <= opts.fusion.staleness_ms {
                    balance = *b;
                }
            }
        }
        let mut event = empty_event(t, window_id, &lanes, String::new());
        let flagged = match decide(&fresh, &opts.matrix, &opts.fusion, t, balance) {
            Ok(d) => {
                for &m in &d.modalities_used {
                    event.scores.insert(
                        m,
                        prob_map(&fresh[&m].scores.classes, &fresh[&m].scores.probs),
                    );
                    event.stale.insert(m, false);
                }
                event.fused = Some(prob_map(&d.fused.classes, &d.fused.probs));
                event.flagged = d.flagged;
                event.localization = d.localization;
                event.modalities_used = d.modalities_used;
                d.flagged
            }
            Err(fdms_core::Error::NoData(msg)) => {
                errors.push(msg);
                None
            }
            Err(e) => return Err(e.into()),
        };
        let (next, alarm) = debounce_step(state, flagged, &opts.fusion);
        state = next;
        match alarm {
            Some(AlarmEvent::Raised(f)) => {
                event.alarm = Some(AlarmKind::Raised);
                event.alarm_fault = Some(f);
                summary.raised.push(f);
            }
            Some(AlarmEvent::Cleared(f)) => {
                event.alarm = Some(AlarmKind::Cleared);
                event.alarm_fault = Some(f);
            }
            None => {}
        }
        summary.errors += errors.len() as u64;
        event.error = (!errors.is_empty()).then(|| errors.join("; "));
        write_event(out, &event)?;
        summary.events += 1;
        t += HOP_MS;
        window_id += 1;
    }
}

fn empty_event(
    t: u64,
    window_id: u64,
    lanes: &BTreeMap<Modality, Lane>,
    error: String,
) -> MonitorEvent {
    MonitorEvent {
        ts_ms: t,
        window_id,
        scores: BTreeMap::new(),
        fused: None,
        flagged: None,
        alarm: None,
        alarm_fault: None,
        localization: Localization::Unknown,
        modalities_used: Vec::new(),
        stale: lanes.keys().map(|&m| (m, true)).collect(),
        error: (!error.is_empty()).then_some(error),
    }
}

fn prob_map(classes: &[FaultClass], probs: &[f64]) -> BTreeMap<FaultClass, f64> {
    classes.iter().copied().zip(probs.iter().copied()).collect()
}

/// One complete line per write, flushed, so an interrupted run never leaves
/// half an object behind.
fn write_event(out: &mut dyn Write, event: &MonitorEvent) -> CliResult<()> {
    let mut line = serde_json::to_vec(event).expect("event serializes");
    line.push(b'\n');
    out.write_all(&line)
        .and_then(|_| out.flush())
        .map_err(|e: io::Error| CliError::io("event output", e))
}
