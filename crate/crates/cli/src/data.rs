//! Manifest-driven sample loading, the seeded train/validation split and
//! per-modality scoring shared by `train`, `evaluate` and the acceptance
//! suite.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fdms_core::cnn::{EvalReport, Labeled, Model};
use fdms_core::datasets::{
    manifest_dir, read_accel_csv, read_audio, read_manifest, read_thermal_dir, Manifest,
    ManifestEntry,
};
use fdms_core::dsp::InputTensor;
use fdms_core::features::{acoustic_features, thermal_features, vibration_features};
use fdms_core::fusion::{fuse, FusionConfig, SensitivityMatrix, TimedScores};
use fdms_core::{rng, FaultClass, Modality};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Default held-out fraction.
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;

/// Reads and validates a manifest; problems are reported as I/O-class
/// failures (the data is unreadable as a corpus).
pub fn load_manifest(path: &Path) -> CliResult<Manifest> {
    read_manifest(path).map_err(|e| CliError::io(format!("manifest {}", path.display()), e))
}

/// Sorted distinct labels of a manifest.
pub fn manifest_classes(m: &Manifest) -> CliResult<Vec<FaultClass>> {
    let mut set = BTreeSet::new();
    for e in &m.entries {
        set.insert(e.class()?);
    }
    Ok(set.into_iter().collect())
}

/// Preprocesses one modality of one scene.
pub fn entry_features(
    base: &Path,
    entry: &ManifestEntry,
    modality: Modality,
) -> CliResult<InputTensor> {
    let ctx = |p: &Path| format!("scene '{}' ({})", entry.scene_id, p.display());
    Ok(match modality {
        Modality::Acoustic => {
            let p = base.join(&entry.audio_path);
            let audio = read_audio(&p, 0).map_err(|e| CliError::io(ctx(&p), e))?;
            acoustic_features(&audio).map_err(|e| CliError::io(ctx(&p), e))?
        }
        Modality::Vibration => {
            let p = base.join(&entry.vibration_path);
            let series = read_accel_csv(&p).map_err(|e| CliError::io(ctx(&p), e))?;
            let win = series
                .into_window(entry.rates.vibration_hz)
                .map_err(|e| CliError::io(ctx(&p), e))?;
            vibration_features(&win).map_err(|e| CliError::io(ctx(&p), e))?
        }
        Modality::Thermal => {
            let p = base.join(&entry.thermal_dir);
            let seq = read_thermal_dir(&p, entry.rates.thermal_fps)
                .map_err(|e| CliError::io(ctx(&p), e))?;
            thermal_features(&seq.frames).map_err(|e| CliError::io(ctx(&p), e))?
        }
    })
}

/// One preprocessed sample per manifest entry, in manifest order.
pub fn load_samples(
    manifest_path: &Path,
    manifest: &Manifest,
    modality: Modality,
) -> CliResult<Vec<Labeled>> {
    let base = manifest_dir(manifest_path);
    manifest
        .entries
        .iter()
        .map(|e| {
            Ok(Labeled {
                input: entry_features(&base, e, modality)?,
                class: e.class()?,
            })
        })
        .collect()
}

/// Stratified split of sample indices: each class contributes
/// `round(n * val_fraction)` validation samples, at least one and at most
/// `n - 1`. Depends only on the label sequence and the seed, so every
/// modality of a corpus splits the same way.
pub fn stratified_split(
    labels: &[FaultClass],
    val_fraction: f64,
    seed: u64,
) -> CliResult<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(CliError::usage(format!(
            "split fraction {val_fraction} must lie in (0, 1)"
        )));
    }
    let mut by_class: BTreeMap<FaultClass, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let small: Vec<String> = by_class
        .iter()
        .filter(|(_, v)| v.len() < 2)
        .map(|(c, v)| format!("{c} ({})", v.len()))
        .collect();
    if !small.is_empty() {
        return Err(CliError::data(format!(
            "every class needs at least 2 samples to split; too few: {}",
            small.join(", ")
        )));
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (class, mut idx) in by_class {
        let mut r = rng::seeded(rng::derive_seed(
            rng::substream(seed, "split"),
            u64::from(class.code()),
        ));
        idx.shuffle(&mut r);
        let n_val = ((idx.len() as f64 * val_fraction).round() as usize).clamp(1, idx.len() - 1);
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

pub fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Which part of a corpus to evaluate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    All,
    Train,
    Val,
}

pub fn subset_indices(
    labels: &[FaultClass],
    subset: Subset,
    val_fraction: f64,
    seed: u64,
) -> CliResult<Vec<usize>> {
    match subset {
        Subset::All => Ok((0..labels.len()).collect()),
        Subset::Train => Ok(stratified_split(labels, val_fraction, seed)?.0),
        Subset::Val => Ok(stratified_split(labels, val_fraction, seed)?.1),
    }
}

/// Models keyed by modality must agree on their class list, and it must
/// equal the label set being evaluated.
pub fn check_classes(
    models: &BTreeMap<Modality, Model>,
    labels: &[FaultClass],
) -> CliResult<Vec<FaultClass>> {
    let wanted: BTreeSet<FaultClass> = labels.iter().copied().collect();
    let mut reference: Option<(Modality, Vec<FaultClass>)> = None;
    for (&m, model) in models {
        let classes = model.classes().to_vec();
        let set: BTreeSet<FaultClass> = classes.iter().copied().collect();
        if set != wanted {
            return Err(CliError::usage(format!(
                "class sets differ: {m} model has [{}], data has [{}]",
                join(&set),
                join(&wanted)
            )));
        }
        match &reference {
            Some((rm, rc)) if *rc != classes => {
                return Err(CliError::usage(format!(
                    "{rm} and {m} models order their classes differently: [{}] vs [{}]",
                    join(rc),
                    join(&classes)
                )))
            }
            Some(_) => {}
            None => reference = Some((m, classes)),
        }
    }
    reference
        .map(|(_, c)| c)
        .ok_or_else(|| CliError::usage("no model given"))
}

fn join<'a>(classes: impl IntoIterator<Item = &'a FaultClass>) -> String {
    classes
        .into_iter()
        .map(|c| c.name())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Per-modality and fused reports over the same scenes.
#[derive(Debug, Clone, Serialize)]
pub struct MultiReport {
    pub per_modality: BTreeMap<Modality, EvalReport>,
    pub fused: Option<EvalReport>,
}

/// Scores each sample set with its model; with more than one modality the
/// fused top class is scored as well. All sample vectors must be aligned
/// scene by scene.
pub fn evaluate_multi(
    models: &BTreeMap<Modality, Model>,
    samples: &BTreeMap<Modality, Vec<Labeled>>,
    matrix: &SensitivityMatrix,
    fusion: &FusionConfig,
) -> CliResult<MultiReport> {
    let mut labels: Option<Vec<FaultClass>> = None;
    for s in samples.values() {
        let l: Vec<FaultClass> = s.iter().map(|x| x.class).collect();
        match &labels {
            Some(prev) if *prev != l => {
                return Err(CliError::usage("modality sample sets are not aligned"))
            }
            _ => labels = Some(l),
        }
    }
    let labels = labels.ok_or_else(|| CliError::usage("nothing to evaluate"))?;
    if labels.is_empty() {
        return Err(CliError::usage("nothing to evaluate"));
    }
    let classes = check_classes(models, &labels)?;

    let mut scores: BTreeMap<Modality, Vec<_>> = BTreeMap::new();
    for (&m, model) in models {
        let set = samples
            .get(&m)
            .ok_or_else(|| CliError::usage(format!("no {m} samples for the {m} model")))?;
        let s = set
            .iter()
            .map(|x| model.forward(&x.input, m))
            .collect::<fdms_core::Result<Vec<_>>>()?;
        scores.insert(m, s);
    }
    let mut per_modality = BTreeMap::new();
    for (&m, s) in &scores {
        let pairs: Vec<_> = labels.iter().zip(s).map(|(&t, p)| (t, p.top())).collect();
        per_modality.insert(m, EvalReport::from_pairs(&classes, &pairs)?);
    }
    let fused = if scores.len() > 1 {
        let mut pairs = Vec::with_capacity(labels.len());
        for (i, &t) in labels.iter().enumerate() {
            let timed: BTreeMap<Modality, TimedScores> = scores
                .iter()
                .map(|(&m, s)| {
                    (
                        m,
                        TimedScores {
                            scores: s[i].clone(),
                            ts_ms: 0,
                        },
                    )
                })
                .collect();
            pairs.push((t, fuse(&timed, matrix, fusion, 0)?.top()));
        }
        Some(EvalReport::from_pairs(&classes, &pairs)?)
    } else {
        None
    };
    Ok(MultiReport {
        per_modality,
        fused,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use FaultClass::*;

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<FaultClass> = (0..30)
            .map(|i| if i % 3 == 0 { Normal } else { NozzleClog })
            .collect();
        let (t, v) = stratified_split(&labels, 0.2, 4).unwrap();
        assert_eq!(t.len() + v.len(), 30);
        assert_eq!(v.iter().filter(|&&i| labels[i] == Normal).count(), 2);
        assert_eq!(v.iter().filter(|&&i| labels[i] == NozzleClog).count(), 4);
        assert_eq!(
            stratified_split(&labels, 0.2, 4).unwrap(),
            (t.clone(), v.clone())
        );
        assert_ne!(stratified_split(&labels, 0.2, 5).unwrap().1, v);
    }

    #[test]
    fn split_needs_two_per_class() {
        let e = stratified_split(&[Normal, Normal, NozzleClog], 0.2, 0).unwrap_err();
        assert_eq!(e.status(), crate::ExitStatus::Data);
        assert!(e.to_string().contains("nozzle_clog (1)"));
        assert!(stratified_split(&[Normal, Normal], 1.0, 0).is_err());
    }

    #[test]
    fn tiny_classes_keep_one_training_sample() {
        let (t, v) = stratified_split(&[Normal, Normal], 0.9, 0).unwrap();
        assert_eq!((t.len(), v.len()), (1, 1));
    }
}
