//! Labeled corpus manifest (JSON).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::signal::{FaultClass, MIN_AUDIO_RATE_HZ};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub audio_hz: u32,
    pub vibration_hz: u32,
    pub thermal_fps: u32,
}

/// One scene. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub label: String,
    pub audio_path: PathBuf,
    pub vibration_path: PathBuf,
    pub thermal_dir: PathBuf,
    pub duration_s: f64,
    pub rates: Rates,
}

impl ManifestEntry {
    pub fn class(&self) -> Result<FaultClass> {
        self.label.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            entries,
        }
    }

    /// Every problem found, relative paths checked against `base`.
    pub fn problems(&self, base: &Path) -> Vec<String> {
        let mut out = Vec::new();
        if self.format_version != MANIFEST_VERSION {
            out.push(format!(
                "unsupported format_version {}",
                self.format_version
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            let who = if e.scene_id.is_empty() {
                format!("entry {i}")
            } else {
                format!("scene '{}'", e.scene_id)
            };
            if e.scene_id.is_empty() {
                out.push(format!("{who}: empty scene_id"));
            } else if !seen.insert(e.scene_id.as_str()) {
                out.push(format!("{who}: duplicate scene_id"));
            }
            if e.class().is_err() {
                out.push(format!(
                    "{who}: unknown fault class '{}' (valid: {})",
                    e.label,
                    FaultClass::valid_names()
                ));
            }
            if !(e.duration_s > 0.0 && e.duration_s.is_finite()) {
                out.push(format!("{who}: duration_s must be positive"));
            }
            if e.rates.audio_hz < MIN_AUDIO_RATE_HZ
                || e.rates.vibration_hz == 0
                || e.rates.thermal_fps == 0
            {
                out.push(format!("{who}: invalid rates"));
            }
            for (p, dir) in [
                (&e.audio_path, false),
                (&e.vibration_path, false),
                (&e.thermal_dir, true),
            ] {
                if p.is_absolute() {
                    out.push(format!("{who}: path {} must be relative", p.display()));
                    continue;
                }
                let full = base.join(p);
                let ok = if dir { full.is_dir() } else { full.is_file() };
                if !ok {
                    out.push(format!(
                        "{who}: missing {} {}",
                        if dir { "directory" } else { "file" },
                        full.display()
                    ));
                }
            }
        }
        out
    }
}

/// Pretty JSON with keys sorted, so equal content gives equal bytes.
pub fn manifest_json(manifest: &Manifest) -> String {
    // serde_json::Value keeps object keys in a BTreeMap.
    let value = serde_json::to_value(manifest).expect("manifest serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    s
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    fs::write(path, manifest_json(manifest))?;
    Ok(())
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    serde_json::from_str(text).map_err(|e| Error::format(Location::Line(e.line()), e.to_string()))
}

/// Parses and validates; the error lists every offending entry.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::format(Location::File(path.to_path_buf()), "invalid UTF-8"))?;
    let m = parse_manifest(text).map_err(|e| match e {
        Error::Format { at, message } => Error::Format {
            at: Location::File(path.to_path_buf()),
            message: format!("{at}: {message}"),
        },
        other => other,
    })?;
    let problems = m.problems(&manifest_dir(path));
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(m)
}

pub fn manifest_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn entry(id: &str, label: &str) -> ManifestEntry {
        ManifestEntry {
            scene_id: id.into(),
            label: label.into(),
            audio_path: PathBuf::from(format!("{id}/audio.wav")),
            vibration_path: PathBuf::from(format!("{id}/vibration.csv")),
            thermal_dir: PathBuf::from(format!("{id}/thermal")),
            duration_s: 2.0,
            rates: Rates {
                audio_hz: 16000,
                vibration_hz: 200,
                thermal_fps: 8,
            },
        }
    }

    fn materialize(base: &Path, e: &ManifestEntry) {
        fs::create_dir_all(base.join(&e.thermal_dir)).unwrap();
        fs::write(base.join(&e.audio_path), b"").unwrap();
        fs::write(base.join(&e.vibration_path), b"").unwrap();
    }

    #[test]
    fn round_trip_and_sorted_keys() {
        let dir = tempdir().unwrap();
        let m = Manifest::new(vec![entry("a", "normal"), entry("b", "nozzle_clog")]);
        for e in &m.entries {
            materialize(dir.path(), e);
        }
        let path = dir.path().join("manifest.json");
        write_manifest(&path, &m).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);
        let text = manifest_json(&m);
        assert_eq!(text, manifest_json(&m.clone()));
        let a = text.find("\"audio_path\"").unwrap();
        let l = text.find("\"label\"").unwrap();
        let s = text.find("\"scene_id\"").unwrap();
        assert!(a < l && l < s);
    }

    #[test]
    fn collects_every_problem() {
        let dir = tempdir().unwrap();
        let good = entry("a", "normal");
        materialize(dir.path(), &good);
        let m = Manifest::new(vec![good, entry("b", "melted"), entry("a", "normal")]);
        let path = dir.path().join("manifest.json");
        write_manifest(&path, &m).unwrap();
        match read_manifest(&path) {
            Err(Error::Validation(list)) => {
                assert!(list
                    .iter()
                    .any(|p| p.contains("unknown fault class 'melted'")));
                assert!(list.iter().any(|p| p.contains("b/audio.wav")));
                assert!(list.iter().any(|p| p.contains("duplicate scene_id")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_are_format_errors() {
        assert!(matches!(
            parse_manifest("{\"format_version\": 1,"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            parse_manifest("{\"format_version\": 1, \"entries\": [], \"extra\": 0}"),
            Err(Error::Format { .. })
        ));
    }
}
