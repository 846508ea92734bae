//! On-disk formats: PCM16 WAV audio, accelerometer CSV, P5 PGM thermal
//! frames and the JSON corpus manifest.

mod accel;
mod manifest;
mod pgm;
mod wav;

use std::path::Path;

pub use accel::{
    accel_csv_string, format_sig6, parse_accel_bytes, parse_accel_csv, read_accel_csv,
    write_accel_csv, AccelSeries, AccelStream, CSV_HEADER,
};
pub use manifest::{
    manifest_dir, manifest_json, parse_manifest, read_manifest, write_manifest, Manifest,
    ManifestEntry, Rates, MANIFEST_VERSION,
};
pub use pgm::{
    frame_file_name, parse_pgm, pgm_bytes, quantize, read_pgm, read_thermal_dir, write_pgm,
    write_thermal_dir, PgmStream, ThermalSequence,
};
pub use wav::{
    parse_wav, read_audio, read_wav, wav_bytes, write_audio, write_wav, WavData, WavStream,
};

use crate::error::{Error, Location, Result};
use crate::signal::Scene;

/// Loads every modality of a manifest entry; `base` is the manifest's
/// directory.
pub fn load_scene(base: &Path, entry: &ManifestEntry) -> Result<Scene> {
    let label = entry.class()?;
    let audio = read_audio(&base.join(&entry.audio_path), 0)?;
    if audio.sample_rate_hz() != entry.rates.audio_hz {
        return Err(Error::format(
            Location::File(base.join(&entry.audio_path)),
            format!(
                "sample rate {} Hz, manifest says {} Hz",
                audio.sample_rate_hz(),
                entry.rates.audio_hz
            ),
        ));
    }
    let vib_path = base.join(&entry.vibration_path);
    let series = read_accel_csv(&vib_path)?;
    if series.is_empty() {
        return Err(Error::format(
            Location::File(vib_path),
            "no vibration samples",
        ));
    }
    let vibration = series.into_window(entry.rates.vibration_hz)?;
    let thermal = read_thermal_dir(&base.join(&entry.thermal_dir), entry.rates.thermal_fps)?.frames;
    if thermal.is_empty() {
        return Err(Error::format(
            Location::File(base.join(&entry.thermal_dir)),
            "no thermal frames",
        ));
    }
    Ok(Scene {
        label,
        audio,
        vibration,
        thermal,
    })
}
