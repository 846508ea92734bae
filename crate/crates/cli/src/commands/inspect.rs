//! Plot-ready dumps of a single input file: spectrograms before and after
//! the bandpass for audio, per-axis FFT for vibration, the classifier view of
//! a thermal frame.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use fdms_core::datasets::{format_sig6, read_accel_csv, read_audio, read_pgm, write_pgm};
use fdms_core::dsp::{
    db_unit, design_bandpass, filter_apply, stft, thermal_to_tensor, vibration_fft, window_gain,
    Spectrogram, BAND_HIGH_HZ, BAND_LOW_HZ, STFT_FFT_SIZE, STFT_HOP, TENSOR_SIDE,
    VIBRATION_FFT_SIZE,
};
use fdms_core::signal::DEFAULT_VIBRATION_RATE_HZ;
use fdms_core::ThermalFrame;

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// A .wav, accelerometer .csv or thermal .pgm file.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sample rate of a CSV input when it cannot be inferred from t_ms.
    #[arg(long)]
    pub rate: Option<u32>,
}

/// Files written, in order.
pub fn run_inspect(args: &InspectArgs) -> CliResult<Vec<PathBuf>> {
    let ext = args
        .input
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let read_err = |e: fdms_core::Error| CliError::io(format!("input {}", args.input.display()), e);
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(args.out.display(), e))?;
    let mut written = Vec::new();
    match ext.as_str() {
        "wav" => {
            let audio = read_audio(&args.input, 0).map_err(read_err)?;
            let rate = f64::from(audio.sample_rate_hz());
            let mono = |l: &[f64], r: &[f64]| -> Vec<f64> {
                l.iter().zip(r).map(|(a, b)| 0.5 * (a + b)).collect()
            };
            let coeffs = design_bandpass(BAND_LOW_HZ, BAND_HIGH_HZ, rate)?;
            let raw = mono(audio.left(), audio.right());
            let filtered = mono(
                &filter_apply(&coeffs, audio.left())?,
                &filter_apply(&coeffs, audio.right())?,
            );
            for (name, signal) in [("raw", raw), ("filtered", filtered)] {
                let spec = stft(&signal, rate, STFT_FFT_SIZE, STFT_HOP)?
                    .scaled(1.0 / window_gain(STFT_FFT_SIZE));
                let pgm = args.out.join(format!("spectrogram_{name}.pgm"));
                write_image(&pgm, &spectrogram_image(&spec)?)?;
                let csv = args.out.join(format!("spectrogram_{name}.csv"));
                write_text(&csv, &spectrogram_csv(&spec))?;
                written.extend([pgm, csv]);
            }
        }
        "csv" => {
            let series = read_accel_csv(&args.input).map_err(read_err)?;
            let rate = args
                .rate
                .or_else(|| series.inferred_rate_hz())
                .unwrap_or(DEFAULT_VIBRATION_RATE_HZ);
            let win = series.into_window(rate).map_err(read_err)?;
            let spectra = vibration_fft(&win, VIBRATION_FFT_SIZE.min(win.len()))?;
            let mut s = String::from("freq_hz,x,y,z\n");
            for k in 0..spectra.axes[0].len() {
                let row: Vec<String> = spectra.axes.iter().map(|a| format_sig6(a[k])).collect();
                writeln!(
                    s,
                    "{},{}",
                    format_sig6(k as f64 * spectra.bin_hz),
                    row.join(",")
                )
                .unwrap();
            }
            let csv = args.out.join("vibration_fft.csv");
            write_text(&csv, &s)?;
            written.push(csv);
        }
        "pgm" => {
            let frame = read_pgm(&args.input, 0).map_err(read_err)?;
            let tensor = thermal_to_tensor(&frame);
            let view = ThermalFrame::new(
                tensor.values().iter().map(|&v| f64::from(v)).collect(),
                TENSOR_SIDE,
                TENSOR_SIDE,
                0,
            )?;
            let pgm = args.out.join("thermal_input.pgm");
            write_image(&pgm, &view)?;
            let mut s = String::from("row,mean,max\n");
            for r in 0..frame.height() {
                let row = &frame.pixels()[r * frame.width()..(r + 1) * frame.width()];
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                let max = row.iter().cloned().fold(f64::MIN, f64::max);
                writeln!(s, "{r},{},{}", format_sig6(mean), format_sig6(max)).unwrap();
            }
            let csv = args.out.join("thermal_rows.csv");
            write_text(&csv, &s)?;
            written.extend([pgm, csv]);
        }
        other => {
            return Err(CliError::io(
                format!("input {}", args.input.display()),
                fdms_core::Error::InvalidArgument(format!(
                    "unrecognized extension '{other}' (expected wav, csv or pgm)"
                )),
            ))
        }
    }
    Ok(written)
}

/// dB-mapped image with time left to right and frequency bottom to top.
fn spectrogram_image(spec: &Spectrogram) -> CliResult<ThermalFrame> {
    let (w, h) = (spec.n_frames(), spec.n_bins());
    let mut px = vec![0.0; w * h];
    for t in 0..w {
        for k in 0..h {
            px[(h - 1 - k) * w + t] = db_unit(spec.get(t, k));
        }
    }
    Ok(ThermalFrame::new(px, w, h, 0)?)
}

/// Long format: one row per (frame, bin).
fn spectrogram_csv(spec: &Spectrogram) -> String {
    let mut s = String::from("time_s,freq_hz,magnitude\n");
    for t in 0..spec.n_frames() {
        let time = format_sig6(t as f64 * spec.hop_s);
        for k in 0..spec.n_bins() {
            writeln!(
                s,
                "{time},{},{}",
                format_sig6(k as f64 * spec.bin_hz),
                format_sig6(spec.get(t, k))
            )
            .unwrap();
        }
    }
    s
}

fn write_image(path: &Path, frame: &ThermalFrame) -> CliResult<()> {
    write_pgm(path, frame).map_err(|e| CliError::io(path.display(), e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

pub fn run(args: &InspectArgs) -> CliResult<()> {
    for p in run_inspect(args)? {
        println!("{}", p.display());
    }
    Ok(())
}
