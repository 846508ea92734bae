use std::fs::File;
use std::io::{self, LineWriter};
use std::path::PathBuf;

use clap::Args;
use fdms_core::Modality;

use crate::error::{CliError, CliResult};
use crate::monitor::{run_monitor, Inputs, MonitorOptions, Preset};

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// Scene directory holding audio.wav, vibration.csv and thermal/.
    #[arg(long, conflicts_with_all = ["audio", "vibration", "thermal"])]
    pub scene: Option<PathBuf>,
    /// PCM16 WAV file or pipe.
    #[arg(long)]
    pub audio: Option<PathBuf>,
    /// Accelerometer CSV file or pipe.
    #[arg(long)]
    pub vibration: Option<PathBuf>,
    /// Directory of numbered PGM frames, or a file/pipe of concatenated frames.
    #[arg(long)]
    pub thermal: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Hybrid)]
    pub preset: Preset,
    #[arg(long)]
    pub acoustic_model: Option<PathBuf>,
    #[arg(long)]
    pub vibration_model: Option<PathBuf>,
    #[arg(long)]
    pub thermal_model: Option<PathBuf>,
    /// Fusion, sensitivity and rate settings (TOML, or JSON by extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSONL output (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &MonitorArgs) -> CliResult<()> {
    let wanted = args.preset.modalities();
    let path_for = |m: Modality| match m {
        Modality::Acoustic => args.acoustic_model.as_ref(),
        Modality::Vibration => args.vibration_model.as_ref(),
        Modality::Thermal => args.thermal_model.as_ref(),
    };
    for &m in wanted {
        if path_for(m).is_none() {
            return Err(CliError::usage(format!(
                "preset {:?} needs --{m}-model",
                args.preset
            )));
        }
    }
    let models = super::load_models(&wanted.iter().map(|&m| (m, path_for(m))).collect::<Vec<_>>())?;
    let cfg = super::load_config(args.config.as_deref())?;
    let inputs = match &args.scene {
        Some(dir) => Inputs::scene_dir(dir),
        None => Inputs {
            audio: args.audio.clone(),
            vibration: args.vibration.clone(),
            thermal: args.thermal.clone(),
        },
    };
    let opts = MonitorOptions {
        preset: args.preset,
        fusion: cfg.fusion,
        matrix: cfg.sensitivity,
        rates: cfg.rates,
    };
    let summary = match &args.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(p.display(), e))?;
            run_monitor(&inputs, &models, &opts, &mut LineWriter::new(f))?
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match run_monitor(&inputs, &models, &opts, &mut lock) {
                // Reader went away (e.g. `| head`): stop quietly.
                Err(CliError::Io {
                    source: fdms_core::Error::Io(e),
                    ..
                }) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(()),
                r => r?,
            }
        }
    };
    eprintln!(
        "{} events, {} alarms raised, {} stream errors",
        summary.events,
        summary.raised.len(),
        summary.errors
    );
    Ok(())
}
