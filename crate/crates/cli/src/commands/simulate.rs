use std::path::PathBuf;

use clap::Args;
use fdms_core::simulator::{generate_corpus, CorpusOptions};
use fdms_core::FaultClass;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated fault classes, or `all`.
    #[arg(long, default_value = "all")]
    pub classes: String,
    /// Scenes per class.
    #[arg(long)]
    pub count: usize,
    /// Master seed (default: $FDMS_SEED or 0).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Scene length in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    /// Mix pink room noise into the audio at this SNR.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_snr_db: Option<f64>,
    /// Left-channel gain in dB.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub stereo_bias_db: f64,
}

pub fn parse_classes(list: &str) -> CliResult<Vec<FaultClass>> {
    if list.trim() == "all" {
        return Ok(FaultClass::ALL.to_vec());
    }
    list.split(',')
        .map(|s| {
            s.trim().parse::<FaultClass>().map_err(|_| {
                CliError::usage(format!(
                    "unknown class '{}'; valid names: {}",
                    s.trim(),
                    FaultClass::valid_names()
                ))
            })
        })
        .collect()
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let classes = parse_classes(&args.classes)?;
    if args.count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    let seed = super::resolve_seed(args.seed)?;
    let opts = CorpusOptions {
        duration_s: args.duration,
        ambient_noise_snr_db: args.noise_snr_db,
        stereo_bias_db: args.stereo_bias_db,
    };
    let manifest =
        generate_corpus(args.count, &classes, seed, &args.out, &opts).map_err(|e| match e {
            fdms_core::Error::InvalidArgument(_) => CliError::Core(e),
            other => CliError::io(format!("writing corpus to {}", args.out.display()), other),
        })?;
    let manifest_path = args.out.join("manifest.json");
    let bytes =
        std::fs::read(&manifest_path).map_err(|e| CliError::io(manifest_path.display(), e))?;
    let counts: Vec<String> = classes
        .iter()
        .map(|c| format!("{c}={}", args.count))
        .collect();
    println!(
        "wrote {} scenes ({}) to {} seed={seed} manifest_sha256={}",
        manifest.entries.len(),
        counts.join(" "),
        args.out.display(),
        hex::encode(Sha256::digest(&bytes))
    );
    Ok(())
}
