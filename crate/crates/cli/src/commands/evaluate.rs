use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use fdms_core::cnn::EvalReport;
use fdms_core::Modality;
use serde::Serialize;

use crate::data::{self, Subset, DEFAULT_VAL_FRACTION};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub acoustic_model: Option<PathBuf>,
    #[arg(long)]
    pub vibration_model: Option<PathBuf>,
    #[arg(long)]
    pub thermal_model: Option<PathBuf>,
    /// Which scenes to score; `train`/`val` reproduce the split used by
    /// `train` with the same seed and fraction.
    #[arg(long, value_enum, default_value_t = Subset::All)]
    pub subset: Subset,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_VAL_FRACTION)]
    pub split: f64,
    /// Fusion configuration (TOML, or JSON by extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Output<'a> {
    subset: Subset,
    samples: usize,
    /// Report of the fused system, or of the single model given.
    #[serde(flatten)]
    report: &'a EvalReport,
    per_modality: &'a BTreeMap<Modality, EvalReport>,
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let models = super::load_models(&[
        (Modality::Acoustic, args.acoustic_model.as_ref()),
        (Modality::Vibration, args.vibration_model.as_ref()),
        (Modality::Thermal, args.thermal_model.as_ref()),
    ])?;
    if models.is_empty() {
        return Err(CliError::usage(
            "give at least one of --acoustic-model, --vibration-model, --thermal-model",
        ));
    }
    let cfg = super::load_config(args.config.as_deref())?;
    let manifest = data::load_manifest(&args.manifest)?;
    if manifest.entries.is_empty() {
        return Err(CliError::usage("manifest has no entries"));
    }
    let labels: Vec<_> = manifest
        .entries
        .iter()
        .map(|e| e.class())
        .collect::<fdms_core::Result<_>>()?;
    data::check_classes(&models, &labels)?;
    let seed = super::resolve_seed(args.seed)?;
    let idx = data::subset_indices(&labels, args.subset, args.split, seed)?;

    let mut samples = BTreeMap::new();
    for &m in models.keys() {
        let all = data::load_samples(&args.manifest, &manifest, m)?;
        samples.insert(m, data::pick(&all, &idx));
    }
    let report = data::evaluate_multi(&models, &samples, &cfg.sensitivity, &cfg.fusion)?;
    let main = report
        .fused
        .as_ref()
        .unwrap_or_else(|| report.per_modality.values().next().expect("one model"));
    let out = Output {
        subset: args.subset,
        samples: idx.len(),
        report: main,
        per_modality: &report.per_modality,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("report serializes")
    );
    Ok(())
}
