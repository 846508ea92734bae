use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use fdms_core::cnn::{
    save_model, train_with_progress, EpochStats, Model, ModelSpec, TrainConfig, TrainOutcome,
};
use fdms_core::dsp::InputTensor;
use fdms_core::Modality;

use crate::data::{self, DEFAULT_VAL_FRACTION};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_modality)]
    pub modality: Modality,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Seed for initialization, split and shuffling (default: $FDMS_SEED or 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Held-out validation fraction per class.
    #[arg(long, default_value_t = DEFAULT_VAL_FRACTION)]
    pub split: f64,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    /// Per-epoch CSV (default: model path with `.history.csv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Print each epoch to standard error.
    #[arg(long)]
    pub verbose: bool,
}

pub fn parse_modality(s: &str) -> Result<Modality, String> {
    s.parse().map_err(|e: fdms_core::Error| e.to_string())
}

/// Everything `train` needs besides file paths.
#[derive(Debug, Clone, Copy)]
pub struct TrainPlan {
    pub modality: Modality,
    pub val_fraction: f64,
    pub config: TrainConfig,
}

/// Loads the corpus, splits it and trains a fresh standard model.
pub fn train_from_manifest(
    manifest_path: &Path,
    plan: &TrainPlan,
    mut on_epoch: impl FnMut(&EpochStats),
) -> CliResult<TrainOutcome> {
    let manifest = data::load_manifest(manifest_path)?;
    if manifest.entries.is_empty() {
        return Err(CliError::data("manifest has no entries"));
    }
    let labels: Vec<_> = manifest
        .entries
        .iter()
        .map(|e| e.class())
        .collect::<fdms_core::Result<_>>()?;
    let (train_idx, val_idx) =
        data::stratified_split(&labels, plan.val_fraction, plan.config.seed)?;
    let samples = data::load_samples(manifest_path, &manifest, plan.modality)?;
    let classes = data::manifest_classes(&manifest)?;
    let spec = ModelSpec::standard(InputTensor::shape_for(plan.modality), classes)?;
    let mut model = Model::init(spec, plan.config.seed)?;
    let outcome = train_with_progress(
        &mut model,
        &data::pick(&samples, &train_idx),
        &data::pick(&samples, &val_idx),
        &plan.config,
        &mut on_epoch,
    )?;
    Ok(outcome)
}

pub fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for e in history {
        writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6}",
            e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
        )
        .unwrap();
    }
    s
}

pub fn default_history_path(model_out: &Path) -> PathBuf {
    model_out.with_extension("history.csv")
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    if args.epochs == 0 {
        return Err(CliError::usage("--epochs must be at least 1"));
    }
    let plan = TrainPlan {
        modality: args.modality,
        val_fraction: args.split,
        config: TrainConfig {
            learning_rate: args.learning_rate,
            batch_size: args.batch_size,
            epochs: args.epochs,
            seed: super::resolve_seed(args.seed)?,
            ..TrainConfig::default()
        },
    };
    plan.config.validate()?;
    let verbose = args.verbose;
    let outcome = train_from_manifest(&args.manifest, &plan, |e| {
        if verbose {
            eprintln!(
                "epoch {:>3}  train_loss {:.4}  train_acc {:.4}  val_loss {:.4}  val_acc {:.4}",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
            );
        }
    })?;
    save_model(&outcome.model, &args.model_out)
        .map_err(|e| CliError::io(format!("model {}", args.model_out.display()), e))?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| default_history_path(&args.model_out));
    std::fs::write(&history_path, history_csv(&outcome.history))
        .map_err(|e| CliError::io(history_path.display(), e))?;
    let best = outcome.history[outcome.best_epoch - 1];
    println!(
        "{} model: best epoch {} val_acc {:.4} val_loss {:.4}; wrote {} and {}",
        args.modality,
        outcome.best_epoch,
        best.val_acc,
        best.val_loss,
        args.model_out.display(),
        history_path.display()
    );
    Ok(())
}
