pub mod evaluate;
pub mod inspect;
pub mod monitor;
pub mod simulate;
pub mod train;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fdms_core::cnn::{load_model, Model};
use fdms_core::fusion::FileConfig;
use fdms_core::Modality;

use crate::error::{CliError, CliResult};

/// Environment variable overriding the default seed of every command.
pub const SEED_ENV: &str = "FDMS_SEED";

/// `--seed` if given, else `FDMS_SEED`, else 0.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => FileConfig::load(p).map_err(|e| match e {
            fdms_core::Error::Io(_) => CliError::io(format!("config {}", p.display()), e),
            other => CliError::usage(format!("config {}: {other}", p.display())),
        }),
    }
}

/// Loads the given model files. A path that does not exist is a usage
/// error (exit 2); an unreadable or corrupt file is an I/O error.
pub fn load_models(paths: &[(Modality, Option<&PathBuf>)]) -> CliResult<BTreeMap<Modality, Model>> {
    let mut out = BTreeMap::new();
    for &(m, p) in paths {
        if let Some(p) = p {
            if !p.exists() {
                return Err(CliError::usage(format!(
                    "{m} model {} does not exist",
                    p.display()
                )));
            }
            let model =
                load_model(p).map_err(|e| CliError::io(format!("{m} model {}", p.display()), e))?;
            out.insert(m, model);
        }
    }
    Ok(out)
}
