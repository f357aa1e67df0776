use std::fs;
use std::path::{Path, PathBuf};

use qmimo::ChannelModel;
use serde::Deserialize;

use crate::CliError;

/// Channel given either as a path to a channel file or inline.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ChannelSource {
    Path(PathBuf),
    Inline(serde_json::Value),
}

/// JSON experiment description. Every field is optional and every field
/// can be overridden from the command line.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub channel: Option<ChannelSource>,
    pub gains: Option<Vec<f64>>,
    pub scenarios: Option<Vec<String>>,
    pub n_q: Option<usize>,
    pub powers: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub timing: Option<bool>,
    pub rank: Option<usize>,
    pub rank_max: Option<usize>,
    pub nq_min: Option<usize>,
    pub nq_max: Option<usize>,
    pub samples: Option<usize>,
    pub construction: Option<String>,
    pub degree: Option<u32>,
    pub degrees: Option<Vec<usize>>,
    pub fig1: Option<String>,
    pub code: Option<PathBuf>,
    pub power: Option<f64>,
    pub partitions: Option<u64>,
    pub half_width: Option<f64>,

    #[serde(skip)]
    base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Relative paths in a config file are taken relative to that file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn check_command(&self, name: &str) -> Result<(), CliError> {
        match &self.command {
            Some(c) if c != name => {
                Err(CliError::Config(format!("config is for '{c}' but the subcommand is '{name}'")))
            }
            _ => Ok(()),
        }
    }

    /// Channel from the command line, else the config, else `None`.
    pub fn channel(&self, cli_path: Option<&Path>, cli_gains: Option<&[f64]>) -> Result<Option<ChannelModel>, CliError> {
        if let Some(p) = cli_path {
            return ChannelModel::load(p).map(Some).map_err(CliError::from);
        }
        if let Some(g) = cli_gains {
            return ChannelModel::diagonal(g, 1.0).map(Some).map_err(CliError::from);
        }
        match &self.channel {
            Some(ChannelSource::Path(p)) => ChannelModel::load(self.resolve(p)).map(Some).map_err(CliError::from),
            Some(ChannelSource::Inline(v)) => ChannelModel::from_json(&v.to_string()).map(Some).map_err(CliError::from),
            None => match &self.gains {
                Some(g) => ChannelModel::diagonal(g, 1.0).map(Some).map_err(CliError::from),
                None => Ok(None),
            },
        }
    }
}

/// `cli` if given, else `cfg`, else `default`.
pub fn pick<T>(cli: Option<T>, cfg: Option<T>, default: T) -> T {
    cli.or(cfg).unwrap_or(default)
}
