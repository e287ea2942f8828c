use std::fs;
use std::path::Path;

use clap::Args;
use serde::Deserialize;
use trustgcn::model::ModelKind;
use trustgcn::trainer::RunConfig;

use crate::CliError;

/// Run configuration file: a single `[run]` table whose keys are the
/// `RunConfig` fields.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    run: RunConfig,
}

/// Overrides for every `RunConfig` key. Flags win over the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML file with a `[run]` table.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// Model variant: mgs-tgcn or gcn.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub emb_dim: Option<usize>,
    #[arg(long)]
    pub gcn_layers: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    #[arg(long)]
    pub total_epochs: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of latent groups.
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub no_motif: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub no_sign: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub no_global: Option<bool>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { c.$field = v; })*
            };
        }
        apply!(
            model,
            lr,
            weight_decay,
            emb_dim,
            gcn_layers,
            dropout,
            warmup_epochs,
            total_epochs,
            repeats,
            beta,
            groups,
            feature_dim,
            seed,
            no_motif,
            no_sign,
            no_global
        );
        c.validate()?;
        Ok(c)
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Missing(format!("{}: {e}", path.display()))
        } else {
            CliError::Other(format!("{}: {e}", path.display()))
        }
    })?;
    let file: ConfigFile =
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(file.run)
}
