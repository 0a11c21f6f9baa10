use std::path::PathBuf;

use clap::Args;
use linecond::PipelineConfig;

use crate::CliError;

/// Hyperparameter flags shared by the model commands. Every flag overrides
/// the matching field of `--config`, which in turn overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON pipeline configuration; absent fields keep their defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Factorization rank.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Factorization ridge strength.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of the labeled centers in the center correction.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Convergence threshold of the center correction.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap of the center correction.
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// Eight comma-separated equipment-unit weights.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub weights: Option<Vec<f64>>,
}

impl ConfigArgs {
    /// Defaults, then the JSON file, then flags; the result is validated.
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                PipelineConfig::from_json(&text).map_err(|e| CliError::Usage(e.to_string()))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.rank {
            config.factorize.rank = v;
        }
        if let Some(v) = self.lambda {
            config.factorize.lambda = v;
        }
        if let Some(v) = self.alpha {
            config.refine.alpha = v;
        }
        if let Some(v) = self.tol {
            config.refine.tol = v;
        }
        if let Some(v) = self.max_iter {
            config.refine.max_iter = v;
        }
        if let Some(v) = self.epochs {
            config.train.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            config.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            config.train.batch_size = v;
        }
        if let Some(v) = self.init_scale {
            config.train.weight_init_scale = v;
        }
        if let Some(v) = &self.weights {
            config.unit_weights = v.clone();
        }
        config.validate().map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
        Ok(config)
    }
}
