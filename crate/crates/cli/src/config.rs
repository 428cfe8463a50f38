//! Experiment configuration: defaults, JSON file, and flag overrides.
//!
//! Precedence is flags over file over defaults. The resolved configuration is
//! hashed into every report so results stay traceable to the exact settings
//! that produced them.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use specmap_core::gan::TrainConfig;
use specmap_core::signals::DatasetSplit;
use specmap_core::synth::FixtureConfig;
use specmap_core::{Error, Result};

/// Complete, resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Analysis window length in samples; also the FFT size.
    pub window_length: usize,
    /// CSV column indices read from source-domain files.
    pub source_channels: Vec<usize>,
    /// CSV column indices read from target-domain files.
    pub target_channels: Vec<usize>,
    /// Fraction of target healthy windows used to calibrate the mapping.
    pub da_fraction: f64,
    /// Fraction of target healthy windows used to tune the alarm threshold.
    pub tune_fraction: f64,
    /// Fraction of target healthy windows held out as the healthy test set.
    pub test_fraction: f64,
    pub clip_cap: f64,
    pub score_cap: f64,
    /// Floor for target spectrum lines when computing mapping scale factors.
    pub epsilon: f64,
    pub seed: u64,
    pub hidden_size: usize,
    pub merge_width: usize,
    pub latent_dim: usize,
    pub target_seq_steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_iterations: u64,
    pub eval_interval: u64,
    pub patience_evals: u64,
    pub val_fraction: f64,
    /// Synthetic dataset layout used by the synth stage.
    pub fixture: FixtureConfig,
    /// Directory holding the dataset CSVs and `manifest.json`.
    pub data_dir: PathBuf,
    /// Directory receiving checkpoints, mappings, scores, and reports.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: 1,
            window_length: 256,
            source_channels: vec![0, 1, 2, 3],
            target_channels: vec![0, 1, 2, 3],
            da_fraction: 0.1,
            tune_fraction: 0.4,
            test_fraction: 0.5,
            clip_cap: 10.0,
            score_cap: 40.0,
            epsilon: 1e-12,
            seed: 7,
            hidden_size: 64,
            merge_width: 128,
            latent_dim: 100,
            target_seq_steps: 25,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            max_iterations: 5000,
            eval_interval: 25,
            patience_evals: 200,
            val_fraction: 0.2,
            fixture: FixtureConfig::default(),
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    /// JSON experiment configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub window_length: Option<usize>,
    /// Comma-separated CSV column indices for source files.
    #[arg(long, global = true, value_delimiter = ',')]
    pub source_channels: Option<Vec<usize>>,
    /// Comma-separated CSV column indices for target files.
    #[arg(long, global = true, value_delimiter = ',')]
    pub target_channels: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub da_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub tune_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub test_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub clip_cap: Option<f64>,
    #[arg(long, global = true)]
    pub score_cap: Option<f64>,
    #[arg(long, global = true)]
    pub hidden_size: Option<usize>,
    #[arg(long, global = true)]
    pub merge_width: Option<usize>,
    #[arg(long, global = true)]
    pub latent_dim: Option<usize>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub max_iterations: Option<u64>,
    #[arg(long, global = true)]
    pub eval_interval: Option<u64>,
    #[arg(long, global = true)]
    pub patience_evals: Option<u64>,
    #[arg(long, global = true)]
    pub val_fraction: Option<f64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Loads a configuration file (when given) and applies flag overrides,
    /// then validates the result.
    pub fn resolve(overrides: &ConfigOverrides) -> Result<ExperimentConfig> {
        let mut config = match &overrides.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };

        macro_rules! apply {
            ($($field:ident),+ $(,)?) => {
                $(if let Some(value) = &overrides.$field {
                    config.$field = value.clone();
                })+
            };
        }
        apply!(
            seed,
            window_length,
            source_channels,
            target_channels,
            da_fraction,
            tune_fraction,
            test_fraction,
            clip_cap,
            score_cap,
            hidden_size,
            merge_width,
            latent_dim,
            learning_rate,
            batch_size,
            max_iterations,
            eval_interval,
            patience_evals,
            val_fraction,
            data_dir,
            out_dir,
        );

        config.validate()?;
        Ok(config)
    }

    /// Parses a configuration file; any field left out keeps its default.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| {
            Error::InvalidParameter(format!("config file {}: {e}", path.display()))
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || !self.window_length.is_multiple_of(2) {
            return Err(Error::InvalidWindowLength(self.window_length));
        }
        if self.source_channels.is_empty() || self.target_channels.is_empty() {
            return Err(Error::InvalidParameter("channel lists must be non-empty".to_string()));
        }
        if self.source_channels.len() != self.target_channels.len() {
            return Err(Error::ChannelMismatch {
                context: "source vs target channel lists".to_string(),
                expected: self.source_channels.len(),
                found: self.target_channels.len(),
            });
        }
        for list in [&self.source_channels, &self.target_channels] {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate channel indices in {list:?}"
                )));
            }
        }
        self.split()?;
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.score_cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "score cap must be positive, got {}",
                self.score_cap
            )));
        }
        self.train_config().validate()?;
        Ok(())
    }

    /// The chronological split applied to target healthy windows.
    pub fn split(&self) -> Result<DatasetSplit> {
        DatasetSplit::new(self.da_fraction, self.tune_fraction, self.test_fraction)
    }

    /// Training configuration for the source domain.
    pub fn train_config(&self) -> TrainConfig {
        let mut tc = TrainConfig::new(self.window_length, self.source_channels.clone(), self.seed);
        tc.hidden_size = self.hidden_size;
        tc.merge_width = self.merge_width;
        tc.latent_dim = self.latent_dim;
        tc.target_seq_steps = self.target_seq_steps;
        tc.learning_rate = self.learning_rate;
        tc.beta1 = self.beta1;
        tc.beta2 = self.beta2;
        tc.adam_epsilon = self.adam_epsilon;
        tc.batch_size = self.batch_size;
        tc.max_iterations = self.max_iterations;
        tc.eval_interval = self.eval_interval;
        tc.patience_evals = self.patience_evals;
        tc.val_fraction = self.val_fraction;
        tc.clip_cap = self.clip_cap;
        tc.score_cap = self.score_cap;
        tc
    }

    /// Hex-encoded SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.data_dir.join("manifest.json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("checkpoint.ckpt")
    }

    pub fn training_log_path(&self) -> PathBuf {
        self.out_dir.join("training_log.jsonl")
    }

    pub fn mapping_path(&self) -> PathBuf {
        self.out_dir.join("mapping.json")
    }

    pub fn threshold_path(&self) -> PathBuf {
        self.out_dir.join("threshold.json")
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{ "seed": 9, "window_length": 64 }"#).unwrap();

        let overrides = ConfigOverrides {
            config: Some(path),
            seed: Some(11),
            ..ConfigOverrides::default()
        };
        let config = ExperimentConfig::resolve(&overrides).unwrap();
        assert_eq!(config.seed, 11);
        assert_eq!(config.window_length, 64);
        assert_eq!(config.batch_size, 32);
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{ "sede": 9 }"#).unwrap();
        assert!(matches!(
            ExperimentConfig::load(&path),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let odd_window = ExperimentConfig {
            window_length: 15,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            odd_window.validate(),
            Err(Error::InvalidWindowLength(15))
        ));

        let bad_split = ExperimentConfig {
            da_fraction: 0.5,
            tune_fraction: 0.5,
            test_fraction: 0.5,
            ..ExperimentConfig::default()
        };
        assert!(matches!(bad_split.validate(), Err(Error::InvalidSplit { .. })));

        let mismatched = ExperimentConfig {
            target_channels: vec![0, 1],
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            mismatched.validate(),
            Err(Error::ChannelMismatch { .. })
        ));

        let dup = ExperimentConfig {
            source_channels: vec![0, 0, 1, 2],
            target_channels: vec![0, 1, 2, 3],
            ..ExperimentConfig::default()
        };
        assert!(matches!(dup.validate(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = ExperimentConfig::default();
        let mut changed = base.clone();
        changed.seed = 8;
        assert_ne!(base.hash(), changed.hash());
        assert_eq!(base.hash(), ExperimentConfig::default().hash());
        assert_eq!(base.hash().len(), 64);
    }

    #[test]
    fn config_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let config = ExperimentConfig {
            seed: 123,
            learning_rate: 2e-4,
            ..ExperimentConfig::default()
        };
        config.save(&path).unwrap();
        assert_eq!(ExperimentConfig::load(&path).unwrap(), config);
    }
}
