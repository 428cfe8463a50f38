//! On-disk metadata: the dataset manifest written by the synth stage and the
//! evaluation report produced at the end of a run.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use specmap_core::synth::FixtureConfig;
use specmap_core::{DamageSpec, Error, Result};

/// Which structure a dataset file was recorded on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

/// One dataset CSV file and the condition it was recorded under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    /// File name relative to the manifest's directory.
    pub file: String,
    pub domain: Domain,
    /// `healthy` or `damage_<factor>`, unique within a domain.
    pub label: String,
    pub damage: Option<DamageSpec>,
    pub sampling_rate_hz: f64,
    /// Instrumented degrees of freedom, in column order.
    pub sensor_dofs: Vec<usize>,
    pub samples: usize,
}

/// Index of every file in a dataset directory.
///
/// Synthesized datasets carry the generating seed and fixture for
/// provenance; hand-written manifests for recorded data may omit both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureConfig>,
    pub cases: Vec<CaseEntry>,
}

impl FixtureManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FixtureManifest> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    /// All cases of one domain, healthy first, damage cases in listed order.
    pub fn domain_cases(&self, domain: Domain) -> Vec<&CaseEntry> {
        self.cases.iter().filter(|c| c.domain == domain).collect()
    }

    /// The unique healthy case of a domain.
    pub fn healthy_case(&self, domain: Domain) -> Result<&CaseEntry> {
        self.cases
            .iter()
            .find(|c| c.domain == domain && c.damage.is_none())
            .ok_or_else(|| {
                Error::InvalidParameter(format!("manifest lists no healthy {domain:?} case"))
            })
    }

    /// Damage cases of a domain, in listed order.
    pub fn damage_cases(&self, domain: Domain) -> Vec<&CaseEntry> {
        self.cases
            .iter()
            .filter(|c| c.domain == domain && c.damage.is_some())
            .collect()
    }
}

/// Standard label for a damage case: `damage_` plus the stiffness factor to
/// two decimals.
pub fn damage_label(stiffness_factor: f64) -> String {
    format!("damage_{stiffness_factor:.2}")
}

/// Alarm statistics on the held-out healthy test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthySummary {
    pub windows: usize,
    pub alarms: usize,
    pub capped_windows: usize,
}

/// Detection quality on one damage case, measured against the healthy test
/// windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub label: String,
    pub damage: Option<DamageSpec>,
    pub windows: usize,
    pub capped_windows: usize,
    pub auc: f64,
    /// AUC of the same case scored without domain adaptation, when the
    /// ablation was requested.
    pub auc_no_da: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// Per-window score file, relative to the report's directory.
    pub scores_csv: String,
    /// ROC curve file, relative to the report's directory.
    pub roc_csv: String,
}

/// Detection quality with every damage case pooled into one positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledReport {
    pub windows: usize,
    pub auc: f64,
    pub auc_no_da: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Final output of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    /// SHA-256 of the resolved experiment configuration.
    pub config_hash: String,
    /// SHA-256 of the checkpoint file the evaluation used.
    pub checkpoint_hash: String,
    pub selected_iteration: u64,
    pub source_auc: f64,
    pub threshold: f64,
    pub mapping_calibration_windows: usize,
    pub healthy_test: HealthySummary,
    pub cases: Vec<CaseReport>,
    pub pooled: PooledReport,
}

impl EvaluationReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EvaluationReport> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_manifest() -> FixtureManifest {
        FixtureManifest {
            schema_version: 1,
            seed: 7,
            fixture: Some(FixtureConfig::default()),
            cases: vec![
                CaseEntry {
                    file: "source_healthy.csv".to_string(),
                    domain: Domain::Source,
                    label: "healthy".to_string(),
                    damage: None,
                    sampling_rate_hz: 256.0,
                    sensor_dofs: vec![0, 1, 2, 3],
                    samples: 1024,
                },
                CaseEntry {
                    file: "target_damage_0.70.csv".to_string(),
                    domain: Domain::Target,
                    label: damage_label(0.7),
                    damage: Some(DamageSpec {
                        story_index: 2,
                        stiffness_factor: 0.7,
                    }),
                    sampling_rate_hz: 512.0,
                    sensor_dofs: vec![0, 2, 3, 5],
                    samples: 2048,
                },
            ],
        }
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let manifest = sample_manifest();
        manifest.save(&path).unwrap();
        assert_eq!(FixtureManifest::load(&path).unwrap(), manifest);
    }

    #[test]
    fn manifest_lookups_filter_by_domain_and_condition() {
        let manifest = sample_manifest();
        assert_eq!(
            manifest.healthy_case(Domain::Source).unwrap().file,
            "source_healthy.csv"
        );
        assert!(manifest.healthy_case(Domain::Target).is_err());
        assert_eq!(manifest.damage_cases(Domain::Target).len(), 1);
        assert_eq!(manifest.damage_cases(Domain::Source).len(), 0);
        assert_eq!(manifest.domain_cases(Domain::Target).len(), 1);
    }

    #[test]
    fn damage_labels_use_two_decimals() {
        assert_eq!(damage_label(0.9), "damage_0.90");
        assert_eq!(damage_label(0.5), "damage_0.50");
        assert_eq!(damage_label(0.75), "damage_0.75");
    }
}
