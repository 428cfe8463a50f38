//! The command implementations behind the CLI: dataset synthesis, source
//! training, mapping calibration, threshold tuning, scoring, and evaluation.
//!
//! Every command reads and writes files under the configured data and output
//! directories, so a full run can also be driven stage by stage and each
//! artifact inspected between stages.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use sha2::{Digest, Sha256};

use specmap_core::adapt::{self, ChannelSpectrum, SpectralMapping};
use specmap_core::detect::{self, DetectionScore, ScoreRow, ThresholdModel};
use specmap_core::gan::{self, CheckpointHeader, ResumeState};
use specmap_core::metrics;
use specmap_core::signals::{self, ChannelRecord};
use specmap_core::spectral::{self, ChannelFeature, FeatureVector};
use specmap_core::synth;
use specmap_core::{DamageSpec, Error, Result};

use crate::config::ExperimentConfig;
use crate::report::{
    damage_label, CaseEntry, CaseReport, Domain, EvaluationReport, FixtureManifest,
    HealthySummary, PooledReport,
};

/// What a training run produced and where it went.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub selected_iteration: u64,
    pub selected_auc: f64,
    pub iterations_run: u64,
    pub evaluations: usize,
    pub checkpoint: PathBuf,
}

/// Scores and decisions for one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectOutcome {
    pub rows: Vec<ScoreRow>,
    pub threshold: f64,
    pub scores_csv: PathBuf,
}

/// Simulates both structures under every condition and writes one CSV per
/// case plus the manifest indexing them.
pub fn cmd_synth(config: &ExperimentConfig) -> Result<FixtureManifest> {
    fs::create_dir_all(&config.data_dir).map_err(|e| Error::io(&config.data_dir, e))?;
    let fixture = synth::make_tl_fixture_with(&config.fixture, config.seed)?;

    let mut cases = Vec::new();
    write_case(
        &config.data_dir,
        "source_healthy.csv",
        Domain::Source,
        "healthy",
        None,
        &fixture.source_healthy,
        &mut cases,
    )?;
    for (damage, records) in &fixture.source_damage {
        let label = damage_label(damage.stiffness_factor);
        write_case(
            &config.data_dir,
            &format!("source_{label}.csv"),
            Domain::Source,
            &label,
            Some(*damage),
            records,
            &mut cases,
        )?;
    }
    write_case(
        &config.data_dir,
        "target_healthy.csv",
        Domain::Target,
        "healthy",
        None,
        &fixture.target_healthy,
        &mut cases,
    )?;
    for (damage, records) in &fixture.target_damage {
        let label = damage_label(damage.stiffness_factor);
        write_case(
            &config.data_dir,
            &format!("target_{label}.csv"),
            Domain::Target,
            &label,
            Some(*damage),
            records,
            &mut cases,
        )?;
    }

    let manifest = FixtureManifest {
        schema_version: 1,
        seed: config.seed,
        fixture: Some(config.fixture.clone()),
        cases,
    };
    manifest.save(&config.manifest_path())?;
    info!(
        "synthesized {} cases into {}",
        manifest.cases.len(),
        config.data_dir.display()
    );
    Ok(manifest)
}

fn write_case(
    dir: &Path,
    file: &str,
    domain: Domain,
    label: &str,
    damage: Option<DamageSpec>,
    records: &[ChannelRecord],
    cases: &mut Vec<CaseEntry>,
) -> Result<()> {
    signals::write_records_csv(&dir.join(file), records)?;
    cases.push(CaseEntry {
        file: file.to_string(),
        domain,
        label: label.to_string(),
        damage,
        sampling_rate_hz: records[0].sampling_rate_hz,
        sensor_dofs: records.iter().map(|r| r.channel_id).collect(),
        samples: records[0].samples.len(),
    });
    Ok(())
}

/// Trains the GAN on the manifest's healthy source case, using its source
/// damage cases only for checkpoint selection, and writes the checkpoint and
/// training log.
pub fn cmd_train_source(config: &ExperimentConfig, resume: bool) -> Result<TrainSummary> {
    ensure_out_dir(config)?;
    let manifest = FixtureManifest::load(&config.manifest_path())?;
    let healthy = case_features(
        config,
        manifest.healthy_case(Domain::Source)?,
        &config.source_channels,
        config.clip_cap,
    )?;
    let mut damage_eval = Vec::new();
    for case in manifest.damage_cases(Domain::Source) {
        damage_eval.extend(case_features(
            config,
            case,
            &config.source_channels,
            config.clip_cap,
        )?);
    }

    let train_config = config.train_config();
    let (resume_state, mut log) = if resume {
        let (header, discriminator, generator) = gan::load_checkpoint(&config.checkpoint_path())?;
        let log_path = config.training_log_path();
        let old_log = if log_path.exists() {
            gan::load_training_log(&log_path)?
        } else {
            Vec::new()
        };
        let kept: Vec<_> = old_log
            .into_iter()
            .filter(|e| e.iteration <= header.iteration)
            .collect();
        info!(
            "resuming from iteration {} ({} log entries kept)",
            header.iteration,
            kept.len()
        );
        let state = ResumeState {
            discriminator,
            generator,
            iteration: header.iteration,
        };
        (Some(state), kept)
    } else {
        (None, Vec::new())
    };

    let outcome = gan::train(&healthy, &damage_eval, &train_config, resume_state)?;

    let source_spectrum: Vec<Vec<f64>> = block_spectra(&healthy)?
        .into_iter()
        .map(|s| s.power)
        .collect();
    let header = CheckpointHeader::new(
        train_config.dims()?,
        config.source_channels.clone(),
        config.clip_cap,
        config.score_cap,
        config.seed,
        outcome.selected_iteration,
        outcome.selected_auc,
        source_spectrum,
    );
    gan::save_checkpoint(
        &config.checkpoint_path(),
        &header,
        &outcome.discriminator,
        &outcome.generator,
    )?;
    log.extend(outcome.log.iter().cloned());
    gan::write_training_log(&config.training_log_path(), &log)?;
    info!(
        "selected iteration {} with source AUC {:.4}",
        outcome.selected_iteration, outcome.selected_auc
    );
    Ok(TrainSummary {
        selected_iteration: outcome.selected_iteration,
        selected_auc: outcome.selected_auc,
        iterations_run: outcome.iterations_run,
        evaluations: log.len(),
        checkpoint: config.checkpoint_path(),
    })
}

/// Calibrates the target-to-source spectral mapping from the first split
/// segment of the target healthy recording, against the source spectrum
/// stored in the checkpoint.
pub fn cmd_adapt(
    config: &ExperimentConfig,
    checkpoint: Option<&Path>,
    target_csv: Option<&Path>,
) -> Result<SpectralMapping> {
    ensure_out_dir(config)?;
    let checkpoint_path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.checkpoint_path());
    let (header, _, _) = gan::load_checkpoint(&checkpoint_path)?;
    check_checkpoint_matches(config, &header)?;
    if header.source_spectrum.is_empty() {
        return Err(Error::InvalidParameter(
            "checkpoint carries no source spectrum; retrain before adapting".to_string(),
        ));
    }

    let features = target_healthy_features(config, target_csv, header.clip_cap)?;
    let (da, _, _) = signals::split_chronologically(&features, config.split()?)?;

    let target_spectra = block_spectra(&da)?;
    let channels = header
        .source_spectrum
        .iter()
        .zip(&target_spectra)
        .enumerate()
        .map(|(block, (power, ts))| {
            let ss = ChannelSpectrum {
                channel_id: header.channel_ids[block],
                power: power.clone(),
            };
            adapt::build_mapping(&ss, ts, config.epsilon)
        })
        .collect::<Result<Vec<_>>>()?;

    let mapping = SpectralMapping {
        schema_version: 1,
        lines_per_channel: header.dims.lines_per_channel(),
        source_channel_ids: header.channel_ids.clone(),
        target_channel_ids: da[0].channel_ids().to_vec(),
        epsilon: config.epsilon,
        calibration_windows: da.len(),
        channels,
    };
    adapt::save_mapping(&config.mapping_path(), &mapping)?;
    info!(
        "calibrated mapping on {} windows across {} channels",
        mapping.calibration_windows,
        mapping.channels.len()
    );
    Ok(mapping)
}

/// Fits the alarm threshold on the second split segment of the target healthy
/// recording, scored through the mapping and the trained discriminator.
pub fn cmd_tune_threshold(config: &ExperimentConfig) -> Result<ThresholdModel> {
    ensure_out_dir(config)?;
    let (header, discriminator, _) = gan::load_checkpoint(&config.checkpoint_path())?;
    check_checkpoint_matches(config, &header)?;
    let mapping = adapt::load_mapping(&config.mapping_path())?;

    let features = target_healthy_features(config, None, header.clip_cap)?;
    let (_, tune, _) = signals::split_chronologically(&features, config.split()?)?;
    let transformed = tune
        .iter()
        .map(|f| adapt::transform(&mapping, f, Some(header.clip_cap)))
        .collect::<Result<Vec<_>>>()?;
    let scores = detect::score_features(&discriminator, &transformed, header.score_cap)?;
    let model = detect::tune_threshold(&scores)?;
    detect::save_threshold(&config.threshold_path(), &model)?;

    let alarms = detect::classify(&scores, &model);
    let rows = score_rows("target_healthy_tune", &scores, &alarms);
    detect::write_scores_csv(&config.out_dir.join("scores_target_healthy_tune.csv"), &rows)?;
    info!(
        "tuned threshold {:.6} on {} windows ({} capped excluded)",
        model.threshold, model.tuned_on, model.capped_excluded
    );
    Ok(model)
}

/// Scores one target recording through the mapping, the discriminator, and
/// the tuned threshold, writing one row per window.
pub fn cmd_detect(config: &ExperimentConfig, input: &Path, label: &str) -> Result<DetectOutcome> {
    check_label(label)?;
    ensure_out_dir(config)?;
    let (header, discriminator, _) = gan::load_checkpoint(&config.checkpoint_path())?;
    check_checkpoint_matches(config, &header)?;
    let mapping = adapt::load_mapping(&config.mapping_path())?;
    let model = detect::load_threshold(&config.threshold_path())?;

    let records = signals::load_records(
        input,
        &config.target_channels,
        sampling_rate_for(config, input),
    )?;
    let features = spectral::features_from_records(&records, config.window_length, header.clip_cap)?;
    let transformed = features
        .iter()
        .map(|f| adapt::transform(&mapping, f, Some(header.clip_cap)))
        .collect::<Result<Vec<_>>>()?;
    let scores = detect::score_features(&discriminator, &transformed, header.score_cap)?;
    let alarms = detect::classify(&scores, &model);
    let rows = score_rows(label, &scores, &alarms);

    let scores_csv = config.out_dir.join(format!("scores_{label}.csv"));
    detect::write_scores_csv(&scores_csv, &rows)?;
    Ok(DetectOutcome {
        rows,
        threshold: model.threshold,
        scores_csv,
    })
}

struct CaseComputation {
    label: String,
    damage: Option<DamageSpec>,
    scores: Vec<DetectionScore>,
    alarms: Vec<bool>,
    values: Vec<f64>,
    raw_values: Option<Vec<f64>>,
    curve: metrics::RocCurve,
    quality: metrics::PrfReport,
}

/// Scores the held-out target windows, measures per-case and pooled detection
/// quality, writes score and ROC files, and saves the final report.
pub fn cmd_evaluate(config: &ExperimentConfig, ablate: bool) -> Result<EvaluationReport> {
    ensure_out_dir(config)?;
    let checkpoint_path = config.checkpoint_path();
    let (header, discriminator, _) = gan::load_checkpoint(&checkpoint_path)?;
    check_checkpoint_matches(config, &header)?;
    let mapping = adapt::load_mapping(&config.mapping_path())?;
    let model = detect::load_threshold(&config.threshold_path())?;
    let manifest = FixtureManifest::load(&config.manifest_path())?;

    let healthy_features = case_features(
        config,
        manifest.healthy_case(Domain::Target)?,
        &config.target_channels,
        header.clip_cap,
    )?;
    let (_, _, test) = signals::split_chronologically(&healthy_features, config.split()?)?;
    let transformed = test
        .iter()
        .map(|f| adapt::transform(&mapping, f, Some(header.clip_cap)))
        .collect::<Result<Vec<_>>>()?;
    let healthy_scores = detect::score_features(&discriminator, &transformed, header.score_cap)?;
    let healthy_alarms = detect::classify(&healthy_scores, &model);
    let healthy_values: Vec<f64> = healthy_scores.iter().map(|s| s.value).collect();
    let healthy_raw_values: Option<Vec<f64>> = if ablate {
        let raw = detect::score_features(&discriminator, &test, header.score_cap)?;
        Some(raw.iter().map(|s| s.value).collect())
    } else {
        None
    };

    let damage_cases = manifest.damage_cases(Domain::Target);
    let healthy_values_ref = &healthy_values;
    let healthy_alarms_ref = &healthy_alarms;
    let raw_healthy: Option<&[f64]> = healthy_raw_values.as_deref();
    let discriminator_ref = &discriminator;
    let mapping_ref = &mapping;
    let model_ref = &model;
    let header_ref = &header;

    let computations: Vec<Result<CaseComputation>> = std::thread::scope(|scope| {
        let handles: Vec<_> = damage_cases
            .iter()
            .map(|&case| {
                scope.spawn(move || -> Result<CaseComputation> {
                    let features = case_features(
                        config,
                        case,
                        &config.target_channels,
                        header_ref.clip_cap,
                    )?;
                    let transformed = features
                        .iter()
                        .map(|f| adapt::transform(mapping_ref, f, Some(header_ref.clip_cap)))
                        .collect::<Result<Vec<_>>>()?;
                    let scores = detect::score_features(
                        discriminator_ref,
                        &transformed,
                        header_ref.score_cap,
                    )?;
                    let alarms = detect::classify(&scores, model_ref);
                    let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
                    let curve = metrics::roc(healthy_values_ref, &values)?;
                    let quality = metrics::prf(healthy_alarms_ref, &alarms)?;
                    let raw_values = match raw_healthy {
                        Some(_) => {
                            let raw = detect::score_features(
                                discriminator_ref,
                                &features,
                                header_ref.score_cap,
                            )?;
                            Some(raw.iter().map(|s| s.value).collect::<Vec<f64>>())
                        }
                        None => None,
                    };
                    Ok(CaseComputation {
                        label: case.label.clone(),
                        damage: case.damage,
                        scores,
                        alarms,
                        values,
                        raw_values,
                        curve,
                        quality,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("case worker panicked"))
            .collect()
    });
    let computations: Vec<CaseComputation> = computations.into_iter().collect::<Result<_>>()?;

    let healthy_rows = score_rows("target_healthy_test", &healthy_scores, &healthy_alarms);
    detect::write_scores_csv(&config.out_dir.join("scores_target_healthy_test.csv"), &healthy_rows)?;

    let mut cases = Vec::with_capacity(computations.len());
    for c in &computations {
        let rows = score_rows(&c.label, &c.scores, &c.alarms);
        let scores_csv = format!("scores_{}.csv", c.label);
        let roc_csv = format!("roc_{}.csv", c.label);
        detect::write_scores_csv(&config.out_dir.join(&scores_csv), &rows)?;
        metrics::write_roc_csv(&config.out_dir.join(&roc_csv), &c.curve)?;
        let auc_no_da = match (&c.raw_values, raw_healthy) {
            (Some(raw), Some(raw_h)) => Some(metrics::roc(raw_h, raw)?.auc),
            _ => None,
        };
        cases.push(CaseReport {
            label: c.label.clone(),
            damage: c.damage,
            windows: c.scores.len(),
            capped_windows: c.scores.iter().filter(|s| s.capped).count(),
            auc: c.curve.auc,
            auc_no_da,
            precision: c.quality.precision,
            recall: c.quality.recall,
            f1: c.quality.f1,
            true_positives: c.quality.true_positives,
            false_positives: c.quality.false_positives,
            true_negatives: c.quality.true_negatives,
            false_negatives: c.quality.false_negatives,
            scores_csv,
            roc_csv,
        });
    }

    let pooled_values: Vec<f64> = computations
        .iter()
        .flat_map(|c| c.values.iter().copied())
        .collect();
    let pooled_alarms: Vec<bool> = computations
        .iter()
        .flat_map(|c| c.alarms.iter().copied())
        .collect();
    let pooled_curve = metrics::roc(&healthy_values, &pooled_values)?;
    let pooled_quality = metrics::prf(&healthy_alarms, &pooled_alarms)?;
    let pooled_no_da = match raw_healthy {
        Some(raw_h) => {
            let pooled_raw: Vec<f64> = computations
                .iter()
                .filter_map(|c| c.raw_values.as_ref())
                .flat_map(|v| v.iter().copied())
                .collect();
            Some(metrics::roc(raw_h, &pooled_raw)?.auc)
        }
        None => None,
    };

    let checkpoint_bytes = fs::read(&checkpoint_path).map_err(|e| Error::io(&checkpoint_path, e))?;
    let report = EvaluationReport {
        schema_version: 1,
        config_hash: config.hash(),
        checkpoint_hash: hex::encode(Sha256::digest(&checkpoint_bytes)),
        selected_iteration: header.iteration,
        source_auc: header.source_auc,
        threshold: model.threshold,
        mapping_calibration_windows: mapping.calibration_windows,
        healthy_test: HealthySummary {
            windows: healthy_scores.len(),
            alarms: healthy_alarms.iter().filter(|&&a| a).count(),
            capped_windows: healthy_scores.iter().filter(|s| s.capped).count(),
        },
        cases,
        pooled: PooledReport {
            windows: pooled_values.len(),
            auc: pooled_curve.auc,
            auc_no_da: pooled_no_da,
            precision: pooled_quality.precision,
            recall: pooled_quality.recall,
            f1: pooled_quality.f1,
        },
    };
    report.save(&config.report_path())?;
    info!("evaluation report: {}", config.report_path().display());
    Ok(report)
}

/// Runs the whole pipeline in order: synth (unless reusing existing data),
/// train, adapt, tune, evaluate.
pub fn run_all(
    config: &ExperimentConfig,
    ablate: bool,
    use_existing_data: bool,
) -> Result<EvaluationReport> {
    if use_existing_data {
        if !config.manifest_path().exists() {
            return Err(Error::InvalidParameter(format!(
                "reusing existing data requires {}",
                config.manifest_path().display()
            )));
        }
    } else {
        cmd_synth(config)?;
    }
    cmd_train_source(config, false)?;
    cmd_adapt(config, None, None)?;
    cmd_tune_threshold(config)?;
    cmd_evaluate(config, ablate)
}

fn ensure_out_dir(config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))
}

fn case_features(
    config: &ExperimentConfig,
    case: &CaseEntry,
    channels: &[usize],
    clip_cap: f64,
) -> Result<Vec<FeatureVector>> {
    let path = config.data_dir.join(&case.file);
    let records = signals::load_records(&path, channels, case.sampling_rate_hz)?;
    spectral::features_from_records(&records, config.window_length, clip_cap)
}

fn target_healthy_features(
    config: &ExperimentConfig,
    override_csv: Option<&Path>,
    clip_cap: f64,
) -> Result<Vec<FeatureVector>> {
    match override_csv {
        Some(path) => {
            let records = signals::load_records(
                path,
                &config.target_channels,
                sampling_rate_for(config, path),
            )?;
            spectral::features_from_records(&records, config.window_length, clip_cap)
        }
        None => {
            let manifest = FixtureManifest::load(&config.manifest_path())?;
            let case = manifest.healthy_case(Domain::Target)?;
            case_features(config, case, &config.target_channels, clip_cap)
        }
    }
}

/// Sampling rate recorded in the manifest for this file name, or 1 Hz when
/// the file is not listed; the rate labels records but never enters the
/// feature math.
fn sampling_rate_for(config: &ExperimentConfig, path: &Path) -> f64 {
    let name = match path.file_name().and_then(|n| n.to_str()) {
        Some(name) => name,
        None => return 1.0,
    };
    FixtureManifest::load(&config.manifest_path())
        .ok()
        .and_then(|m| {
            m.cases
                .iter()
                .find(|c| c.file == name)
                .map(|c| c.sampling_rate_hz)
        })
        .unwrap_or(1.0)
}

fn check_checkpoint_matches(config: &ExperimentConfig, header: &CheckpointHeader) -> Result<()> {
    if header.dims.window_length != config.window_length {
        return Err(Error::InvalidParameter(format!(
            "checkpoint uses window length {}, configuration says {}",
            header.dims.window_length, config.window_length
        )));
    }
    if header.dims.channel_count != config.target_channels.len() {
        return Err(Error::ChannelMismatch {
            context: "checkpoint channels vs configured target channels".to_string(),
            expected: header.dims.channel_count,
            found: config.target_channels.len(),
        });
    }
    Ok(())
}

fn check_label(label: &str) -> Result<()> {
    let clean = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !clean {
        return Err(Error::InvalidParameter(format!(
            "label {label:?} must use only letters, digits, '_', '-', or '.'"
        )));
    }
    Ok(())
}

fn score_rows(label: &str, scores: &[DetectionScore], alarms: &[bool]) -> Vec<ScoreRow> {
    scores
        .iter()
        .zip(alarms)
        .enumerate()
        .map(|(i, (s, &alarm))| ScoreRow {
            window_index: i,
            case_label: label.to_string(),
            score: s.value,
            capped: s.capped,
            alarm,
        })
        .collect()
}

fn block_spectra(features: &[FeatureVector]) -> Result<Vec<ChannelSpectrum>> {
    let first = features
        .first()
        .ok_or_else(|| Error::EmptyInput("no features for spectrum estimation".to_string()))?;
    (0..first.channel_count())
        .map(|block| {
            let channel: Vec<ChannelFeature> = features
                .iter()
                .map(|f| ChannelFeature {
                    channel_id: f.channel_ids()[block],
                    lines: f.channel(block).to_vec(),
                })
                .collect();
            adapt::estimate_spectrum(&channel)
        })
        .collect()
}
