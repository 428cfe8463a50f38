//! Adversarial training loop with AUC-based checkpoint selection.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::score_from_probability;
use crate::neural::AdamState;
use crate::spectral::FeatureVector;
use crate::{metrics, Error, Result};

use super::model::{Discriminator, Generator, ModelDims};
use super::{discriminator_loss, discriminator_loss_grads, generator_loss, generator_loss_grad};

/// Everything the training loop needs to know, with field defaults matching
/// the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub window_length: usize,
    /// Channel ids in feature block order; also fixes the channel count.
    pub channel_ids: Vec<usize>,
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
    /// Checkpoint evaluation cadence in iterations.
    pub eval_interval: u64,
    /// Evaluations without an eligible AUC improvement before stopping early.
    pub patience_evals: u64,
    /// Fraction of healthy features held out (chronological tail) for
    /// checkpoint AUC evaluation.
    pub val_fraction: f64,
    pub clip_cap: f64,
    /// Anomaly-score cap; checkpoints whose maximum evaluation score reaches
    /// it are never selected.
    pub score_cap: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(window_length: usize, channel_ids: Vec<usize>, seed: u64) -> Self {
        TrainConfig {
            window_length,
            channel_ids,
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
            clip_cap: 10.0,
            score_cap: 40.0,
            seed,
        }
    }

    pub fn dims(&self) -> Result<ModelDims> {
        ModelDims::new(
            self.window_length,
            self.channel_ids.len(),
            self.hidden_size,
            self.merge_width,
            self.latent_dim,
            self.target_seq_steps,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".to_string()));
        }
        if self.eval_interval == 0 {
            return Err(Error::InvalidParameter("eval_interval must be positive".to_string()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning_rate must be positive".to_string()));
        }
        if !(self.score_cap > 0.0) {
            return Err(Error::InvalidParameter("score_cap must be positive".to_string()));
        }
        Ok(())
    }
}

/// One checkpoint evaluation in the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogEntry {
    pub iteration: u64,
    pub loss_d: f64,
    pub loss_g: f64,
    /// AUC of healthy-validation vs damage scores at this checkpoint.
    pub source_auc: f64,
    /// Largest anomaly score over the whole evaluation set.
    pub max_score_seen: f64,
}

/// Model state to continue training from.
#[derive(Debug)]
pub struct ResumeState {
    pub discriminator: Discriminator,
    pub generator: Generator,
    pub iteration: u64,
}

/// Result of a training run: the selected discriminator, the final generator,
/// and the evaluation log.
#[derive(Debug)]
pub struct TrainOutcome {
    pub discriminator: Discriminator,
    pub generator: Generator,
    pub log: Vec<TrainingLogEntry>,
    pub selected_iteration: u64,
    pub selected_auc: f64,
    pub iterations_run: u64,
}

/// Index of the log entry the selection rule picks: the highest AUC among
/// checkpoints whose maximum evaluation score stayed strictly below
/// `score_cap`, earliest on ties.
pub fn select_best(log: &[TrainingLogEntry], score_cap: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, entry) in log.iter().enumerate() {
        if entry.max_score_seen >= score_cap {
            continue;
        }
        if best.is_none_or(|b| entry.source_auc > log[b].source_auc) {
            best = Some(i);
        }
    }
    best
}

fn to_matrix(
    features: &[FeatureVector],
    channel_ids: &[usize],
    lines: usize,
    what: &str,
) -> Result<Array2<f64>> {
    if features.is_empty() {
        return Err(Error::EmptyInput(format!("no {what} features")));
    }
    let cols = channel_ids.len() * lines;
    let mut matrix = Array2::zeros((features.len(), cols));
    for (i, f) in features.iter().enumerate() {
        if f.channel_ids() != channel_ids {
            return Err(Error::ChannelMismatch {
                context: format!("{what} features"),
                expected: channel_ids.len(),
                found: f.channel_count(),
            });
        }
        if f.lines_per_channel() != lines {
            return Err(Error::LengthMismatch {
                context: format!("{what} feature lines"),
                expected: lines,
                found: f.lines_per_channel(),
            });
        }
        matrix.row_mut(i).assign(&Array1::from_vec(f.flat().to_vec()));
    }
    Ok(matrix)
}

/// Trains the GAN on healthy source features.
///
/// The healthy set is split chronologically into train and validation parts.
/// Each iteration takes one discriminator step (a real batch against a
/// generated batch) followed by one generator step. Every `eval_interval`
/// iterations the discriminator is scored on the validation and damage sets;
/// the checkpoint with the best eligible AUC is kept and returned. Training
/// stops at `max_iterations` or once `patience_evals` evaluations pass
/// without an eligible improvement.
///
/// # Errors
///
/// [`Error::SelectionFailed`] if no checkpoint ever satisfied the selection
/// rule, [`Error::NonFiniteGradient`] / [`Error::NonFinite`] if training
/// diverges.
pub fn train(
    healthy: &[FeatureVector],
    damage_eval: &[FeatureVector],
    config: &TrainConfig,
    resume: Option<ResumeState>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let dims = config.dims()?;
    let lines = dims.lines_per_channel();

    let n_val = (config.val_fraction * healthy.len() as f64).floor() as usize;
    if n_val == 0 {
        return Err(Error::EmptySegment {
            segment: "training validation",
            windows: healthy.len(),
        });
    }
    let n_train = healthy.len() - n_val;
    if n_train == 0 {
        return Err(Error::EmptySegment {
            segment: "training",
            windows: healthy.len(),
        });
    }

    let x_train = to_matrix(&healthy[..n_train], &config.channel_ids, lines, "healthy train")?;
    let x_val = to_matrix(&healthy[n_train..], &config.channel_ids, lines, "healthy validation")?;
    let x_damage = to_matrix(damage_eval, &config.channel_ids, lines, "damage evaluation")?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut d, mut g, start_iteration) = match resume {
        Some(state) => {
            if state.discriminator.dims != dims {
                return Err(Error::InvalidParameter(
                    "resume checkpoint shape differs from the training config".to_string(),
                ));
            }
            (state.discriminator, state.generator, state.iteration)
        }
        None => (
            Discriminator::new(dims.clone(), config.channel_ids.clone(), &mut rng)?,
            Generator::new(dims.latent_dim, dims.feature_len(), config.clip_cap, &mut rng),
            0,
        ),
    };

    let mut adam_d = AdamState::new(
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_epsilon,
    );
    let mut adam_g = adam_d.clone();

    let mut log: Vec<TrainingLogEntry> = Vec::new();
    let mut best: Option<(Discriminator, u64, f64)> = None;
    let mut evals_since_improvement: u64 = 0;
    let mut iterations_run: u64 = 0;

    for iteration in (start_iteration + 1)..=config.max_iterations.max(start_iteration) {
        iterations_run = iteration;

        let indices: Vec<usize> = (0..config.batch_size)
            .map(|_| rng.random_range(0..n_train))
            .collect();
        let x_real = x_train.select(Axis(0), &indices);
        let z = Generator::sample_latent(&mut rng, config.batch_size, dims.latent_dim);
        let x_fake = g.infer_batch(&z);

        let (p_real, tape_real) = d.forward_batch(&x_real);
        let (p_fake, tape_fake) = d.forward_batch(&x_fake);
        let p_real_s = p_real.as_slice().expect("contiguous");
        let p_fake_s = p_fake.as_slice().expect("contiguous");
        let loss_d = discriminator_loss(p_real_s, p_fake_s)?;
        let (grad_real, grad_fake) = discriminator_loss_grads(p_real_s, p_fake_s);
        let (mut d_grads, _) = d.backward(tape_real, &Array1::from_vec(grad_real));
        let (d_grads_fake, _) = d.backward(tape_fake, &Array1::from_vec(grad_fake));
        d_grads.add(&d_grads_fake);
        adam_d.step(&mut d.param_slices_mut(), &d_grads.slices())?;

        let z = Generator::sample_latent(&mut rng, config.batch_size, dims.latent_dim);
        let (x_fake, g_tape) = g.forward_batch(&z);
        let (p_fake, d_tape) = d.forward_batch(&x_fake);
        let p_fake_s = p_fake.as_slice().expect("contiguous");
        let loss_g = generator_loss(p_fake_s)?;
        let grad = generator_loss_grad(p_fake_s);
        let (_, d_input) = d.backward(d_tape, &Array1::from_vec(grad));
        let g_grads = g.backward(g_tape, &d_input);
        adam_g.step(&mut g.param_slices_mut(), &g_grads.slices())?;

        if !loss_d.is_finite() || !loss_g.is_finite() {
            return Err(Error::NonFinite {
                context: format!("training losses at iteration {iteration}"),
            });
        }

        if iteration % config.eval_interval == 0 {
            let val_scores = scores_of(&d, &x_val, config.score_cap);
            let damage_scores = scores_of(&d, &x_damage, config.score_cap);
            let source_auc = metrics::roc(&val_scores, &damage_scores)?.auc;
            let max_score_seen = val_scores
                .iter()
                .chain(&damage_scores)
                .fold(f64::NEG_INFINITY, |a, &b| a.max(b));

            log.push(TrainingLogEntry {
                iteration,
                loss_d,
                loss_g,
                source_auc,
                max_score_seen,
            });

            let eligible = max_score_seen < config.score_cap;
            let improved = eligible && best.as_ref().is_none_or(|(_, _, auc)| source_auc > *auc);
            if improved {
                best = Some((d.clone(), iteration, source_auc));
                evals_since_improvement = 0;
            } else {
                evals_since_improvement += 1;
            }
            if best.is_some() && evals_since_improvement >= config.patience_evals {
                break;
            }
        }
    }

    match best {
        Some((discriminator, selected_iteration, selected_auc)) => Ok(TrainOutcome {
            discriminator,
            generator: g,
            log,
            selected_iteration,
            selected_auc,
            iterations_run,
        }),
        None => {
            let reason = log
                .iter()
                .max_by(|a, b| a.source_auc.total_cmp(&b.source_auc))
                .map(|e| {
                    format!(
                        "best AUC {:.4} at iteration {} had max score {:.2} (cap {})",
                        e.source_auc, e.iteration, e.max_score_seen, config.score_cap
                    )
                })
                .unwrap_or_else(|| "no evaluations were performed".to_string());
            Err(Error::SelectionFailed {
                evals: log.len() as u64,
                reason,
            })
        }
    }
}

fn scores_of(d: &Discriminator, x: &Array2<f64>, cap: f64) -> Vec<f64> {
    d.infer_batch(x)
        .iter()
        .map(|&p| score_from_probability(p, cap).value)
        .collect()
}

/// Writes the training log as one JSON object per line.
pub fn write_training_log(path: &Path, log: &[TrainingLogEntry]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for entry in log {
        serde_json::to_writer(&mut writer, entry)?;
        writeln!(writer).map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads a training log written by [`write_training_log`].
pub fn load_training_log(path: &Path) -> Result<Vec<TrainingLogEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .filter_map(|line| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(serde_json::from_str(&l).map_err(Error::from)),
            Err(e) => Some(Err(Error::io(path, e))),
        })
        .collect()
}
