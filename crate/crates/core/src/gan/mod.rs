//! Adversarial training of the healthy-feature discriminator.
//!
//! The generator learns to imitate healthy source features from a
//! standard-normal latent vector while the discriminator learns to tell real
//! healthy features from generated ones. The product of training is the
//! discriminator: as the generator closes in on the healthy feature
//! distribution, the discriminator is forced to model that distribution
//! tightly, which makes its output probability a one-class anomaly detector.
//! Damage data never enters a gradient step; a small damage set is used only
//! to pick the best checkpoint.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use model::{
    Discriminator, DiscriminatorGrads, DiscriminatorTape, Generator, GeneratorGrads,
    GeneratorTape, ModelDims,
};
pub use train::{
    load_training_log, select_best, train, write_training_log, ResumeState, TrainConfig,
    TrainOutcome, TrainingLogEntry,
};

use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// losses so a saturated discriminator cannot produce infinite loss.
pub const PROB_CLAMP: f64 = 1e-12;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn validate_probs(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::EmptyInput(format!("no {what} probabilities")));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(Error::NonFinite {
            context: format!("{what} probabilities"),
        });
    }
    Ok(())
}

/// Discriminator loss: `-mean(ln d_real) - mean(ln(1 - d_fake))`, natural
/// log, probabilities clamped.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    validate_probs(d_real, "real")?;
    validate_probs(d_fake, "fake")?;
    let real: f64 = d_real.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / d_real.len() as f64;
    let fake: f64 = d_fake
        .iter()
        .map(|&p| (1.0 - clamp_prob(p)).ln())
        .sum::<f64>()
        / d_fake.len() as f64;
    Ok(-real - fake)
}

/// Generator loss: `-mean(ln d_fake)`, natural log, probabilities clamped.
pub fn generator_loss(d_fake: &[f64]) -> Result<f64> {
    validate_probs(d_fake, "fake")?;
    Ok(-d_fake.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / d_fake.len() as f64)
}

/// Derivative of [`discriminator_loss`] in each probability; zero where the
/// clamp is active so the gradient matches the clamped loss exactly.
pub fn discriminator_loss_grads(d_real: &[f64], d_fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n_real = d_real.len() as f64;
    let n_fake = d_fake.len() as f64;
    let g_real = d_real
        .iter()
        .map(|&p| {
            if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
                0.0
            } else {
                -1.0 / (n_real * p)
            }
        })
        .collect();
    let g_fake = d_fake
        .iter()
        .map(|&p| {
            if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
                0.0
            } else {
                1.0 / (n_fake * (1.0 - p))
            }
        })
        .collect();
    (g_real, g_fake)
}

/// Derivative of [`generator_loss`] in each probability, zero where the clamp
/// is active.
pub fn generator_loss_grad(d_fake: &[f64]) -> Vec<f64> {
    let n = d_fake.len() as f64;
    d_fake
        .iter()
        .map(|&p| {
            if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
                0.0
            } else {
                -1.0 / (n * p)
            }
        })
        .collect()
}
