//! Cross-structure vibration-based damage detection.
//!
//! The pipeline trains a GAN on spectral features of one structure's healthy
//! acceleration records and reuses the discriminator as an anomaly scorer for a
//! different structure. A per-channel argsort mapping aligns the second
//! structure's spectra with the first so the discriminator never has to be
//! retrained, and a Gaussian-fit threshold on healthy scores turns the scorer
//! into a damage alarm.
//!
//! Modules follow the data flow:
//!
//! * [`signals`] loads multi-channel acceleration CSVs and cuts them into
//!   fixed-length windows with chronological dataset splits.
//! * [`spectral`] turns windows into normalized, clipped FFT magnitude
//!   features.
//! * [`neural`] provides the dense and LSTM layers, backpropagation tapes, and
//!   the ADAM optimizer the models are built from.
//! * [`gan`] defines the discriminator and generator, their losses, the
//!   adversarial training loop, and checkpoint files.
//! * [`adapt`] estimates per-channel power spectra and builds the argsort
//!   mapping that transfers target features into the source feature space.
//! * [`detect`] converts discriminator outputs into log-scale anomaly scores,
//!   tunes the alarm threshold, and classifies windows.
//! * [`metrics`] computes ROC curves, AUC, and precision/recall/F1.
//! * [`synth`] simulates small shear-building structures so the whole transfer
//!   pipeline can be exercised end to end without measured data.

// Validation guards are written `!(x > 0.0)` so NaN also fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod detect;
pub mod gan;
pub mod metrics;
pub mod neural;
pub mod signals;
pub mod spectral;
pub mod synth;

mod error;

pub use adapt::{ChannelMapping, ChannelSpectrum, SpectralMapping};
pub use detect::{DetectionScore, ThresholdModel};
pub use error::{Error, Result};
pub use gan::{Discriminator, Generator, ModelDims, TrainConfig, TrainOutcome, TrainingLogEntry};
pub use metrics::{PrfReport, RocCurve};
pub use signals::{AnalysisWindow, ChannelRecord, DatasetSplit};
pub use spectral::{ChannelFeature, FeatureVector};
pub use synth::{DamageSpec, StructureSpec, TlFixture};
