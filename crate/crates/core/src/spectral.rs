//! Spectral feature extraction from analysis windows.
//!
//! Each window of `W` samples becomes the first `W / 2` magnitudes of its
//! `W`-point FFT (DC included, ascending frequency, no taper), normalized by
//! their mean and clipped at a fixed cap. Per-channel features are then
//! concatenated in channel order into one flat vector, which is the only
//! representation the models ever see. Mean normalization makes features
//! invariant to overall excitation level, and the clip bounds every entry so
//! a bounded-output generator can imitate them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::signals::{AnalysisWindow, ChannelRecord};
use crate::{Error, Result};

/// Default clip cap applied to normalized spectral lines.
pub const DEFAULT_CLIP_CAP: f64 = 10.0;

/// Normalized, clipped spectral lines of one channel's window.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFeature {
    pub channel_id: usize,
    /// `W / 2` lines, DC first, ascending frequency.
    pub lines: Vec<f64>,
}

/// Concatenation of every channel's spectral lines for one time window.
///
/// The flat layout is `channel_ids[0]`'s lines followed by `channel_ids[1]`'s
/// and so on, so its length is always `channel_count * lines_per_channel`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    channel_ids: Vec<usize>,
    lines_per_channel: usize,
    flat: Vec<f64>,
}

impl FeatureVector {
    /// Builds a feature vector from its flat representation, validating the
    /// layout invariant.
    pub fn new(channel_ids: Vec<usize>, lines_per_channel: usize, flat: Vec<f64>) -> Result<Self> {
        if channel_ids.is_empty() {
            return Err(Error::EmptyInput("feature vector has no channels".to_string()));
        }
        if flat.len() != channel_ids.len() * lines_per_channel {
            return Err(Error::LengthMismatch {
                context: "feature vector flat storage".to_string(),
                expected: channel_ids.len() * lines_per_channel,
                found: flat.len(),
            });
        }
        Ok(FeatureVector {
            channel_ids,
            lines_per_channel,
            flat,
        })
    }

    pub fn channel_ids(&self) -> &[usize] {
        &self.channel_ids
    }

    pub fn channel_count(&self) -> usize {
        self.channel_ids.len()
    }

    pub fn lines_per_channel(&self) -> usize {
        self.lines_per_channel
    }

    /// All lines, channel blocks concatenated in order.
    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    /// Lines of the `idx`-th channel block.
    pub fn channel(&self, idx: usize) -> &[f64] {
        let start = idx * self.lines_per_channel;
        &self.flat[start..start + self.lines_per_channel]
    }
}

/// Magnitudes of the first `W / 2` FFT lines of a window, unnormalized.
///
/// The window's raw samples go through a `W`-point FFT with no taper or
/// detrending, so the DC line carries `W` times the window mean.
pub fn fft_amplitudes(window: &AnalysisWindow) -> Result<Vec<f64>> {
    let w = window.values.len();
    if w == 0 || !w.is_multiple_of(2) {
        return Err(Error::InvalidWindowLength(w));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(w);
    Ok(fft_amplitudes_with(fft.as_ref(), window))
}

fn fft_amplitudes_with(fft: &dyn Fft<f64>, window: &AnalysisWindow) -> Vec<f64> {
    let w = window.values.len();
    let mut buffer: Vec<Complex<f64>> = window
        .values
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    fft.process(&mut buffer);
    buffer[..w / 2].iter().map(|c| c.norm()).collect()
}

/// Divides amplitudes by their mean and clips the result at `cap`.
///
/// # Errors
///
/// * [`Error::DegenerateWindow`] if the mean amplitude is zero (all-zero
///   window), which would make normalization divide by zero.
/// * [`Error::NonFinite`] if any amplitude is not finite.
pub fn normalize_and_clip(
    channel_id: usize,
    amplitudes: &[f64],
    cap: f64,
) -> Result<ChannelFeature> {
    if amplitudes.is_empty() {
        return Err(Error::EmptyInput("no amplitudes to normalize".to_string()));
    }
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "clip cap must be positive, got {cap}"
        )));
    }
    if amplitudes.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("fft amplitudes of channel {channel_id}"),
        });
    }
    let mean = amplitudes.iter().sum::<f64>() / amplitudes.len() as f64;
    if mean == 0.0 {
        return Err(Error::DegenerateWindow {
            channel: channel_id,
        });
    }
    let lines = amplitudes.iter().map(|a| (a / mean).min(cap)).collect();
    Ok(ChannelFeature { channel_id, lines })
}

/// Concatenates per-channel features, in the given order, into one vector.
///
/// All channels must contribute the same number of lines and channel ids must
/// be distinct.
pub fn assemble_feature(channel_features: &[ChannelFeature]) -> Result<FeatureVector> {
    if channel_features.is_empty() {
        return Err(Error::EmptyInput("no channel features to assemble".to_string()));
    }
    let lines_per_channel = channel_features[0].lines.len();
    let mut channel_ids = Vec::with_capacity(channel_features.len());
    let mut flat = Vec::with_capacity(channel_features.len() * lines_per_channel);
    for feature in channel_features {
        if feature.lines.len() != lines_per_channel {
            return Err(Error::LengthMismatch {
                context: format!("lines of channel {}", feature.channel_id),
                expected: lines_per_channel,
                found: feature.lines.len(),
            });
        }
        if channel_ids.contains(&feature.channel_id) {
            return Err(Error::InvalidParameter(format!(
                "channel {} appears twice in one feature",
                feature.channel_id
            )));
        }
        channel_ids.push(feature.channel_id);
        flat.extend_from_slice(&feature.lines);
    }
    FeatureVector::new(channel_ids, lines_per_channel, flat)
}

/// Windows every record and extracts one feature vector per window index.
///
/// All records must cover the same time span, so they must produce the same
/// number of windows; window `i` of every channel is combined into feature
/// `i`, preserving time order.
pub fn features_from_records(
    records: &[ChannelRecord],
    w: usize,
    cap: f64,
) -> Result<Vec<FeatureVector>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to extract features from".to_string()));
    }
    if w == 0 || !w.is_multiple_of(2) {
        return Err(Error::InvalidWindowLength(w));
    }

    let per_channel: Vec<Vec<AnalysisWindow>> = records
        .iter()
        .map(|r| crate::signals::window_record(r, w))
        .collect::<Result<_>>()?;
    let count = per_channel[0].len();
    for (record, windows) in records.iter().zip(&per_channel) {
        if windows.len() != count {
            return Err(Error::UnequalRecordLengths {
                channel: record.channel_id,
                expected: count * w,
                found: windows.len() * w,
            });
        }
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(w);
    let mut features = Vec::with_capacity(count);
    for i in 0..count {
        let channel_features: Vec<ChannelFeature> = per_channel
            .iter()
            .map(|windows| {
                let amplitudes = fft_amplitudes_with(fft.as_ref(), &windows[i]);
                normalize_and_clip(windows[i].channel_id, &amplitudes, cap)
            })
            .collect::<Result<_>>()?;
        features.push(assemble_feature(&channel_features)?);
    }
    Ok(features)
}

/// Sidecar metadata describing a binary feature matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub schema_version: u32,
    pub rows: usize,
    pub channel_ids: Vec<usize>,
    pub lines_per_channel: usize,
    pub window_length: usize,
    pub clip_cap: f64,
}

fn sidecar_path(bin_path: &Path) -> PathBuf {
    let mut s = bin_path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes features as a row-major little-endian `f64` matrix plus a JSON
/// sidecar (`<path>.json`) describing its shape and provenance.
pub fn write_feature_matrix(
    bin_path: &Path,
    features: &[FeatureVector],
    window_length: usize,
    clip_cap: f64,
) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyInput("no features to write".to_string()));
    }
    let first = &features[0];
    let meta = FeatureMeta {
        schema_version: 1,
        rows: features.len(),
        channel_ids: first.channel_ids().to_vec(),
        lines_per_channel: first.lines_per_channel(),
        window_length,
        clip_cap,
    };

    let file = File::create(bin_path).map_err(|e| Error::io(bin_path, e))?;
    let mut writer = BufWriter::new(file);
    for feature in features {
        if feature.channel_ids() != meta.channel_ids.as_slice()
            || feature.lines_per_channel() != meta.lines_per_channel
        {
            return Err(Error::LengthMismatch {
                context: "feature matrix rows".to_string(),
                expected: meta.channel_ids.len() * meta.lines_per_channel,
                found: feature.len(),
            });
        }
        for &value in feature.flat() {
            writer
                .write_f64::<LittleEndian>(value)
                .map_err(|e| Error::io(bin_path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(bin_path, e))?;

    let sidecar = sidecar_path(bin_path);
    let file = File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &meta)?;
    Ok(())
}

/// Reads a feature matrix written by [`write_feature_matrix`].
pub fn read_feature_matrix(bin_path: &Path) -> Result<(Vec<FeatureVector>, FeatureMeta)> {
    let sidecar = sidecar_path(bin_path);
    let meta: FeatureMeta = {
        let file = File::open(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        serde_json::from_reader(BufReader::new(file))?
    };

    let cols = meta.channel_ids.len() * meta.lines_per_channel;
    let file = File::open(bin_path).map_err(|e| Error::io(bin_path, e))?;
    let mut reader = BufReader::new(file);
    let mut features = Vec::with_capacity(meta.rows);
    for _ in 0..meta.rows {
        let mut flat = vec![0.0f64; cols];
        reader
            .read_f64_into::<LittleEndian>(&mut flat)
            .map_err(|e| Error::io(bin_path, e))?;
        features.push(FeatureVector::new(
            meta.channel_ids.clone(),
            meta.lines_per_channel,
            flat,
        )?);
    }
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(|e| Error::io(bin_path, e))? != 0 {
        return Err(Error::LengthMismatch {
            context: format!("feature matrix {}", bin_path.display()),
            expected: meta.rows * cols * 8,
            found: meta.rows * cols * 8 + 1,
        });
    }
    Ok((features, meta))
}
