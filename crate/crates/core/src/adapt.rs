//! Zero-shot domain adaptation between structures via argsort spectral
//! mapping.
//!
//! Both domains' per-channel power spectra are estimated as the mean square of
//! normalized features over calibration windows. Sorting both spectra and
//! pairing lines by rank gives a line correspondence that needs no knowledge
//! of either structure's physics: the k-th weakest target line is moved to
//! the position of the k-th weakest source line and rescaled so its power
//! matches. A discriminator trained only on the source domain can then score
//! transformed target features directly.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::spectral::{ChannelFeature, FeatureVector};
use crate::{Error, Result};

/// Default floor applied to target power denominators.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Mean-square spectrum of one channel over a set of calibration windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpectrum {
    pub channel_id: usize,
    /// Mean of squared normalized lines, one entry per spectral line.
    pub power: Vec<f64>,
}

/// Rank-pairing of one source channel with one target channel.
///
/// `arg_s[k]` and `arg_t[k]` are the indices of the k-th weakest source and
/// target lines; `c_st[k]` rescales the target line so its calibration power
/// equals the source's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMapping {
    pub arg_s: Vec<usize>,
    pub arg_t: Vec<usize>,
    pub c_st: Vec<f64>,
}

/// Complete feature-space mapping from a target structure onto a source
/// structure, one [`ChannelMapping`] per paired channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMapping {
    pub schema_version: u32,
    pub lines_per_channel: usize,
    pub source_channel_ids: Vec<usize>,
    pub target_channel_ids: Vec<usize>,
    pub epsilon: f64,
    /// Number of target calibration windows the mapping was estimated from.
    pub calibration_windows: usize,
    pub channels: Vec<ChannelMapping>,
}

/// Estimates a channel's power spectrum as the per-line mean square over
/// calibration windows, which must all belong to the same channel.
pub fn estimate_spectrum(features: &[ChannelFeature]) -> Result<ChannelSpectrum> {
    if features.is_empty() {
        return Err(Error::EmptyInput("no calibration features".to_string()));
    }
    let channel_id = features[0].channel_id;
    let lines = features[0].lines.len();
    let mut power = vec![0.0f64; lines];
    for feature in features {
        if feature.channel_id != channel_id {
            return Err(Error::InvalidParameter(format!(
                "spectrum estimation mixes channels {channel_id} and {}",
                feature.channel_id
            )));
        }
        if feature.lines.len() != lines {
            return Err(Error::LengthMismatch {
                context: format!("calibration lines of channel {channel_id}"),
                expected: lines,
                found: feature.lines.len(),
            });
        }
        for (acc, &v) in power.iter_mut().zip(&feature.lines) {
            *acc += v * v;
        }
    }
    let n = features.len() as f64;
    power.iter_mut().for_each(|p| *p /= n);
    Ok(ChannelSpectrum { channel_id, power })
}

fn argsort_ascending(values: &[f64]) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..values.len()).collect();
    indices.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("finite power values")
            .then(a.cmp(&b))
    });
    indices
}

/// Pairs one source channel's spectrum with one target channel's by rank.
///
/// Both spectra are argsorted ascending (ties broken by line index, so equal
/// powers keep their original order) and the scale for rank `k` is
/// `sqrt(ss[arg_s[k]] / max(ts[arg_t[k]], epsilon))`.
pub fn build_mapping(
    ss: &ChannelSpectrum,
    ts: &ChannelSpectrum,
    epsilon: f64,
) -> Result<ChannelMapping> {
    if ss.power.len() != ts.power.len() {
        return Err(Error::LengthMismatch {
            context: format!(
                "source channel {} vs target channel {} spectrum",
                ss.channel_id, ts.channel_id
            ),
            expected: ss.power.len(),
            found: ts.power.len(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    for spectrum in [ss, ts] {
        if spectrum.power.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite {
                context: format!("power spectrum of channel {}", spectrum.channel_id),
            });
        }
    }

    let arg_s = argsort_ascending(&ss.power);
    let arg_t = argsort_ascending(&ts.power);
    let c_st = arg_s
        .iter()
        .zip(&arg_t)
        .map(|(&s, &t)| (ss.power[s] / ts.power[t].max(epsilon)).sqrt())
        .collect();
    Ok(ChannelMapping { arg_s, arg_t, c_st })
}

/// Builds the full mapping from source and target calibration features.
///
/// Channels are paired positionally: the k-th source channel block maps to
/// the k-th target channel block, so both domains must have the same channel
/// count and spectral resolution, though their channel ids and even their
/// physical structures may differ.
pub fn build_spectral_mapping(
    source_features: &[FeatureVector],
    target_features: &[FeatureVector],
    epsilon: f64,
) -> Result<SpectralMapping> {
    let source_first = source_features
        .first()
        .ok_or_else(|| Error::EmptyInput("no source calibration features".to_string()))?;
    let target_first = target_features
        .first()
        .ok_or_else(|| Error::EmptyInput("no target calibration features".to_string()))?;
    if source_first.channel_count() != target_first.channel_count() {
        return Err(Error::ChannelMismatch {
            context: "spectral mapping domains".to_string(),
            expected: source_first.channel_count(),
            found: target_first.channel_count(),
        });
    }
    if source_first.lines_per_channel() != target_first.lines_per_channel() {
        return Err(Error::LengthMismatch {
            context: "spectral mapping lines per channel".to_string(),
            expected: source_first.lines_per_channel(),
            found: target_first.lines_per_channel(),
        });
    }

    let channels = (0..source_first.channel_count())
        .map(|block| {
            let ss = estimate_spectrum(&block_features(source_features, block)?)?;
            let ts = estimate_spectrum(&block_features(target_features, block)?)?;
            build_mapping(&ss, &ts, epsilon)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SpectralMapping {
        schema_version: 1,
        lines_per_channel: source_first.lines_per_channel(),
        source_channel_ids: source_first.channel_ids().to_vec(),
        target_channel_ids: target_first.channel_ids().to_vec(),
        epsilon,
        calibration_windows: target_features.len(),
        channels,
    })
}

fn block_features(features: &[FeatureVector], block: usize) -> Result<Vec<ChannelFeature>> {
    let ids = features[0].channel_ids().to_vec();
    let lines = features[0].lines_per_channel();
    features
        .iter()
        .map(|f| {
            if f.channel_ids() != ids.as_slice() || f.lines_per_channel() != lines {
                return Err(Error::ChannelMismatch {
                    context: "calibration feature set".to_string(),
                    expected: ids.len(),
                    found: f.channel_count(),
                });
            }
            Ok(ChannelFeature {
                channel_id: ids[block],
                lines: f.channel(block).to_vec(),
            })
        })
        .collect()
}

/// Maps a target-domain feature into the source feature space.
///
/// For every channel and rank `k`, the target line at `arg_t[k]` is placed at
/// source position `arg_s[k]` and scaled by `c_st[k]`. Scaled lines may
/// exceed the original clip cap; pass `reclip` to bound them again.
pub fn transform(
    mapping: &SpectralMapping,
    feature: &FeatureVector,
    reclip: Option<f64>,
) -> Result<FeatureVector> {
    check_feature(mapping, feature, &mapping.target_channel_ids)?;
    let lines = mapping.lines_per_channel;
    let mut flat = vec![0.0f64; feature.len()];
    for (block, channel) in mapping.channels.iter().enumerate() {
        let input = feature.channel(block);
        let output = &mut flat[block * lines..(block + 1) * lines];
        for k in 0..lines {
            let mut v = input[channel.arg_t[k]] * channel.c_st[k];
            if let Some(cap) = reclip {
                v = v.min(cap);
            }
            output[channel.arg_s[k]] = v;
        }
    }
    FeatureVector::new(mapping.source_channel_ids.clone(), lines, flat)
}

/// Undoes [`transform`], recovering the target-domain feature.
///
/// Fails if any scale factor is zero (a source line with zero calibration
/// power), since that line's value cannot be recovered.
pub fn inverse_transform(mapping: &SpectralMapping, feature: &FeatureVector) -> Result<FeatureVector> {
    check_feature(mapping, feature, &mapping.source_channel_ids)?;
    let lines = mapping.lines_per_channel;
    let mut flat = vec![0.0f64; feature.len()];
    for (block, channel) in mapping.channels.iter().enumerate() {
        let input = feature.channel(block);
        let output = &mut flat[block * lines..(block + 1) * lines];
        for k in 0..lines {
            let scale = channel.c_st[k];
            if scale == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "mapping is not invertible: zero scale at rank {k} of channel block {block}"
                )));
            }
            output[channel.arg_t[k]] = input[channel.arg_s[k]] / scale;
        }
    }
    FeatureVector::new(mapping.target_channel_ids.clone(), lines, flat)
}

fn check_feature(
    mapping: &SpectralMapping,
    feature: &FeatureVector,
    expected_ids: &[usize],
) -> Result<()> {
    if feature.channel_ids() != expected_ids {
        return Err(Error::ChannelMismatch {
            context: "feature passed to spectral mapping".to_string(),
            expected: expected_ids.len(),
            found: feature.channel_count(),
        });
    }
    if feature.lines_per_channel() != mapping.lines_per_channel {
        return Err(Error::LengthMismatch {
            context: "feature lines per channel".to_string(),
            expected: mapping.lines_per_channel,
            found: feature.lines_per_channel(),
        });
    }
    Ok(())
}

/// Saves a mapping as pretty-printed JSON.
pub fn save_mapping(path: &Path, mapping: &SpectralMapping) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), mapping)?;
    Ok(())
}

/// Loads a mapping saved by [`save_mapping`].
pub fn load_mapping(path: &Path) -> Result<SpectralMapping> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
