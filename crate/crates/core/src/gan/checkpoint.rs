//! Binary checkpoint files for trained model pairs.
//!
//! Layout: a little-endian `u64` header length, a JSON [`CheckpointHeader`],
//! then every parameter tensor as raw little-endian `f64`s in the models'
//! fixed parameter order (discriminator first, then generator). The header
//! carries everything needed to rebuild the models and to adapt a target
//! structure later, including the healthy source spectrum, so downstream
//! stages need only the checkpoint and target recordings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Discriminator, Generator, ModelDims};
use crate::{Error, Result};

const SCHEMA_VERSION: u32 = 1;
const MAX_HEADER_BYTES: u64 = 64 * 1024 * 1024;

/// Metadata stored alongside the raw parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub dims: ModelDims,
    /// Channel ids in feature block order.
    pub channel_ids: Vec<usize>,
    /// Cap the feature pipeline clips spectral lines at.
    pub clip_cap: f64,
    /// Anomaly-score cap the model was selected under.
    pub score_cap: f64,
    /// Seed the training run used.
    pub seed: u64,
    /// Training iteration the stored discriminator was selected at.
    pub iteration: u64,
    /// Validation AUC of the stored discriminator.
    pub source_auc: f64,
    /// Per-channel mean-square spectrum of the healthy source features, the
    /// reference side of any later spectral mapping.
    pub source_spectrum: Vec<Vec<f64>>,
    tensor_lengths: Vec<usize>,
}

impl CheckpointHeader {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dims: ModelDims,
        channel_ids: Vec<usize>,
        clip_cap: f64,
        score_cap: f64,
        seed: u64,
        iteration: u64,
        source_auc: f64,
        source_spectrum: Vec<Vec<f64>>,
    ) -> Self {
        CheckpointHeader {
            schema_version: SCHEMA_VERSION,
            dims,
            channel_ids,
            clip_cap,
            score_cap,
            seed,
            iteration,
            source_auc,
            source_spectrum,
            tensor_lengths: Vec::new(),
        }
    }
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::CheckpointFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn check_consistency(
    header: &CheckpointHeader,
    discriminator: &Discriminator,
    generator: &Generator,
) -> Result<()> {
    if discriminator.dims != header.dims {
        return Err(Error::InvalidParameter(
            "checkpoint header dims do not match the discriminator".to_string(),
        ));
    }
    if discriminator.channel_ids != header.channel_ids {
        return Err(Error::InvalidParameter(
            "checkpoint header channel ids do not match the discriminator".to_string(),
        ));
    }
    if generator.latent_dim != header.dims.latent_dim
        || generator.output_dim() != header.dims.feature_len()
    {
        return Err(Error::InvalidParameter(
            "checkpoint header dims do not match the generator".to_string(),
        ));
    }
    if !header.source_spectrum.is_empty() {
        if header.source_spectrum.len() != header.dims.channel_count {
            return Err(Error::InvalidParameter(format!(
                "source spectrum has {} channels, model has {}",
                header.source_spectrum.len(),
                header.dims.channel_count
            )));
        }
        for (i, lines) in header.source_spectrum.iter().enumerate() {
            if lines.len() != header.dims.lines_per_channel() {
                return Err(Error::InvalidParameter(format!(
                    "source spectrum channel {i} has {} lines, model expects {}",
                    lines.len(),
                    header.dims.lines_per_channel()
                )));
            }
        }
    }
    Ok(())
}

/// Writes a model pair and its metadata to one binary file.
pub fn save_checkpoint(
    path: &Path,
    header: &CheckpointHeader,
    discriminator: &Discriminator,
    generator: &Generator,
) -> Result<()> {
    check_consistency(header, discriminator, generator)?;

    let mut d = discriminator.clone();
    let mut g = generator.clone();
    let mut tensors = d.param_slices_mut();
    tensors.extend(g.param_slices_mut());

    let mut header = header.clone();
    header.schema_version = SCHEMA_VERSION;
    header.tensor_lengths = tensors.iter().map(|t| t.len()).collect();
    let header_bytes = serde_json::to_vec(&header)?;

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writer
        .write_u64::<LittleEndian>(header_bytes.len() as u64)
        .map_err(|e| Error::io(path, e))?;
    writer.write_all(&header_bytes).map_err(|e| Error::io(path, e))?;
    for tensor in &tensors {
        for &value in tensor.iter() {
            writer
                .write_f64::<LittleEndian>(value)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`] and rebuilds both
/// models.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Discriminator, Generator)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let header_len = reader
        .read_u64::<LittleEndian>()
        .map_err(|_| format_error(path, "file too short for the header length"))?;
    if header_len == 0 || header_len > MAX_HEADER_BYTES {
        return Err(format_error(
            path,
            format!("implausible header length {header_len}"),
        ));
    }
    let mut header_bytes = vec![0u8; header_len as usize];
    reader
        .read_exact(&mut header_bytes)
        .map_err(|_| format_error(path, "truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| format_error(path, format!("header is not valid JSON: {e}")))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(format_error(
            path,
            format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                header.schema_version
            ),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(header.seed);
    let mut discriminator =
        Discriminator::new(header.dims.clone(), header.channel_ids.clone(), &mut rng)?;
    let mut generator = Generator::new(
        header.dims.latent_dim,
        header.dims.feature_len(),
        header.clip_cap,
        &mut rng,
    );

    {
        let mut tensors = discriminator.param_slices_mut();
        tensors.extend(generator.param_slices_mut());
        if header.tensor_lengths.len() != tensors.len() {
            return Err(format_error(
                path,
                format!(
                    "tensor manifest lists {} tensors, models have {}",
                    header.tensor_lengths.len(),
                    tensors.len()
                ),
            ));
        }
        for (i, (tensor, &expected)) in
            tensors.iter_mut().zip(&header.tensor_lengths).enumerate()
        {
            if tensor.len() != expected {
                return Err(format_error(
                    path,
                    format!(
                        "tensor {i} has length {} in the manifest, model expects {}",
                        expected,
                        tensor.len()
                    ),
                ));
            }
            for value in tensor.iter_mut() {
                *value = reader
                    .read_f64::<LittleEndian>()
                    .map_err(|_| format_error(path, format!("truncated data in tensor {i}")))?;
                if !value.is_finite() {
                    return Err(format_error(path, format!("non-finite value in tensor {i}")));
                }
            }
        }
    }

    let mut probe = [0u8; 1];
    match reader.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(format_error(path, "trailing bytes after tensor data")),
        Err(e) => return Err(Error::io(path, e)),
    }

    check_consistency(&header, &discriminator, &generator)?;
    Ok((header, discriminator, generator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{assemble_feature, ChannelFeature, FeatureVector};

    fn tiny_pair(seed: u64) -> (CheckpointHeader, Discriminator, Generator) {
        let dims = ModelDims::new(8, 2, 3, 4, 5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Discriminator::new(dims.clone(), vec![0, 3], &mut rng).unwrap();
        let g = Generator::new(dims.latent_dim, dims.feature_len(), 10.0, &mut rng);
        let spectrum = vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.25, 4.0, 9.0]];
        let header = CheckpointHeader::new(dims, vec![0, 3], 10.0, 40.0, seed, 150, 0.97, spectrum);
        (header, d, g)
    }

    fn probe_feature() -> FeatureVector {
        assemble_feature(&[
            ChannelFeature {
                channel_id: 0,
                lines: vec![0.1, 0.7, 1.3, 0.2],
            },
            ChannelFeature {
                channel_id: 3,
                lines: vec![2.0, 0.4, 0.9, 1.1],
            },
        ])
        .unwrap()
    }

    #[test]
    fn checkpoint_round_trips_models_and_metadata() {
        let (header, d, g) = tiny_pair(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &header, &d, &g).unwrap();

        let (loaded_header, loaded_d, loaded_g) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded_d, d);
        assert_eq!(loaded_g, g);
        assert_eq!(loaded_header.dims, header.dims);
        assert_eq!(loaded_header.channel_ids, header.channel_ids);
        assert_eq!(loaded_header.source_spectrum, header.source_spectrum);
        assert_eq!(loaded_header.iteration, 150);
        assert_eq!(loaded_header.source_auc, 0.97);
        assert_eq!(loaded_header.seed, 7);
    }

    #[test]
    fn predictions_survive_the_round_trip_bitwise() {
        let (header, d, g) = tiny_pair(11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &header, &d, &g).unwrap();
        let (_, loaded_d, _) = load_checkpoint(&path).unwrap();

        let feature = probe_feature();
        assert_eq!(
            d.predict(&feature).unwrap(),
            loaded_d.predict(&feature).unwrap()
        );
    }

    #[test]
    fn truncated_files_are_format_errors() {
        let (header, d, g) = tiny_pair(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &header, &d, &g).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load_checkpoint(&cut),
            Err(Error::CheckpointFormat { .. })
        ));

        let stub = dir.path().join("stub.ckpt");
        std::fs::write(&stub, [1u8, 2, 3]).unwrap();
        assert!(matches!(
            load_checkpoint(&stub),
            Err(Error::CheckpointFormat { .. })
        ));
    }

    #[test]
    fn trailing_bytes_are_format_errors() {
        let (header, d, g) = tiny_pair(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &header, &d, &g).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        let padded = dir.path().join("padded.ckpt");
        std::fs::write(&padded, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&padded),
            Err(Error::CheckpointFormat { .. })
        ));
    }

    #[test]
    fn garbage_headers_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("garbage.ckpt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&12u64.to_le_bytes());
        bytes.extend_from_slice(b"not json!!!!");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CheckpointFormat { .. })
        ));
    }

    #[test]
    fn unsupported_schema_versions_are_rejected() {
        let (header, d, g) = tiny_pair(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &header, &d, &g).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let json = std::str::from_utf8(&bytes[8..8 + header_len]).unwrap();
        let patched_json = json.replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        assert_ne!(json, patched_json);

        let mut patched = Vec::new();
        patched.extend_from_slice(&(patched_json.len() as u64).to_le_bytes());
        patched.extend_from_slice(patched_json.as_bytes());
        patched.extend_from_slice(&bytes[8 + header_len..]);
        let path2 = dir.path().join("patched.ckpt");
        std::fs::write(&path2, &patched).unwrap();

        match load_checkpoint(&path2) {
            Err(Error::CheckpointFormat { reason, .. }) => {
                assert!(reason.contains("schema version"));
            }
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_metadata_is_rejected_at_save() {
        let (mut header, d, g) = tiny_pair(5);
        header.channel_ids = vec![0, 1];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        assert!(matches!(
            save_checkpoint(&path, &header, &d, &g),
            Err(Error::InvalidParameter(_))
        ));
    }
}
