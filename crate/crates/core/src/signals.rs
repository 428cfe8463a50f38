//! Acceleration record loading, windowing, and chronological dataset splits.
//!
//! Records arrive as CSV files with one column per sensor channel and one row
//! per sample. Downstream stages work on fixed-length, non-overlapping windows
//! cut from those records in time order, so splits here are chronological
//! prefixes rather than random subsets: early data calibrates the domain
//! mapping, the middle tunes the alarm threshold, and the tail is held out for
//! testing.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One sensor channel's acceleration samples at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    /// Zero-based column index of the channel in its source file.
    pub channel_id: usize,
    /// Acceleration samples in time order.
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub sampling_rate_hz: f64,
}

/// A fixed-length slice of one channel's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisWindow {
    /// Channel the window was cut from.
    pub channel_id: usize,
    /// Sample index of the window's first value within the record.
    pub start_index: usize,
    /// Exactly `w` samples.
    pub values: Vec<f64>,
}

/// Fractions of a window sequence assigned to domain-adaptation calibration,
/// threshold tuning, and held-out testing, in chronological order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub da_fraction: f64,
    pub tune_fraction: f64,
    pub test_fraction: f64,
}

impl DatasetSplit {
    /// Validates that all fractions are non-negative and sum to 1 (within
    /// 1e-9).
    pub fn new(da_fraction: f64, tune_fraction: f64, test_fraction: f64) -> Result<Self> {
        let sum = da_fraction + tune_fraction + test_fraction;
        let non_negative = da_fraction >= 0.0 && tune_fraction >= 0.0 && test_fraction >= 0.0;
        if !non_negative || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit {
                da: da_fraction,
                tune: tune_fraction,
                test: test_fraction,
            });
        }
        Ok(DatasetSplit {
            da_fraction,
            tune_fraction,
            test_fraction,
        })
    }
}

/// Loads the requested channels from a CSV file with one column per channel.
///
/// A header row is detected automatically: if any cell of the first row fails
/// to parse as a number, the row is treated as column names and skipped.
/// Values such as `NaN` or `inf` parse as numbers but are rejected, so every
/// returned sample is finite.
///
/// # Errors
///
/// * [`Error::MissingChannel`] if a requested channel index is not a column.
/// * [`Error::RaggedRow`] if a row has a different width than the first row.
/// * [`Error::NonNumericCell`] for unparsable or non-finite cells.
/// * [`Error::EmptyRecordFile`] if the file holds no data rows.
pub fn load_records(
    path: &Path,
    channel_ids: &[usize],
    sampling_rate_hz: f64,
) -> Result<Vec<ChannelRecord>> {
    if !(sampling_rate_hz > 0.0) {
        return Err(Error::InvalidSamplingRate(sampling_rate_hz));
    }
    if channel_ids.is_empty() {
        return Err(Error::EmptyInput("no channels requested".to_string()));
    }

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut columns: Option<usize> = None;
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); channel_ids.len()];

    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let line = index + 1;

        let width = match columns {
            Some(expected) => {
                if record.len() != expected {
                    return Err(Error::RaggedRow {
                        path: path.to_path_buf(),
                        line,
                        expected,
                        found: record.len(),
                    });
                }
                expected
            }
            None => {
                let width = record.len();
                for &channel in channel_ids {
                    if channel >= width {
                        return Err(Error::MissingChannel {
                            path: path.to_path_buf(),
                            channel,
                            columns: width,
                        });
                    }
                }
                columns = Some(width);
                if record.iter().any(|cell| cell.parse::<f64>().is_err()) {
                    continue;
                }
                width
            }
        };
        debug_assert_eq!(record.len(), width);

        for (slot, &channel) in data.iter_mut().zip(channel_ids) {
            let cell = record.get(channel).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                path: path.to_path_buf(),
                line,
                column: channel,
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    path: path.to_path_buf(),
                    line,
                    column: channel,
                    value: cell.to_string(),
                });
            }
            slot.push(value);
        }
    }

    if data[0].is_empty() {
        return Err(Error::EmptyRecordFile {
            path: path.to_path_buf(),
        });
    }

    Ok(channel_ids
        .iter()
        .zip(data)
        .map(|(&channel_id, samples)| ChannelRecord {
            channel_id,
            samples,
            sampling_rate_hz,
        })
        .collect())
}

/// Writes records as CSV with one column per channel and a `ch<i>` header row.
///
/// All records must have the same number of samples.
pub fn write_records_csv(path: &Path, records: &[ChannelRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to write".to_string()));
    }
    let len = records[0].samples.len();
    for r in records {
        if r.samples.len() != len {
            return Err(Error::UnequalRecordLengths {
                channel: r.channel_id,
                expected: len,
                found: r.samples.len(),
            });
        }
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let header: Vec<String> = records.iter().map(|r| format!("ch{}", r.channel_id)).collect();
    writer.write_record(&header).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut row: Vec<String> = Vec::with_capacity(records.len());
    for i in 0..len {
        row.clear();
        row.extend(records.iter().map(|r| format!("{:.12e}", r.samples[i])));
        writer.write_record(&row).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads an optional channel-naming map from JSON of the form
/// `{"0": "deck north", "1": "deck south"}`.
pub fn load_channel_names(path: &Path) -> Result<BTreeMap<usize, String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, String> = serde_json::from_reader(file)?;
    let mut names = BTreeMap::new();
    for (key, value) in raw {
        let id: usize = key
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("channel key {key:?} is not an index")))?;
        names.insert(id, value);
    }
    Ok(names)
}

/// Cuts a record into non-overlapping windows of `w` samples, in time order.
///
/// A trailing remainder shorter than `w` is dropped. `w` must be positive and
/// even so each window yields `w / 2` spectral lines downstream.
pub fn window_record(record: &ChannelRecord, w: usize) -> Result<Vec<AnalysisWindow>> {
    if w == 0 || !w.is_multiple_of(2) {
        return Err(Error::InvalidWindowLength(w));
    }
    if record.samples.len() < w {
        return Err(Error::RecordTooShort {
            samples: record.samples.len(),
            window: w,
        });
    }
    Ok(record
        .samples
        .chunks_exact(w)
        .enumerate()
        .map(|(i, chunk)| AnalysisWindow {
            channel_id: record.channel_id,
            start_index: i * w,
            values: chunk.to_vec(),
        })
        .collect())
}

/// Splits a chronological window sequence into DA-calibration, threshold-tune,
/// and test segments.
///
/// The first `floor(da_fraction * n)` items calibrate domain adaptation, the
/// next `floor(tune_fraction * n)` tune the threshold, and everything that
/// remains is the test segment, so rounding remainders always land in the
/// test set.
///
/// # Errors
///
/// [`Error::EmptySegment`] if the DA or tune segment would contain no items
/// while its fraction is positive, or if the input is empty.
pub fn split_chronologically<T: Clone>(
    items: &[T],
    split: DatasetSplit,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = items.len();
    let n_da = (split.da_fraction * n as f64).floor() as usize;
    let n_tune = (split.tune_fraction * n as f64).floor() as usize;

    if split.da_fraction > 0.0 && n_da == 0 {
        return Err(Error::EmptySegment {
            segment: "domain-adaptation",
            windows: n,
        });
    }
    if split.tune_fraction > 0.0 && n_tune == 0 {
        return Err(Error::EmptySegment {
            segment: "threshold-tune",
            windows: n,
        });
    }
    if n_da + n_tune >= n {
        return Err(Error::EmptySegment {
            segment: "test",
            windows: n,
        });
    }

    let da = items[..n_da].to_vec();
    let tune = items[n_da..n_da + n_tune].to_vec();
    let test = items[n_da + n_tune..].to_vec();
    Ok((da, tune, test))
}
