//! Anomaly scoring, threshold tuning, and alarm classification.
//!
//! A window's anomaly score is `-log10(D(x))`: healthy-looking windows score
//! near zero, windows the discriminator rejects score high. Scores are capped
//! (40 by default, the edge of meaningful double-precision probabilities) and
//! capped windows are remembered, because they carry no usable magnitude
//! information: threshold tuning excludes them and checkpoint selection
//! refuses discriminators that produce any.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gan::Discriminator;
use crate::spectral::FeatureVector;
use crate::{Error, Result};

/// Default anomaly-score cap.
pub const DEFAULT_SCORE_CAP: f64 = 40.0;

/// Smallest threshold the tuner will return: the score of a window the
/// discriminator is exactly undecided about, `-log10(0.5)`.
pub fn minimum_threshold() -> f64 {
    -(0.5f64.log10())
}

/// One window's anomaly score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    /// `-log10(p)` capped; always in `[0, cap]`.
    pub value: f64,
    /// Whether the raw probability was too small for the cap.
    pub capped: bool,
}

/// Converts a discriminator probability into a capped anomaly score.
///
/// `p` is clamped into `[0, 1]`; any probability at or below `10^-cap` yields
/// exactly `cap` with the `capped` flag set.
pub fn score_from_probability(p: f64, cap: f64) -> DetectionScore {
    let floor = 10f64.powf(-cap);
    let p = if p.is_finite() { p.clamp(0.0, 1.0) } else { 0.0 };
    if p <= floor {
        DetectionScore {
            value: cap,
            capped: true,
        }
    } else {
        DetectionScore {
            value: (-p.log10()).clamp(0.0, cap),
            capped: false,
        }
    }
}

/// Scores one feature vector with the discriminator.
pub fn score(model: &Discriminator, feature: &FeatureVector, cap: f64) -> Result<DetectionScore> {
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "score cap must be positive, got {cap}"
        )));
    }
    Ok(score_from_probability(model.predict(feature)?, cap))
}

/// Scores a batch of feature vectors with the discriminator.
pub fn score_features(
    model: &Discriminator,
    features: &[FeatureVector],
    cap: f64,
) -> Result<Vec<DetectionScore>> {
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "score cap must be positive, got {cap}"
        )));
    }
    Ok(model
        .predict_features(features)?
        .into_iter()
        .map(|p| score_from_probability(p, cap))
        .collect())
}

/// Gaussian fit of healthy tuning scores and the alarm threshold derived from
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub schema_version: u32,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub std_dev: f64,
    /// `max(mean + 3 std_dev, -log10(0.5))`.
    pub threshold: f64,
    /// Number of scores the fit used.
    pub tuned_on: usize,
    /// Capped scores that were excluded from the fit.
    pub capped_excluded: usize,
}

/// Fits a Gaussian to healthy tuning scores and places the alarm threshold
/// three standard deviations above its mean, never below
/// [`minimum_threshold`].
///
/// Capped scores are excluded from the fit (with a warning), since their
/// magnitude is an artifact of the cap.
///
/// # Errors
///
/// * [`Error::AllScoresCapped`] if no usable score remains.
/// * [`Error::InvalidParameter`] if fewer than two usable scores remain.
pub fn tune_threshold(scores: &[DetectionScore]) -> Result<ThresholdModel> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no tuning scores".to_string()));
    }
    let usable: Vec<f64> = scores.iter().filter(|s| !s.capped).map(|s| s.value).collect();
    let capped_excluded = scores.len() - usable.len();
    if capped_excluded > 0 {
        log::warn!(
            "excluding {capped_excluded} of {} capped tuning scores from the threshold fit",
            scores.len()
        );
    }
    if usable.is_empty() {
        return Err(Error::AllScoresCapped { count: scores.len() });
    }
    if usable.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "threshold tuning needs at least 2 uncapped scores, got {}",
            usable.len()
        )));
    }

    let n = usable.len() as f64;
    let mean = usable.iter().sum::<f64>() / n;
    let variance = usable.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_dev = variance.sqrt();
    let threshold = (mean + 3.0 * std_dev).max(minimum_threshold());
    Ok(ThresholdModel {
        schema_version: 1,
        mean,
        std_dev,
        threshold,
        tuned_on: usable.len(),
        capped_excluded,
    })
}

/// Classifies each score: alarm exactly when the score exceeds the threshold.
pub fn classify(scores: &[DetectionScore], model: &ThresholdModel) -> Vec<bool> {
    scores.iter().map(|s| s.value > model.threshold).collect()
}

/// Saves a threshold model as pretty-printed JSON.
pub fn save_threshold(path: &Path, model: &ThresholdModel) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), model)?;
    Ok(())
}

/// Loads a threshold model saved by [`save_threshold`].
pub fn load_threshold(path: &Path) -> Result<ThresholdModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// One row of a per-window score dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub window_index: usize,
    pub case_label: String,
    pub score: f64,
    pub capped: bool,
    pub alarm: bool,
}

/// Writes score rows as CSV with a
/// `window_index,case_label,score,capped,alarm` header.
pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writeln!(writer, "window_index,case_label,score,capped,alarm").map_err(|e| Error::io(path, e))?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{}",
            row.window_index, row.case_label, row.score, row.capped, row.alarm
        )
        .map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uncapped(value: f64) -> DetectionScore {
        DetectionScore {
            value,
            capped: false,
        }
    }

    #[test]
    fn scores_are_negative_log_probabilities() {
        let s = score_from_probability(0.5, 40.0);
        assert!((s.value - std::f64::consts::LOG10_2).abs() < 1e-15);
        assert!(!s.capped);

        let certain = score_from_probability(1.0, 40.0);
        assert_eq!(certain.value, 0.0);
        assert!(!certain.capped);

        assert!((score_from_probability(1e-3, 40.0).value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_probabilities_hit_the_cap_exactly() {
        let s = score_from_probability(1e-45, 40.0);
        assert_eq!(s.value, 40.0);
        assert!(s.capped);

        let zero = score_from_probability(0.0, 40.0);
        assert_eq!(zero.value, 40.0);
        assert!(zero.capped);

        let other_cap = score_from_probability(1e-6, 5.0);
        assert_eq!(other_cap.value, 5.0);
        assert!(other_cap.capped);

        let at_cap_boundary = score_from_probability(1e-4, 4.0);
        assert_eq!(at_cap_boundary.value, 4.0);
    }

    #[test]
    fn threshold_is_three_sigma_above_the_mean() {
        let scores = [uncapped(0.1), uncapped(0.2), uncapped(0.3)];
        let model = tune_threshold(&scores).unwrap();
        assert!((model.mean - 0.2).abs() < 1e-15);
        assert!((model.std_dev - 0.1).abs() < 1e-12);
        assert!((model.threshold - 0.5).abs() < 1e-12);
        assert_eq!(model.tuned_on, 3);
        assert_eq!(model.capped_excluded, 0);
    }

    #[test]
    fn threshold_never_drops_below_the_coin_flip_score() {
        let scores = [uncapped(0.10), uncapped(0.11), uncapped(0.12)];
        let model = tune_threshold(&scores).unwrap();
        assert_eq!(model.threshold, minimum_threshold());
        assert!((model.threshold - std::f64::consts::LOG10_2).abs() < 1e-15);
    }

    #[test]
    fn capped_scores_are_excluded_from_the_fit() {
        let scores = [
            uncapped(0.1),
            DetectionScore { value: 40.0, capped: true },
            uncapped(0.3),
        ];
        let model = tune_threshold(&scores).unwrap();
        assert_eq!(model.tuned_on, 2);
        assert_eq!(model.capped_excluded, 1);
        assert!((model.mean - 0.2).abs() < 1e-15);
    }

    #[test]
    fn hopeless_tuning_sets_are_errors() {
        let all_capped = [DetectionScore { value: 40.0, capped: true }; 3];
        assert!(matches!(
            tune_threshold(&all_capped),
            Err(Error::AllScoresCapped { count: 3 })
        ));

        let one_usable = [uncapped(0.2), DetectionScore { value: 40.0, capped: true }];
        assert!(matches!(
            tune_threshold(&one_usable),
            Err(Error::InvalidParameter(_))
        ));

        assert!(matches!(tune_threshold(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn classification_is_strictly_above_threshold() {
        let model = ThresholdModel {
            schema_version: 1,
            mean: 0.2,
            std_dev: 0.1,
            threshold: 0.5,
            tuned_on: 3,
            capped_excluded: 0,
        };
        let alarms = classify(
            &[uncapped(0.49), uncapped(0.5), uncapped(0.51)],
            &model,
        );
        assert_eq!(alarms, vec![false, false, true]);
    }

    #[test]
    fn threshold_json_round_trips() {
        let model = tune_threshold(&[uncapped(0.1), uncapped(0.4), uncapped(0.2)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("threshold.json");
        save_threshold(&path, &model).unwrap();
        assert_eq!(load_threshold(&path).unwrap(), model);
    }

    #[test]
    fn score_csv_has_the_documented_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let rows = vec![ScoreRow {
            window_index: 3,
            case_label: "damage_0.70".to_string(),
            score: 1.25,
            capped: false,
            alarm: true,
        }];
        write_scores_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("window_index,case_label,score,capped,alarm"));
        assert_eq!(lines.next(), Some("3,damage_0.70,1.25,false,true"));
    }
}
