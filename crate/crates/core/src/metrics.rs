//! Detection quality metrics: ROC curves, AUC, and precision/recall/F1.
//!
//! Damage is the positive class throughout and higher anomaly scores mean
//! more damage-like. The ROC sweep visits every distinct score value, so tied
//! scores produce diagonal segments and the trapezoid AUC equals the pairwise
//! ranking statistic with half credit for ties.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// ROC curve swept over all distinct score values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` per threshold, starting at
    /// `(0, 0)` and ending at `(1, 1)`, both rates non-decreasing.
    pub points: Vec<(f64, f64)>,
    /// Trapezoid area under the curve.
    pub auc: f64,
}

/// Confusion counts and the derived precision/recall/F1, with damage as the
/// positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// True when no window was classified positive, in which case precision
    /// is reported as 0 rather than undefined.
    pub no_predicted_positives: bool,
}

fn validate_scores(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput(format!("no {what} scores")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("{what} scores"),
        });
    }
    Ok(())
}

/// Sweeps a threshold over all distinct score values and returns the ROC
/// curve with its trapezoid AUC.
pub fn roc(healthy_scores: &[f64], damage_scores: &[f64]) -> Result<RocCurve> {
    validate_scores(healthy_scores, "healthy")?;
    validate_scores(damage_scores, "damage")?;

    let nh = healthy_scores.len() as f64;
    let nd = damage_scores.len() as f64;
    let mut all: Vec<(f64, bool)> = healthy_scores
        .iter()
        .map(|&s| (s, false))
        .chain(damage_scores.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let value = all[i].0;
        while i < all.len() && all[i].0 == value {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / nh, tp as f64 / nd));
    }

    let auc = points
        .windows(2)
        .map(|pair| (pair[1].0 - pair[0].0) * (pair[0].1 + pair[1].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Probability that a random damage score outranks a random healthy score,
/// counting ties as half, computed as the literal average over all pairs.
pub fn pairwise_auc(healthy_scores: &[f64], damage_scores: &[f64]) -> Result<f64> {
    validate_scores(healthy_scores, "healthy")?;
    validate_scores(damage_scores, "damage")?;
    let mut credit = 0.0;
    for &d in damage_scores {
        for &h in healthy_scores {
            if d > h {
                credit += 1.0;
            } else if d == h {
                credit += 0.5;
            }
        }
    }
    Ok(credit / (healthy_scores.len() * damage_scores.len()) as f64)
}

/// Derives the confusion matrix and precision/recall/F1 from alarm decisions
/// on healthy and damage windows.
pub fn prf(healthy_alarms: &[bool], damage_alarms: &[bool]) -> Result<PrfReport> {
    if healthy_alarms.is_empty() || damage_alarms.is_empty() {
        return Err(Error::EmptyInput(
            "both healthy and damage alarm sets are required".to_string(),
        ));
    }
    let true_positives = damage_alarms.iter().filter(|&&a| a).count();
    let false_negatives = damage_alarms.len() - true_positives;
    let false_positives = healthy_alarms.iter().filter(|&&a| a).count();
    let true_negatives = healthy_alarms.len() - false_positives;

    let predicted_positives = true_positives + false_positives;
    let no_predicted_positives = predicted_positives == 0;
    let precision = if no_predicted_positives {
        0.0
    } else {
        true_positives as f64 / predicted_positives as f64
    };
    let recall = true_positives as f64 / damage_alarms.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrfReport {
        precision,
        recall,
        f1,
        true_positives,
        false_positives,
        true_negatives,
        false_negatives,
        no_predicted_positives,
    })
}

/// Writes a ROC curve as CSV with `fpr,tpr` columns.
pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writeln!(writer, "fpr,tpr").map_err(|e| Error::io(path, e))?;
    for &(fpr, tpr) in &curve.points {
        writeln!(writer, "{fpr},{tpr}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
