//! Success/precision plots and per-sequence rank histograms.

use crate::error::{Error, Result};
use crate::geometry::{center_distance, iou, BoundingBox};

/// Number of IoU thresholds on the success plot: `0, 0.01, …, 1.0`.
pub const AUC_THRESHOLDS: usize = 101;

/// Center-distance threshold for distance precision, in pixels.
pub const DP_THRESHOLD_PX: f64 = 20.0;

fn auc_threshold(k: usize) -> f64 {
    k as f64 / (AUC_THRESHOLDS - 1) as f64
}

fn check(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("tracking sequence"));
    }
    Ok(())
}

fn success_counts(pred: &[BoundingBox], gt: &[BoundingBox]) -> Vec<usize> {
    let ious: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect();
    (0..AUC_THRESHOLDS)
        .map(|k| {
            let tau = auc_threshold(k);
            ious.iter().filter(|&&v| v > tau).count()
        })
        .collect()
}

/// Success plot: `(threshold, fraction of frames with IoU > threshold)`.
pub fn success_curve(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<Vec<(f64, f64)>> {
    check(pred, gt)?;
    let n = pred.len() as f64;
    Ok(success_counts(pred, gt)
        .into_iter()
        .enumerate()
        .map(|(k, c)| (auc_threshold(k), c as f64 / n))
        .collect())
}

/// Mean of the success plot over its thresholds.
///
/// Counts are summed as integers and divided once, so the value is exactly
/// `hits / (101·frames)`.
pub fn success_auc(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<f64> {
    check(pred, gt)?;
    let hits: usize = success_counts(pred, gt).into_iter().sum();
    Ok(hits as f64 / (AUC_THRESHOLDS * pred.len()) as f64)
}

/// Precision plot over integer thresholds `0..=50` px (inclusive comparison).
pub fn precision_curve(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<Vec<(f64, f64)>> {
    check(pred, gt)?;
    let d: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| center_distance(p, g)).collect();
    let n = pred.len() as f64;
    Ok((0..=50)
        .map(|px| {
            let tau = px as f64;
            (tau, d.iter().filter(|&&x| x <= tau).count() as f64 / n)
        })
        .collect())
}

/// Fraction of frames whose center distance is at most 20 px.
pub fn precision_dp(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<f64> {
    check(pred, gt)?;
    let hits = pred
        .iter()
        .zip(gt)
        .filter(|(p, g)| center_distance(p, g) <= DP_THRESHOLD_PX)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Rank counts per tracker from a `tracker × sequence` score matrix.
///
/// Higher scores rank better; ties share the best rank (competition
/// ranking). `out[i][r - 1]` counts sequences where tracker `i` had rank `r`.
pub fn rank_histogram(scores: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let trackers = scores.len();
    if trackers == 0 {
        return Err(Error::Empty("score matrix"));
    }
    let sequences = scores[0].len();
    if let Some(row) = scores.iter().find(|r| r.len() != sequences) {
        return Err(Error::LengthMismatch {
            expected: sequences,
            actual: row.len(),
        });
    }
    if scores.iter().flatten().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut hist = vec![vec![0; trackers]; trackers];
    for v in 0..sequences {
        for i in 0..trackers {
            let better = (0..trackers).filter(|&j| scores[j][v] > scores[i][v]).count();
            hist[i][better] += 1;
        }
    }
    Ok(hist)
}
