//! θ sweeps over a set of traces with ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{empirical_anchor_ratio, success_auc};
use crate::engine::{run, EngineConfig};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::harness::report::REPORT_SCHEMA_VERSION;
use crate::harness::trace::Trace;

pub const DEFAULT_GRID: &str = "0.60:0.90:0.01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    /// Mean over traces of AAA's success AUC against ground truth.
    pub auc: f64,
    /// Mean over traces of `(Q − 1)/(T − 1)`.
    pub anchor_ratio: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub sequences: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub best_theta: f64,
}

/// Parses `start:stop:step` (inclusive of `stop`). Points are rounded to
/// 1e-9 so `0.6 + k·0.01` lands on the decimal values.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("grid {text:?}: expected start:stop:step"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect();
    if let Some(t) = grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidThreshold(*t));
    }
    Ok(grid)
}

/// Runs the engine at every θ of the grid on every trace.
///
/// The argmax-AUC row is flagged; ties go to the smallest θ.
pub fn theta_sweep(traces: &[Trace], grid: &[f64], seed: u64) -> Result<SweepReport> {
    if traces.is_empty() {
        return Err(Error::Empty("traces"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("theta grid"));
    }
    let gts: Vec<Vec<BoundingBox>> = traces
        .iter()
        .map(|t| {
            t.ground_truth().ok_or_else(|| {
                Error::InvalidArgument(format!("trace {} has no ground truth", t.header.sequence_id))
            })
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..traces.len()).map(move |s| (g, s)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(g, s)| {
            let t = &traces[s];
            let out = run(
                t.header.initial_box,
                t.header.template.clone(),
                &t.frames,
                EngineConfig { theta: grid[g], seed },
            )?;
            let pred: Vec<BoundingBox> = out.decisions.iter().map(|d| d.prediction).collect();
            let auc = success_auc(&pred, &gts[s])?;
            Ok((auc, empirical_anchor_ratio(out.anchors.len(), t.frames.len())))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let m = traces.len() as f64;
    let mut rows: Vec<SweepRow> = cells
        .chunks(traces.len())
        .zip(grid)
        .map(|(c, &theta)| SweepRow {
            theta,
            auc: c.iter().map(|x| x.0).sum::<f64>() / m,
            anchor_ratio: c.iter().map(|x| x.1).sum::<f64>() / m,
            best: false,
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.auc > rows[best].auc {
            best = i;
        }
    }
    rows[best].best = true;
    Ok(SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "sweep".into(),
        seed,
        sequences: traces.iter().map(|t| t.header.sequence_id.clone()).collect(),
        best_theta: rows[best].theta,
        rows,
    })
}
