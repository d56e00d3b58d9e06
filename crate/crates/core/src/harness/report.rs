//! Run and analysis reports.
//!
//! Reports are JSON documents with a `schema_version` field. Floats use the
//! shortest decimal representation that round-trips to the same `f64`, so a
//! report is byte-identical wherever it is produced from the same inputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    precision_dp, proposition1, rank_histogram, regret, success_auc, FrameLosses, LossMode,
    PropositionReport, Reference, RegretReport, SequenceLosses,
};
use crate::engine::{run, EngineConfig, Event, FrameDecision, FrameObservation, RunOutput};
use crate::error::{Error, Result};
use crate::feedback::AnchorRecord;
use crate::geometry::{loss, BoundingBox};
use crate::harness::trace::Trace;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerScores {
    pub auc: f64,
    pub dp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub regret_pseudo_gt: RegretReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret_gt: Option<RegretReport>,
    /// AAA's scores against ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aaa: Option<TrackerScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experts: Vec<TrackerScores>,
}

/// Everything `analyze` needs about one engine run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    pub sequence_id: String,
    pub n_experts: usize,
    pub frames: usize,
    pub theta: f64,
    pub seed: u64,
    pub mode: LossMode,
    pub anchors: Vec<AnchorRecord>,
    pub events: Vec<Event>,
    pub decisions: Vec<FrameDecision>,
    /// Per-frame losses against the feedback, frames `1..=u_Q`.
    pub pseudo_gt_losses: Vec<FrameLosses>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_losses: Option<Vec<FrameLosses>>,
    pub summary: RunSummary,
}

/// Losses of every expert and of the emitted box against `references`,
/// which cover a prefix of the run.
pub fn frame_losses(
    decisions: &[FrameDecision],
    observations: &[FrameObservation],
    references: &[BoundingBox],
    initial_box: &BoundingBox,
) -> Vec<FrameLosses> {
    references
        .iter()
        .zip(decisions.iter().zip(observations))
        .map(|(y, (d, obs))| {
            let experts = if obs.frame == 1 {
                vec![loss(initial_box, y); obs.boxes.len()]
            } else {
                obs.boxes.iter().map(|b| loss(b, y)).collect()
            };
            FrameLosses {
                experts,
                player: loss(&d.prediction, y),
            }
        })
        .collect()
}

/// Feedback boxes for frames `1..=u_Q`.
pub fn pseudo_ground_truth(out: &RunOutput) -> Vec<BoundingBox> {
    out.feedback_boxes().into_iter().map_while(|b| b).collect()
}

fn scores(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<TrackerScores> {
    Ok(TrackerScores {
        auc: success_auc(pred, gt)?,
        dp: precision_dp(pred, gt)?,
    })
}

/// Runs the engine over a trace and assembles its report.
pub fn run_report(
    trace: &Trace,
    config: EngineConfig,
    mode: LossMode,
    bound_constant: f64,
) -> Result<RunReport> {
    let h = &trace.header;
    let out = run(h.initial_box, h.template.clone(), &trace.frames, config)?;
    let anchor_frames = out.anchor_frames();
    let pseudo = pseudo_ground_truth(&out);
    let pseudo_gt_losses = frame_losses(&out.decisions, &trace.frames, &pseudo, &h.initial_box);
    let regret_pseudo_gt = regret(
        &out.decisions[..pseudo.len()],
        &pseudo_gt_losses,
        &anchor_frames,
        mode,
        Reference::PseudoGroundTruth,
        bound_constant,
    )?;

    let (gt_losses, regret_gt, aaa, experts) = match trace.ground_truth() {
        Some(gt) => {
            let l = frame_losses(&out.decisions, &trace.frames, &gt, &h.initial_box);
            let r = regret(&out.decisions, &l, &anchor_frames, mode, Reference::GroundTruth, bound_constant)?;
            let pred: Vec<BoundingBox> = out.decisions.iter().map(|d| d.prediction).collect();
            let aaa = scores(&pred, &gt)?;
            let experts = (0..h.n_experts)
                .map(|i| {
                    let boxes: Vec<BoundingBox> = trace
                        .frames
                        .iter()
                        .map(|o| if o.frame == 1 { h.initial_box } else { o.boxes[i] })
                        .collect();
                    scores(&boxes, &gt)
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(l), Some(r), Some(aaa), experts)
        }
        None => (None, None, None, Vec::new()),
    };

    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "run".into(),
        sequence_id: h.sequence_id.clone(),
        n_experts: h.n_experts,
        frames: trace.frames.len(),
        theta: config.theta,
        seed: config.seed,
        mode,
        anchors: out.anchors,
        events: out.events,
        decisions: out.decisions,
        pseudo_gt_losses,
        gt_losses,
        summary: RunSummary {
            regret_pseudo_gt,
            regret_gt,
            aaa,
            experts,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceAnalysis {
    pub sequence_id: String,
    pub seed: u64,
    pub theta: f64,
    pub regret_pseudo_gt: RegretReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret_gt: Option<RegretReport>,
}

/// Cross-sequence analysis over a set of run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub kind: String,
    pub bound_constant: f64,
    pub sequences: Vec<SequenceAnalysis>,
    pub mean_regret_pseudo_gt: f64,
    pub proposition_pseudo_gt: PropositionReport,
    /// Present when every run has ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposition_gt: Option<PropositionReport>,
    /// Rows are experts `0..N` followed by AAA; column `r` counts rank `r + 1`
    /// by AUC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_histogram: Option<Vec<Vec<usize>>>,
}

fn sequence_losses(id: &str, r: &RegretReport) -> SequenceLosses {
    SequenceLosses {
        id: id.to_string(),
        expert_losses: r.expert_losses.clone(),
        aaa_loss: r.player_loss,
    }
}

/// Recomputes regret with `bound_constant` and evaluates the
/// average-outperformance condition across the runs.
pub fn analyze(runs: &[RunReport], bound_constant: f64) -> Result<AnalysisReport> {
    if runs.is_empty() {
        return Err(Error::Empty("run reports"));
    }
    let n = runs[0].n_experts;
    let mut ids = BTreeMap::new();
    for r in runs {
        if r.schema_version != REPORT_SCHEMA_VERSION || r.kind != "run" {
            return Err(Error::InvalidArgument(format!(
                "{}: not a version {REPORT_SCHEMA_VERSION} run report",
                r.sequence_id
            )));
        }
        if r.n_experts != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: r.n_experts,
            });
        }
        if ids.insert((r.sequence_id.clone(), r.seed), ()).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate run for sequence {:?} with seed {}",
                r.sequence_id, r.seed
            )));
        }
    }

    let sequences = runs
        .par_iter()
        .map(|r| {
            let anchors: Vec<usize> = r.anchors.iter().map(|a| a.frame).collect();
            let k = r.pseudo_gt_losses.len();
            if k > r.decisions.len() {
                return Err(Error::Misaligned(format!("{}: more losses than decisions", r.sequence_id)));
            }
            let pseudo = regret(
                &r.decisions[..k],
                &r.pseudo_gt_losses,
                &anchors,
                r.mode,
                Reference::PseudoGroundTruth,
                bound_constant,
            )?;
            let gt = r
                .gt_losses
                .as_ref()
                .map(|l| regret(&r.decisions, l, &anchors, r.mode, Reference::GroundTruth, bound_constant))
                .transpose()?;
            Ok(SequenceAnalysis {
                sequence_id: r.sequence_id.clone(),
                seed: r.seed,
                theta: r.theta,
                regret_pseudo_gt: pseudo,
                regret_gt: gt,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let label = |s: &SequenceAnalysis| {
        if runs.iter().filter(|r| r.sequence_id == s.sequence_id).count() > 1 {
            format!("{}#{}", s.sequence_id, s.seed)
        } else {
            s.sequence_id.clone()
        }
    };
    let pseudo: Vec<SequenceLosses> = sequences
        .iter()
        .map(|s| sequence_losses(&label(s), &s.regret_pseudo_gt))
        .collect();
    let proposition_pseudo_gt = proposition1(&pseudo)?;
    let gt: Option<Vec<SequenceLosses>> = sequences
        .iter()
        .map(|s| s.regret_gt.as_ref().map(|r| sequence_losses(&label(s), r)))
        .collect();
    let proposition_gt = gt.map(|g| proposition1(&g)).transpose()?;

    let rank_histogram = if runs.iter().all(|r| r.summary.aaa.is_some() && r.summary.experts.len() == n) {
        let mut matrix: Vec<Vec<f64>> = (0..n)
            .map(|i| runs.iter().map(|r| r.summary.experts[i].auc).collect())
            .collect();
        matrix.push(runs.iter().map(|r| r.summary.aaa.as_ref().map_or(0.0, |a| a.auc)).collect());
        Some(rank_histogram(&matrix)?)
    } else {
        None
    };

    let mean_regret_pseudo_gt =
        sequences.iter().map(|s| s.regret_pseudo_gt.regret).sum::<f64>() / sequences.len() as f64;
    Ok(AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "analysis".into(),
        bound_constant,
        sequences,
        mean_regret_pseudo_gt,
        proposition_pseudo_gt,
        proposition_gt,
        rank_histogram,
    })
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place: readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Json(format!("{}: {e}", path.display())))
}
