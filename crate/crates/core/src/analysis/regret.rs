use serde::{Deserialize, Serialize};

use crate::analysis::delay::total_delay;
use crate::engine::{DecisionMode, FrameDecision};
use crate::error::{Error, Result};
use crate::hedge::expected_step_loss;

/// How the player's loss is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// `Σ_i w_i ℓ_i` on sampled frames: seed independent.
    #[default]
    Expected,
    /// The realized loss of the box actually emitted.
    Sampled,
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected" => Ok(Self::Expected),
            "sampled" => Ok(Self::Sampled),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// Which reference the losses were computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The offline tracker's delayed feedback.
    PseudoGroundTruth,
    GroundTruth,
}

/// Losses of one frame against a chosen reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLosses {
    /// `ℓ(f_i^t, y^t)` for every expert.
    pub experts: Vec<f64>,
    /// `ℓ(p^t, y^t)` for the box the aggregator emitted.
    pub player: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub reference: Reference,
    pub mode: LossMode,
    /// Number of frames accounted.
    pub frames: usize,
    pub player_loss: f64,
    pub best_expert: usize,
    pub best_expert_loss: f64,
    pub expert_losses: Vec<f64>,
    pub regret: f64,
    pub anchors: Vec<usize>,
    pub total_delay: u64,
    pub anchor_ratio: f64,
    pub bound_constant: f64,
    pub bound_theorem1: f64,
    /// `None` when no anchor besides the first fired (`r = 0`).
    pub bound_theorem2: Option<f64>,
}

/// `c·sqrt((T + D)·ln N)`.
pub fn bound_theorem1(frames: usize, delay: u64, n: usize, c: f64) -> f64 {
    c * ((frames as f64 + delay as f64) * (n as f64).ln()).sqrt()
}

/// `c·sqrt(T·ln N / r)` for `r ∈ (0, 1]`.
pub fn bound_theorem2(frames: usize, r: f64, n: usize, c: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("anchor ratio must lie in (0, 1], got {r}")));
    }
    Ok(c * (frames as f64 * (n as f64).ln() / r).sqrt())
}

/// `(Q − 1) / (T − 1)`: the initial anchor is excluded.
pub fn empirical_anchor_ratio(anchor_count: usize, frames: usize) -> f64 {
    if frames <= 1 {
        return 0.0;
    }
    anchor_count.saturating_sub(1) as f64 / (frames - 1) as f64
}

/// Regret of the decisions against the best single expert in hindsight.
///
/// `losses[k]` belongs to `decisions[k]`; both may be a prefix of the run
/// (e.g. the frames covered by feedback). Anchors beyond the accounted
/// frames are ignored.
pub fn regret(
    decisions: &[FrameDecision],
    losses: &[FrameLosses],
    anchors: &[usize],
    mode: LossMode,
    reference: Reference,
    bound_constant: f64,
) -> Result<RegretReport> {
    if decisions.len() != losses.len() {
        return Err(Error::LengthMismatch {
            expected: decisions.len(),
            actual: losses.len(),
        });
    }
    let Some(first) = losses.first() else {
        return Err(Error::Empty("regret frames"));
    };
    let n = first.experts.len();
    let mut expert_losses = vec![0.0; n];
    let mut player_loss = 0.0;
    for (d, l) in decisions.iter().zip(losses) {
        if l.experts.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: l.experts.len(),
            });
        }
        for (acc, x) in expert_losses.iter_mut().zip(&l.experts) {
            *acc += x;
        }
        player_loss += match (mode, d.mode) {
            (LossMode::Expected, DecisionMode::Sampled) => {
                expected_step_loss(&d.weights_after, &l.experts)?
            }
            _ => l.player,
        };
    }
    let mut best = 0;
    for (i, x) in expert_losses.iter().enumerate() {
        if *x < expert_losses[best] {
            best = i;
        }
    }
    let frames = losses.len();
    let anchors: Vec<usize> = anchors.iter().copied().filter(|&a| a <= frames).collect();
    let delay = total_delay(&anchors)?;
    let r = empirical_anchor_ratio(anchors.len(), frames);
    Ok(RegretReport {
        reference,
        mode,
        frames,
        player_loss,
        best_expert: best,
        best_expert_loss: expert_losses[best],
        regret: player_loss - expert_losses[best],
        expert_losses,
        total_delay: delay,
        anchor_ratio: r,
        anchors,
        bound_constant,
        bound_theorem1: bound_theorem1(frames, delay, n, bound_constant),
        bound_theorem2: bound_theorem2(frames, r, n, bound_constant).ok(),
    })
}
