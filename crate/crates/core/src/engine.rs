//! The aggregation state machine.
//!
//! Frame 1 is the initial anchor with `p^1 = f_0`. On every later frame the
//! engine either detects an anchor (doubling tick, offline feedback, weight
//! update, `p^t = y^t`) or samples an expert from the current weights.
//!
//! Weights are kept as `w_i ∝ exp(−η·Λ_i)` over cumulative segment losses
//! `Λ_i`. Between doublings this is exactly the multiplicative update; when
//! `Z` doubles, the log-weights are rescaled to the new `η` before the
//! anchor's own update, so early rounds run at a large `η` do not dominate
//! the rest of the sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::delay::gap_delay;
use crate::error::{Error, Result};
use crate::feedback::{
    detect_anchor, most_similar, offline_path, AnchorRecord, ExpertFrame, FeedbackSegment,
};
use crate::geometry::{BoundingBox, FeatureVector};
use crate::hedge::{
    segment_losses, select_expert, Doubling, LearningRateState, LogWeights, SegmentLosses,
    WeightVector,
};

/// Configuration for one aggregation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub theta: f64,
    pub seed: u64,
}

/// One frame of input: expert boxes with aligned features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub frame: usize,
    pub boxes: Vec<BoundingBox>,
    pub features: Vec<FeatureVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionMode {
    Anchor,
    Sampled,
}

/// The aggregator's output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub frame: usize,
    pub prediction: BoundingBox,
    pub mode: DecisionMode,
    /// Sampled expert, or the anchor's most similar expert. `None` on frame 1.
    pub chosen_expert: Option<usize>,
    /// Weights in force after this frame; on sampled frames these are also
    /// the weights the selection used.
    pub weights_after: WeightVector,
}

/// Diagnostic events emitted alongside decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Anchor {
        frame: usize,
        q: usize,
        expert: usize,
        similarity: f64,
        segment_len: usize,
        path_cost: f64,
        total_delay: u64,
    },
    /// `Z` doubled; the weights were rescaled to the new `η`.
    Doubling {
        frame: usize,
        from: u64,
        to: u64,
        eta: f64,
    },
    /// The normalizer underflowed and the weights fell back to uniform.
    WeightReset {
        frame: usize,
    },
}

/// Everything produced when an anchor fires.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorUpdate {
    pub anchor: AnchorRecord,
    pub feedback: FeedbackSegment,
    pub losses: SegmentLosses,
    pub partial_delay: u64,
    pub doubling: Option<Doubling>,
    pub eta: f64,
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub decision: FrameDecision,
    pub update: Option<AnchorUpdate>,
}

/// Aggregator state for a single sequence. Not shareable across threads
/// while stepping; run one instance per sequence.
#[derive(Debug, Clone)]
pub struct Aggregator {
    n: usize,
    theta: f64,
    template: FeatureVector,
    weights: LogWeights,
    lr: LearningRateState,
    anchors: Vec<AnchorRecord>,
    total_delay: u64,
    pending: Vec<ExpertFrame>,
    start_box: BoundingBox,
    start_feature: FeatureVector,
    t: usize,
    rng: ChaCha8Rng,
    draws: u64,
}

impl Aggregator {
    pub fn new(
        initial_box: BoundingBox,
        template: FeatureVector,
        n: usize,
        config: EngineConfig,
    ) -> Result<Self> {
        if !(config.theta > 0.0 && config.theta < 1.0) {
            return Err(Error::InvalidThreshold(config.theta));
        }
        let weights = LogWeights::uniform(n)?;
        let lr = LearningRateState::new(n)?;
        let first = AnchorRecord {
            q: 1,
            frame: 1,
            bbox: initial_box,
            best_expert: None,
            similarity: 1.0,
        };
        Ok(Self {
            n,
            theta: config.theta,
            start_feature: template.clone(),
            template,
            weights,
            lr,
            anchors: vec![first],
            total_delay: 0,
            pending: Vec::new(),
            start_box: initial_box,
            t: 1,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            draws: 0,
        })
    }

    pub fn experts(&self) -> usize {
        self.n
    }

    pub fn frame(&self) -> usize {
        self.t
    }

    pub fn weights(&self) -> WeightVector {
        self.weights.to_weights()
    }

    pub fn learning_rate(&self) -> &LearningRateState {
        &self.lr
    }

    pub fn anchors(&self) -> &[AnchorRecord] {
        &self.anchors
    }

    /// Total delay accumulated over closed anchor gaps.
    pub fn total_delay(&self) -> u64 {
        self.total_delay
    }

    pub fn pending_frames(&self) -> usize {
        self.pending.len()
    }

    /// Number of random draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Decision for frame 1: the given initial box.
    pub fn initial_decision(&self) -> FrameDecision {
        FrameDecision {
            frame: 1,
            prediction: self.anchors[0].bbox,
            mode: DecisionMode::Anchor,
            chosen_expert: None,
            weights_after: self.weights(),
        }
    }

    fn check(&self, obs: &FrameObservation) -> Result<()> {
        if obs.frame != self.t + 1 {
            return Err(Error::FrameDiscontinuity {
                expected: self.t + 1,
                actual: obs.frame,
            });
        }
        if obs.boxes.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: obs.boxes.len(),
            });
        }
        if obs.features.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: obs.features.len(),
            });
        }
        Ok(())
    }

    /// Processes frame `t + 1`.
    pub fn step(&mut self, obs: &FrameObservation) -> Result<StepOutput> {
        self.check(obs)?;
        let detection = detect_anchor(&obs.boxes, &obs.features, &self.template, self.theta)?;
        let t = obs.frame;
        self.pending.push(ExpertFrame {
            boxes: obs.boxes.clone(),
            features: obs.features.clone(),
        });

        let Some(det) = detection else {
            let w = self.weights.to_weights();
            let i = select_expert(&w, &mut self.rng);
            self.draws += 1;
            self.t = t;
            return Ok(StepOutput {
                decision: FrameDecision {
                    frame: t,
                    prediction: obs.boxes[i],
                    mode: DecisionMode::Sampled,
                    chosen_expert: Some(i),
                    weights_after: w,
                },
                update: None,
            });
        };

        let anchor = AnchorRecord {
            q: self.anchors.len() + 1,
            frame: t,
            bbox: det.bbox,
            best_expert: Some(det.expert),
            similarity: det.similarity,
        };
        // at an anchor the open gap closes, so D_t is the total delay so far
        let gap = (t - self.anchors.last().map_or(1, |a| a.frame)) as u64;
        self.total_delay += gap_delay(gap);
        let dt = self.total_delay;
        let eta_before = self.lr.eta;
        let doubling = self.lr.doubling_tick(t as u64, dt);
        if doubling.is_some() {
            self.weights.temper(self.lr.eta / eta_before);
        }

        let feedback = offline_path(
            &self.pending,
            &self.start_box,
            &self.start_feature,
            &anchor,
            &self.template,
        )?;
        let predictions: Vec<Vec<BoundingBox>> =
            self.pending.iter().map(|f| f.boxes.clone()).collect();
        let losses = segment_losses(&predictions, &feedback)?;
        let reset = self.weights.update(&losses, self.lr.eta)?;

        self.start_box = det.bbox;
        self.start_feature = obs.features[det.expert].clone();
        self.pending.clear();
        self.anchors.push(anchor.clone());
        self.t = t;

        Ok(StepOutput {
            decision: FrameDecision {
                frame: t,
                prediction: det.bbox,
                mode: DecisionMode::Anchor,
                chosen_expert: Some(det.expert),
                weights_after: self.weights.to_weights(),
            },
            update: Some(AnchorUpdate {
                anchor,
                feedback,
                losses,
                partial_delay: dt,
                doubling,
                eta: self.lr.eta,
                reset,
            }),
        })
    }
}

/// Result of folding the engine over a whole trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub decisions: Vec<FrameDecision>,
    pub anchors: Vec<AnchorRecord>,
    pub feedback: Vec<FeedbackSegment>,
    pub events: Vec<Event>,
}

impl RunOutput {
    /// Anchor frames `u_1 < u_2 < …`.
    pub fn anchor_frames(&self) -> Vec<usize> {
        self.anchors.iter().map(|a| a.frame).collect()
    }

    /// Pseudo-ground-truth per frame (index 0 is frame 1). Frames after the
    /// last anchor have not received feedback yet and are `None`.
    pub fn feedback_boxes(&self) -> Vec<Option<BoundingBox>> {
        let mut out = vec![None; self.decisions.len()];
        if let Some(first) = out.first_mut() {
            *first = Some(self.anchors[0].bbox);
        }
        for seg in &self.feedback {
            for (frame, b) in seg.frames() {
                out[frame - 1] = Some(*b);
            }
        }
        out
    }
}

/// Runs the engine over observations for frames `1..=T`.
///
/// The observation for frame 1 is validated but otherwise only establishes
/// the start of the sequence; its decision is the initial box.
pub fn run(
    initial_box: BoundingBox,
    template: FeatureVector,
    observations: &[FrameObservation],
    config: EngineConfig,
) -> Result<RunOutput> {
    let Some(first) = observations.first() else {
        return Err(Error::Empty("trace"));
    };
    let n = first.boxes.len();
    let mut agg = Aggregator::new(initial_box, template, n, config)?;
    if first.frame != 1 {
        return Err(Error::FrameDiscontinuity {
            expected: 1,
            actual: first.frame,
        });
    }
    let mut decisions = Vec::with_capacity(observations.len());
    decisions.push(agg.initial_decision());
    let mut feedback = Vec::new();
    let mut events = Vec::new();
    for obs in &observations[1..] {
        let out = agg.step(obs)?;
        if let Some(up) = out.update {
            if let Some(d) = up.doubling {
                events.push(Event::Doubling {
                    frame: obs.frame,
                    from: d.from,
                    to: d.to,
                    eta: d.eta,
                });
            }
            events.push(Event::Anchor {
                frame: obs.frame,
                q: up.anchor.q,
                expert: up.anchor.best_expert.unwrap_or(0),
                similarity: up.anchor.similarity,
                segment_len: up.feedback.len(),
                path_cost: up.feedback.cost,
                total_delay: up.partial_delay,
            });
            if up.reset {
                events.push(Event::WeightReset { frame: obs.frame });
            }
            feedback.push(up.feedback);
        }
        decisions.push(out.decision);
    }
    Ok(RunOutput {
        decisions,
        anchors: agg.anchors,
        feedback,
        events,
    })
}

/// The "Max" baseline: each frame takes the box of the expert most similar
/// to the template. Frame 1 is the initial box, as for every tracker.
pub fn max_baseline(
    initial_box: BoundingBox,
    template: &FeatureVector,
    observations: &[FrameObservation],
) -> Result<Vec<BoundingBox>> {
    observations
        .iter()
        .map(|obs| {
            if obs.frame == 1 {
                Ok(initial_box)
            } else {
                most_similar(&obs.boxes, &obs.features, template).map(|d| d.bbox)
            }
        })
        .collect()
}
