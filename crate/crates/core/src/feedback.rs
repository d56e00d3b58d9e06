//! Anchor detection against the template and the offline shortest-path
//! tracker that turns buffered expert predictions into delayed feedback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalized_cosine, proximity, BoundingBox, FeatureVector};

/// Lower clamp applied to the edge-cost product before taking its log.
pub const COST_EPSILON: f64 = 1e-12;

/// A frame whose target location is fixed with high confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    /// 1-based anchor ordinal; `q = 1` is the initial frame.
    pub q: usize,
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    /// `None` only for the initial anchor, whose box is the given `f_0`.
    pub best_expert: Option<usize>,
    pub similarity: f64,
}

/// Pseudo-ground-truth boxes for frames `start..=end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSegment {
    pub start: usize,
    pub end: usize,
    pub boxes: Vec<BoundingBox>,
    /// Expert index per frame along the offline path; empty when the
    /// segment was not produced by [`offline_path`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experts: Vec<usize>,
    #[serde(default)]
    pub cost: f64,
}

impl FeedbackSegment {
    pub fn from_boxes(start: usize, boxes: Vec<BoundingBox>) -> Self {
        assert!(!boxes.is_empty(), "feedback segment needs at least one box");
        Self {
            start,
            end: start + boxes.len() - 1,
            boxes,
            experts: Vec::new(),
            cost: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = (usize, &BoundingBox)> {
        (self.start..=self.end).zip(&self.boxes)
    }
}

/// One frame of expert output: boxes and aligned features.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertFrame {
    pub boxes: Vec<BoundingBox>,
    pub features: Vec<FeatureVector>,
}

/// Winner of the template-similarity test on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorDetection {
    pub expert: usize,
    pub similarity: f64,
    pub bbox: BoundingBox,
}

/// The expert most similar to the template; lowest index on ties.
pub fn most_similar(
    boxes: &[BoundingBox],
    features: &[FeatureVector],
    template: &FeatureVector,
) -> Result<AnchorDetection> {
    if boxes.len() != features.len() {
        return Err(Error::LengthMismatch {
            expected: boxes.len(),
            actual: features.len(),
        });
    }
    if boxes.is_empty() {
        return Err(Error::Empty("expert boxes"));
    }
    let mut best: Option<AnchorDetection> = None;
    for (i, (b, f)) in boxes.iter().zip(features).enumerate() {
        let s = normalized_cosine(f, template)?;
        if best.is_none_or(|cur| s > cur.similarity) {
            best = Some(AnchorDetection {
                expert: i,
                similarity: s,
                bbox: *b,
            });
        }
    }
    Ok(best.expect("non-empty"))
}

/// Anchor test: fires when the best similarity strictly exceeds `theta`.
pub fn detect_anchor(
    boxes: &[BoundingBox],
    features: &[FeatureVector],
    template: &FeatureVector,
    theta: f64,
) -> Result<Option<AnchorDetection>> {
    let best = most_similar(boxes, features, template)?;
    Ok((best.similarity > theta).then_some(best))
}

/// `−log(P(prev, next)·V_E(prev, next)·V_T(next))`, clamped to stay finite.
pub fn edge_cost(
    prev: &BoundingBox,
    prev_feat: &FeatureVector,
    next: &BoundingBox,
    next_feat: &FeatureVector,
    template: &FeatureVector,
) -> Result<f64> {
    let p = proximity(prev, next);
    let ve = normalized_cosine(prev_feat, next_feat)?;
    let vt = normalized_cosine(next_feat, template)?;
    let product = (p * ve * vt).clamp(COST_EPSILON, 1.0);
    let c = -product.ln();
    Ok(if c <= 0.0 { 0.0 } else { c })
}

/// Back-pointer into the previous layer; `usize::MAX` marks the start node.
const START: usize = usize::MAX;

/// Globally minimum-cost path from the start node through one expert box per
/// interior frame, ending at the anchor box.
///
/// `frames` covers `(u_{q-1}, u_q]`; its last entry is the anchor frame,
/// of which only the anchor expert's box and feature are used. Among
/// equal-cost paths the lexicographically smallest expert sequence wins.
pub fn offline_path(
    frames: &[ExpertFrame],
    start_box: &BoundingBox,
    start_feature: &FeatureVector,
    anchor: &AnchorRecord,
    template: &FeatureVector,
) -> Result<FeedbackSegment> {
    let Some((terminal_frame, interior)) = frames.split_last() else {
        return Err(Error::Empty("offline path segment"));
    };
    let terminal_expert = anchor
        .best_expert
        .ok_or_else(|| Error::InvalidArgument("anchor has no expert".into()))?;
    if anchor.frame < frames.len() {
        return Err(Error::Misaligned(format!(
            "anchor frame {} precedes a {}-frame segment",
            anchor.frame,
            frames.len()
        )));
    }
    let n = terminal_frame.boxes.len();
    for f in frames {
        if f.boxes.len() != n || f.features.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: f.boxes.len().min(f.features.len()),
            });
        }
    }
    let terminal_feature = terminal_frame
        .features
        .get(terminal_expert)
        .ok_or(Error::LengthMismatch {
            expected: n,
            actual: terminal_expert,
        })?;
    let start = anchor.frame + 1 - frames.len();

    // cost[k][j]: best prefix cost ending at expert j on interior frame k
    let mut cost: Vec<Vec<f64>> = Vec::with_capacity(interior.len());
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(interior.len());
    for (k, frame) in interior.iter().enumerate() {
        let mut layer_cost = Vec::with_capacity(n);
        let mut layer_back = Vec::with_capacity(n);
        for j in 0..n {
            let (b, f) = (&frame.boxes[j], &frame.features[j]);
            if k == 0 {
                layer_cost.push(edge_cost(start_box, start_feature, b, f, template)?);
                layer_back.push(START);
                continue;
            }
            let prev = &interior[k - 1];
            let mut best = (f64::INFINITY, START);
            for i in 0..n {
                let c = cost[k - 1][i]
                    + edge_cost(&prev.boxes[i], &prev.features[i], b, f, template)?;
                if c < best.0 || (c == best.0 && lex_less(&back, k - 1, i, best.1)) {
                    best = (c, i);
                }
            }
            layer_cost.push(best.0);
            layer_back.push(best.1);
        }
        cost.push(layer_cost);
        back.push(layer_back);
    }

    let (total, last) = match interior.last() {
        None => (
            edge_cost(start_box, start_feature, &anchor.bbox, terminal_feature, template)?,
            START,
        ),
        Some(prev) => {
            let k = interior.len() - 1;
            let mut best = (f64::INFINITY, START);
            for i in 0..n {
                let c = cost[k][i]
                    + edge_cost(
                        &prev.boxes[i],
                        &prev.features[i],
                        &anchor.bbox,
                        terminal_feature,
                        template,
                    )?;
                if c < best.0 || (c == best.0 && lex_less(&back, k, i, best.1)) {
                    best = (c, i);
                }
            }
            best
        }
    };

    let mut experts = vec![0; interior.len()];
    let mut node = last;
    for k in (0..interior.len()).rev() {
        experts[k] = node;
        node = back[k][node];
    }
    let mut boxes: Vec<BoundingBox> = experts
        .iter()
        .zip(interior)
        .map(|(&j, f)| f.boxes[j])
        .collect();
    boxes.push(anchor.bbox);
    experts.push(terminal_expert);
    Ok(FeedbackSegment {
        start,
        end: anchor.frame,
        boxes,
        experts,
        cost: total,
    })
}

/// Whether the best prefix ending at `(layer, a)` is lexicographically
/// smaller than the one ending at `(layer, b)`.
fn lex_less(back: &[Vec<usize>], layer: usize, a: usize, b: usize) -> bool {
    if b == START {
        return true;
    }
    let (mut a, mut b) = (a, b);
    let mut first_diff = (a, b);
    let mut k = layer;
    loop {
        if a == b {
            break;
        }
        first_diff = (a, b);
        if k == 0 {
            break;
        }
        a = back[k][a];
        b = back[k][b];
        k -= 1;
    }
    first_diff.0 < first_diff.1
}
