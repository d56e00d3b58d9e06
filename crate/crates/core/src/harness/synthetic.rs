//! Synthetic adversarial traces.
//!
//! A latent target moves as a damped random walk. Time is cut into phases of
//! `switch_period` frames; in each phase exactly one expert tracks the target
//! with Gaussian jitter while every other expert sits at a drifting offset of
//! `drift_min..drift_max` box widths. The tracking expert changes at every
//! phase boundary, so the best expert over a window is not the best overall.
//!
//! Features are unit vectors built with a prescribed normalized cosine to
//! the template. On each frame the tracking expert "shows the target" with
//! probability `anchor_signal_rate`, landing strictly above `design_theta`;
//! otherwise it sits just below it. Drifting experts always stay at least
//! 0.06 below `design_theta`. Expert errors are mutually independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::FrameObservation;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, FeatureVector};
use crate::harness::trace::{Trace, TraceHeader};

fn default_theta() -> f64 {
    0.69
}
fn default_dim() -> usize {
    8
}
fn default_box() -> f64 {
    48.0
}
fn default_drift_min() -> f64 {
    1.5
}
fn default_drift_max() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub frames: usize,
    pub experts: usize,
    pub switch_period: usize,
    /// Jitter of the tracking expert, in pixels.
    pub noise_scale: f64,
    pub anchor_signal_rate: f64,
    pub seed: u64,
    #[serde(default = "default_theta")]
    pub design_theta: f64,
    #[serde(default = "default_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_box")]
    pub box_size: f64,
    #[serde(default = "default_drift_min")]
    pub drift_min: f64,
    #[serde(default = "default_drift_max")]
    pub drift_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_id: Option<String>,
}

impl SyntheticScenario {
    pub fn new(
        frames: usize,
        experts: usize,
        switch_period: usize,
        anchor_signal_rate: f64,
        seed: u64,
    ) -> Self {
        Self {
            frames,
            experts,
            switch_period,
            noise_scale: 2.0,
            anchor_signal_rate,
            seed,
            design_theta: default_theta(),
            feature_dim: default_dim(),
            box_size: default_box(),
            drift_min: default_drift_min(),
            drift_max: default_drift_max(),
            sequence_id: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("scenario: {m}")));
        if self.frames == 0 || self.switch_period == 0 || self.feature_dim < 2 {
            return bad("frames, switch_period must be positive and feature_dim ≥ 2");
        }
        if self.experts < 2 {
            return Err(Error::TooFewExperts(self.experts));
        }
        if !(self.noise_scale > 0.0 && self.box_size > 0.0) {
            return bad("noise_scale and box_size must be positive");
        }
        if !(self.anchor_signal_rate > 0.0 && self.anchor_signal_rate <= 1.0) {
            return bad("anchor_signal_rate must lie in (0, 1]");
        }
        if !(0.2..=0.95).contains(&self.design_theta) {
            return bad("design_theta must lie in [0.2, 0.95]");
        }
        if !(self.drift_min > 0.0 && self.drift_min <= self.drift_max) {
            return bad("need 0 < drift_min ≤ drift_max");
        }
        Ok(())
    }

    fn id(&self) -> String {
        self.sequence_id
            .clone()
            .unwrap_or_else(|| format!("synthetic-n{}-t{}-s{}", self.experts, self.frames, self.seed))
    }

    /// Index of the tracking expert for each frame (index 0 is frame 1).
    pub fn phase_of(&self, frame: usize) -> usize {
        (frame - 1) / self.switch_period
    }
}

/// Unit vector with normalized cosine `s` to the unit template.
fn feature_with_similarity(
    rng: &mut ChaCha8Rng,
    template: &[f64],
    s: f64,
) -> Result<FeatureVector> {
    let c = (2.0 * s - 1.0).clamp(-1.0, 1.0);
    let mut u: Vec<f64> = (0..template.len()).map(|_| rng.sample(StandardNormal)).collect();
    let proj: f64 = u.iter().zip(template).map(|(a, b)| a * b).sum();
    u.iter_mut().zip(template).for_each(|(a, b)| *a -= proj * b);
    let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let sin = (1.0 - c * c).max(0.0).sqrt();
    let v = template
        .iter()
        .zip(&u)
        .map(|(t, o)| c * t + sin * o / norm)
        .collect();
    FeatureVector::new(v)
}

/// Generates a trace; identical scenarios produce identical traces.
pub fn generate_adversarial(scn: &SyntheticScenario) -> Result<Trace> {
    scn.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let n = scn.experts;
    let size = scn.box_size;
    let theta = scn.design_theta;
    let jitter = Normal::new(0.0, scn.noise_scale).expect("positive scale");
    let size_jitter = Normal::new(0.0, scn.noise_scale / 4.0).expect("positive scale");
    let walk = Normal::new(0.0, 1.0).expect("unit");
    let drift_step = Normal::new(0.0, 0.05 * size).expect("positive scale");

    let mut template: Vec<f64> = (0..scn.feature_dim).map(|_| rng.sample(StandardNormal)).collect();
    let tn = template.iter().map(|a| a * a).sum::<f64>().sqrt();
    template.iter_mut().for_each(|a| *a /= tn);
    let template_fv = FeatureVector::new(template.clone())?;

    let (mut cx, mut cy) = (320.0, 240.0);
    let (mut vx, mut vy) = (0.0, 0.0);
    let gt_at = |cx: f64, cy: f64| BoundingBox::new(cx - size / 2.0, cy - size / 2.0, size, size);
    let initial = gt_at(cx, cy)?;

    let mut tracker = rng.random_range(0..n);
    let mut phase = 0;
    let mut offsets: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut frames = Vec::with_capacity(scn.frames);
    frames.push(FrameObservation {
        frame: 1,
        boxes: vec![initial; n],
        features: vec![template_fv.clone(); n],
        gt: Some(initial),
    });

    for t in 2..=scn.frames {
        vx = 0.9 * vx + walk.sample(&mut rng);
        vy = 0.9 * vy + walk.sample(&mut rng);
        cx += vx;
        cy += vy;
        if !(100.0..=540.0).contains(&cx) {
            vx = -vx;
            cx = cx.clamp(100.0, 540.0);
        }
        if !(100.0..=380.0).contains(&cy) {
            vy = -vy;
            cy = cy.clamp(100.0, 380.0);
        }
        let gt = gt_at(cx, cy)?;

        let p = scn.phase_of(t);
        if p != phase {
            phase = p;
            let next = rng.random_range(0..n - 1);
            tracker = if next >= tracker { next + 1 } else { next };
        }

        let mut boxes = Vec::with_capacity(n);
        let mut features = Vec::with_capacity(n);
        for (i, offset) in offsets.iter_mut().enumerate() {
            let (dx, dy, s) = if i == tracker {
                *offset = None;
                let s = if rng.random::<f64>() < scn.anchor_signal_rate {
                    rng.random_range(theta + 0.25 * (1.0 - theta)..1.0 - 0.05 * (1.0 - theta))
                } else {
                    rng.random_range((theta - 0.12).max(0.05)..theta - 0.005)
                };
                (jitter.sample(&mut rng), jitter.sample(&mut rng), s)
            } else {
                let (ox, oy) = match *offset {
                    None => {
                        let angle = rng.random_range(0.0..std::f64::consts::TAU);
                        let r = rng.random_range(scn.drift_min..=scn.drift_max) * size;
                        (r * angle.cos(), r * angle.sin())
                    }
                    Some((ox, oy)) => {
                        let (ox, oy) = (ox + drift_step.sample(&mut rng), oy + drift_step.sample(&mut rng));
                        let r = ox.hypot(oy);
                        let clamped = r.clamp(scn.drift_min * size, scn.drift_max * size);
                        (ox * clamped / r, oy * clamped / r)
                    }
                };
                *offset = Some((ox, oy));
                let s = rng.random_range(0.45 * theta..theta - 0.06);
                (ox + jitter.sample(&mut rng), oy + jitter.sample(&mut rng), s)
            };
            let w = (size + size_jitter.sample(&mut rng)).max(size / 2.0);
            let h = (size + size_jitter.sample(&mut rng)).max(size / 2.0);
            boxes.push(BoundingBox::new(cx + dx - w / 2.0, cy + dy - h / 2.0, w, h)?);
            features.push(feature_with_similarity(&mut rng, &template, s)?);
        }
        frames.push(FrameObservation {
            frame: t,
            boxes,
            features,
            gt: Some(gt),
        });
    }

    let mut header = TraceHeader::new(scn.id(), n, template_fv, initial);
    header.frames = Some(scn.frames);
    Ok(Trace { header, frames })
}
