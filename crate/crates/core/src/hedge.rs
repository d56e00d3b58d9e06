//! Exponential-weights machinery: segment losses, the multiplicative update,
//! the doubling-trick learning rate, and expert selection.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::FeedbackSegment;
use crate::geometry::{self, BoundingBox};

/// Probability distribution over experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates non-negativity, length ≥ 2, and unit sum within 1e-9.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::TooFewExperts(weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the heaviest expert; lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.0.iter().enumerate() {
            if *w > self.0[best] {
                best = i;
            }
        }
        best
    }
}

pub fn init_weights(n: usize) -> Result<WeightVector> {
    if n < 2 {
        return Err(Error::TooFewExperts(n));
    }
    Ok(WeightVector(vec![1.0 / n as f64; n]))
}

/// Cumulative per-expert loss over one feedback segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentLosses(pub Vec<f64>);

impl SegmentLosses {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Sums `loss(f_i^τ, y^τ)` over the segment for every expert.
///
/// `predictions[k][i]` is expert `i`'s box at frame `feedback.start + k`.
pub fn segment_losses(
    predictions: &[Vec<BoundingBox>],
    feedback: &FeedbackSegment,
) -> Result<SegmentLosses> {
    if predictions.len() != feedback.boxes.len() {
        return Err(Error::Misaligned(format!(
            "{} prediction frames for a feedback segment of {} frames",
            predictions.len(),
            feedback.boxes.len()
        )));
    }
    let n = predictions.first().map_or(0, Vec::len);
    let mut losses = vec![0.0; n];
    for (frame, y) in predictions.iter().zip(&feedback.boxes) {
        if frame.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: frame.len(),
            });
        }
        for (acc, f) in losses.iter_mut().zip(frame) {
            *acc += geometry::loss(f, y);
        }
    }
    Ok(SegmentLosses(losses))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Expert weights held in log space, normalized so that `logsumexp = 0`.
///
/// Long runs drive losing experts far below `f64::MIN_POSITIVE`; the log
/// representation keeps them recoverable when the environment changes.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights(Vec<f64>);

impl LogWeights {
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewExperts(n));
        }
        Ok(Self(vec![-(n as f64).ln(); n]))
    }

    pub fn from_weights(w: &WeightVector) -> Self {
        Self(w.0.iter().map(|x| x.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.0
    }

    pub fn to_weights(&self) -> WeightVector {
        let mut w: Vec<f64> = self.0.iter().map(|l| l.exp()).collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= sum);
        WeightVector(w)
    }

    /// Raises every weight to the power `factor` and renormalizes.
    ///
    /// With weights `∝ exp(−η·Λ_i)` for cumulative losses `Λ`, tempering by
    /// `η'/η` yields the weights `∝ exp(−η'·Λ_i)`.
    pub fn temper(&mut self, factor: f64) {
        let scaled: Vec<f64> = self.0.iter().map(|l| l * factor).collect();
        let z = log_sum_exp(&scaled);
        self.0 = scaled.into_iter().map(|x| x - z).collect();
    }

    /// Applies `w_i ← w_i·exp(−η·L_i) / Σ_j w_j·exp(−η·L_j)`.
    ///
    /// Returns `true` when the normalizer was not finite and the weights were
    /// reset to uniform instead.
    pub fn update(&mut self, losses: &SegmentLosses, eta: f64) -> Result<bool> {
        if losses.0.len() != self.0.len() {
            return Err(Error::LengthMismatch {
                expected: self.0.len(),
                actual: losses.0.len(),
            });
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {eta}")));
        }
        let shifted: Vec<f64> = self
            .0
            .iter()
            .zip(&losses.0)
            .map(|(lw, l)| lw - eta * l)
            .collect();
        let z = log_sum_exp(&shifted);
        if !z.is_finite() {
            *self = Self::uniform(self.0.len())?;
            return Ok(true);
        }
        self.0 = shifted.into_iter().map(|x| x - z).collect();
        Ok(false)
    }
}

/// One multiplicative-weights step computed in log space.
pub fn update_weights(w: &WeightVector, losses: &SegmentLosses, eta: f64) -> Result<WeightVector> {
    let mut lw = LogWeights::from_weights(w);
    lw.update(losses, eta)?;
    Ok(lw.to_weights())
}

/// Doubling-trick learning-rate state: `η = sqrt(ln N / Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningRateState {
    pub budget: u64,
    pub eta: f64,
    pub consumed: u64,
    ln_n: f64,
}

/// Record of a budget change made by [`LearningRateState::doubling_tick`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doubling {
    pub from: u64,
    pub to: u64,
    pub eta: f64,
}

impl LearningRateState {
    /// Starts with `Z = 1`, i.e. `η = sqrt(ln N)`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_budget(n, 1)
    }

    pub fn with_budget(n: usize, budget: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewExperts(n));
        }
        if budget == 0 {
            return Err(Error::InvalidArgument("budget must be positive".into()));
        }
        let ln_n = (n as f64).ln();
        Ok(Self {
            budget,
            eta: (ln_n / budget as f64).sqrt(),
            consumed: 0,
            ln_n,
        })
    }

    /// Doubles `Z` while `t + D_t ≥ Z`, then refreshes `η`.
    pub fn doubling_tick(&mut self, t: u64, partial_delay: u64) -> Option<Doubling> {
        let consumed = t.saturating_add(partial_delay);
        self.consumed = consumed;
        let from = self.budget;
        while consumed >= self.budget {
            self.budget = self.budget.saturating_mul(2);
            if self.budget == u64::MAX {
                break;
            }
        }
        self.eta = (self.ln_n / self.budget as f64).sqrt();
        (self.budget != from).then_some(Doubling {
            from,
            to: self.budget,
            eta: self.eta,
        })
    }
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one 64-bit word.
pub fn unit_draw<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF selection: the first index whose cumulative weight exceeds the draw.
pub fn select_expert<R: RngCore + ?Sized>(w: &WeightVector, rng: &mut R) -> usize {
    select_with_draw(w, unit_draw(rng))
}

pub(crate) fn select_with_draw(w: &WeightVector, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, wi) in w.0.iter().enumerate() {
        if *wi > 0.0 {
            cum += wi;
            last_positive = i;
            if u < cum {
                return i;
            }
        }
    }
    // cumulative sum fell short of 1 by rounding
    last_positive
}

/// `Σ_i w_i·ℓ_i`: the player's expected loss under stochastic selection.
pub fn expected_step_loss(w: &WeightVector, frame_losses: &[f64]) -> Result<f64> {
    if w.len() != frame_losses.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            actual: frame_losses.len(),
        });
    }
    Ok(w.0.iter().zip(frame_losses).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn naive_update(w: &[f64], l: &[f64], eta: f64) -> Vec<f64> {
        let raw: Vec<f64> = w.iter().zip(l).map(|(w, l)| w * (-eta * l).exp()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn temper_matches_cumulative_form() {
        let cum = [3.0, 7.5, 1.25];
        let mut lw = LogWeights::uniform(3).unwrap();
        lw.update(&SegmentLosses(cum.to_vec()), 0.4).unwrap();
        lw.temper(0.25 / 0.4);
        let direct = naive_update(&[1.0 / 3.0; 3], &cum, 0.25);
        for (a, b) in lw.to_weights().as_slice().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn init_cases() {
        assert_eq!(init_weights(4).unwrap().as_slice(), &[0.25; 4]);
        assert_eq!(init_weights(2).unwrap().as_slice(), &[0.5; 2]);
        assert_eq!(init_weights(1), Err(Error::TooFewExperts(1)));
    }

    #[test]
    fn segment_loss_cases() {
        let a = BoundingBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = BoundingBox::new(1.0, 1.0, 2.0, 2.0).unwrap();
        let seg = FeedbackSegment::from_boxes(5, vec![a]);
        let l = segment_losses(&[vec![a, b]], &seg).unwrap();
        assert_eq!(l.0[0], 0.0);
        assert!((l.0[1] - 34.0 / 63.0).abs() < 1e-12);

        // disjoint-adjacent (0,0,1,1) vs (2,0,1,1) has loss (1 + 1/3)/2 = 2/3
        let y = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let adj = BoundingBox::new(2.0, 0.0, 1.0, 1.0).unwrap();
        let seg = FeedbackSegment::from_boxes(2, vec![y, y, y]);
        let preds = vec![vec![y, y], vec![adj, y], vec![y, y]];
        let l = segment_losses(&preds, &seg).unwrap();
        assert!((l.0[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(l.0[1], 0.0);

        assert!(matches!(
            segment_losses(&preds[..2], &seg),
            Err(Error::Misaligned(_))
        ));
    }

    #[test]
    fn update_cases() {
        let w = wv(&[0.5, 0.5]);
        let out = update_weights(&w, &SegmentLosses(vec![0.0, 1.0]), 2f64.ln()).unwrap();
        assert!((out.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.as_slice()[1] - 1.0 / 3.0).abs() < 1e-12);

        let w = wv(&[0.2, 0.3, 0.5]);
        let out = update_weights(&w, &SegmentLosses(vec![4.0, 4.0, 4.0]), 0.7).unwrap();
        for (a, b) in out.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = wv(&[1.0 / 3.0; 3]);
        let out = update_weights(&w, &SegmentLosses(vec![0.0; 3]), 0.7).unwrap();
        for (a, b) in out.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(update_weights(&w, &SegmentLosses(vec![0.0; 3]), 0.0).is_err());
    }

    #[test]
    fn log_weights_survive_extreme_losses() {
        let mut lw = LogWeights::uniform(2).unwrap();
        for _ in 0..100 {
            lw.update(&SegmentLosses(vec![0.0, 1000.0]), 1.0).unwrap();
        }
        assert!(lw.log_values()[1].is_finite());
        // a long reversal brings the second expert back
        for _ in 0..200 {
            lw.update(&SegmentLosses(vec![1000.0, 0.0]), 1.0).unwrap();
        }
        assert!(lw.to_weights().as_slice()[1] > 0.99);
    }

    #[test]
    fn doubling_cases() {
        let mut s = LearningRateState::new(2).unwrap();
        assert!((s.eta - 2f64.ln().sqrt()).abs() < 1e-15);
        let d = s.doubling_tick(1, 0).unwrap();
        assert_eq!((d.from, d.to), (1, 2));
        assert!((s.eta - (2f64.ln() / 2.0).sqrt()).abs() < 1e-15);

        let mut s = LearningRateState::with_budget(3, 4).unwrap();
        s.doubling_tick(5, 2).unwrap();
        assert_eq!(s.budget, 8);

        let mut s = LearningRateState::with_budget(3, 8).unwrap();
        assert!(s.doubling_tick(2, 1).is_none());
        assert_eq!(s.budget, 8);
    }

    #[test]
    fn selection_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let point = wv(&[1.0, 0.0, 0.0]);
        for _ in 0..1000 {
            assert_eq!(select_expert(&point, &mut rng), 0);
        }
        let half = wv(&[0.5, 0.5]);
        let draws = 1_000_000;
        let zeros = (0..draws).filter(|_| select_expert(&half, &mut rng) == 0).count();
        let freq = zeros as f64 / draws as f64;
        assert!((0.497..=0.503).contains(&freq), "{freq}");

        let holes = wv(&[0.0, 0.4, 0.0, 0.6, 0.0]);
        for _ in 0..10_000 {
            let i = select_expert(&holes, &mut rng);
            assert!(i == 1 || i == 3);
        }
        // boundary: a draw exactly at the cumulative edge goes to the next index
        assert_eq!(select_with_draw(&half, 0.5), 1);
        assert_eq!(select_with_draw(&half, 0.0), 0);
        assert_eq!(select_with_draw(&holes, 0.999_999_999_999), 3);
    }

    #[test]
    fn selection_is_seeded() {
        let w = wv(&[0.2, 0.3, 0.5]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| select_expert(&w, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn expected_loss_cases() {
        assert_eq!(expected_step_loss(&wv(&[1.0, 0.0]), &[0.3, 0.9]).unwrap(), 0.3);
        assert_eq!(expected_step_loss(&wv(&[0.5, 0.5]), &[0.0, 1.0]).unwrap(), 0.5);
        assert!((expected_step_loss(&wv(&[0.25, 0.75]), &[0.2, 0.6]).unwrap() - 0.5).abs() < 1e-15);
        assert!(expected_step_loss(&wv(&[0.5, 0.5]), &[0.0]).is_err());
    }

    #[test]
    fn sampled_loss_converges_to_expectation() {
        let w = wv(&[0.1, 0.6, 0.3]);
        let losses = [0.9, 0.2, 0.5];
        let expect = expected_step_loss(&w, &losses).unwrap();
        let var: f64 = w
            .as_slice()
            .iter()
            .zip(losses)
            .map(|(p, l)| p * (l - expect).powi(2))
            .sum();
        let n = 20_000;
        let mut total = 0.0;
        for seed in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            total += losses[select_expert(&w, &mut rng)];
        }
        let mean = total / n as f64;
        assert!((mean - expect).abs() <= 3.0 * (var / n as f64).sqrt());
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01..1.0f64, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn update_matches_direct_formula(
            (w, l) in (2usize..8).prop_flat_map(|n| (simplex(n), prop::collection::vec(0.0..30.0f64, n))),
            eta in 0.001..1.0f64,
        ) {
            let out = update_weights(&wv(&w), &SegmentLosses(l.clone()), eta).unwrap();
            let want = naive_update(&w, &l, eta);
            let sum: f64 = out.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for (a, b) in out.as_slice().iter().zip(&want) {
                prop_assert!(*a >= 0.0);
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn lower_loss_gains_relative_weight(
            (w, l) in (2usize..6).prop_flat_map(|n| (simplex(n), prop::collection::vec(0.0..10.0f64, n))),
            eta in 0.01..1.0f64,
        ) {
            let out = update_weights(&wv(&w), &SegmentLosses(l.clone()), eta).unwrap();
            for i in 0..w.len() {
                for j in 0..w.len() {
                    if l[i] < l[j] {
                        prop_assert!(out.as_slice()[i] / w[i] > out.as_slice()[j] / w[j]);
                    }
                }
            }
        }

        #[test]
        fn scale_consistency(
            (w, l) in (2usize..6).prop_flat_map(|n| (simplex(n), prop::collection::vec(0.0..10.0f64, n))),
            eta in 0.01..1.0f64,
            c in 0.1..10.0f64,
        ) {
            let a = update_weights(&wv(&w), &SegmentLosses(l.clone()), eta).unwrap();
            let scaled: Vec<f64> = l.iter().map(|x| x * c).collect();
            let b = update_weights(&wv(&w), &SegmentLosses(scaled), eta / c).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn doubling_is_monotone(n in 2usize..10, steps in prop::collection::vec((1u64..50, 0u64..500), 1..30)) {
            let mut s = LearningRateState::new(n).unwrap();
            let (mut t, mut d) = (1u64, 0u64);
            let mut eta = s.eta;
            for (dt, dd) in steps {
                t += dt;
                d += dd;
                s.doubling_tick(t, d);
                prop_assert!(s.eta <= eta);
                prop_assert!(s.budget.is_power_of_two());
                prop_assert!(t + d < s.budget);
                eta = s.eta;
            }
        }
    }
}
