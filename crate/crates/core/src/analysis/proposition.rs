//! When does the aggregator beat every expert on average over a sequence set?
//!
//! With `i*` the expert of minimum total loss over the set, `S` the sequences
//! where `i*` is also the per-sequence best, and `δ` the smallest excess of
//! `i*` over the per-sequence best outside `S`, the aggregator's mean loss is
//! no worse than `i*`'s whenever `R̄ ≤ |V∖S|/|V|·δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative losses of one sequence against a common reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceLosses {
    pub id: String,
    pub expert_losses: Vec<f64>,
    pub aaa_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub sequences: usize,
    pub overall_best: usize,
    /// Ids of sequences on which the overall-best expert is a per-sequence best.
    pub s: Vec<String>,
    /// `None` encodes `+∞` (every sequence is in `S`).
    pub delta: Option<f64>,
    pub mean_regret: f64,
    pub rhs: f64,
    pub condition_holds: bool,
    pub aaa_mean_loss: f64,
    pub overall_best_mean_loss: f64,
    /// Whether the aggregator's mean loss is at most the overall-best expert's.
    pub outperforms: bool,
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

pub fn proposition1(per_sequence: &[SequenceLosses]) -> Result<PropositionReport> {
    let Some(first) = per_sequence.first() else {
        return Err(Error::Empty("sequence set"));
    };
    let n = first.expert_losses.len();
    if n == 0 {
        return Err(Error::Empty("expert losses"));
    }
    let mut totals = vec![0.0; n];
    for seq in per_sequence {
        if seq.expert_losses.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: seq.expert_losses.len(),
            });
        }
        for (acc, x) in totals.iter_mut().zip(&seq.expert_losses) {
            *acc += x;
        }
    }
    let star = argmin(&totals);
    let v = per_sequence.len() as f64;

    let mut s = Vec::new();
    let mut delta: Option<f64> = None;
    let mut regret_sum = 0.0;
    let mut aaa_sum = 0.0;
    let mut star_sum = 0.0;
    for seq in per_sequence {
        let best = seq.expert_losses[argmin(&seq.expert_losses)];
        let excess = seq.expert_losses[star] - best;
        if excess <= 0.0 {
            s.push(seq.id.clone());
        } else {
            delta = Some(delta.map_or(excess, |d| d.min(excess)));
        }
        regret_sum += seq.aaa_loss - best;
        aaa_sum += seq.aaa_loss;
        star_sum += seq.expert_losses[star];
    }
    let outside = per_sequence.len() - s.len();
    let mean_regret = regret_sum / v;
    let rhs = match delta {
        Some(d) => outside as f64 / v * d,
        None => 0.0,
    };
    let aaa_mean_loss = aaa_sum / v;
    let overall_best_mean_loss = star_sum / v;
    Ok(PropositionReport {
        sequences: per_sequence.len(),
        overall_best: star,
        s,
        delta,
        mean_regret,
        rhs,
        condition_holds: mean_regret <= rhs,
        aaa_mean_loss,
        overall_best_mean_loss,
        outperforms: aaa_mean_loss <= overall_best_mean_loss,
    })
}
