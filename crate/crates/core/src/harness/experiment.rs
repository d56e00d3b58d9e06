//! Seeded Monte Carlo experiments on synthetic traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{regret, LossMode, Reference, RegretReport};
use crate::engine::{run, EngineConfig};
use crate::error::{Error, Result};
use crate::harness::report::{frame_losses, pseudo_ground_truth};
use crate::harness::synthetic::{generate_adversarial, SyntheticScenario};

/// Regret against the feedback for one generated trace. The engine is
/// seeded with the scenario seed.
pub fn synthetic_regret(
    scn: &SyntheticScenario,
    theta: f64,
    mode: LossMode,
    bound_constant: f64,
) -> Result<RegretReport> {
    let trace = generate_adversarial(scn)?;
    let h = &trace.header;
    let out = run(
        h.initial_box,
        h.template.clone(),
        &trace.frames,
        EngineConfig { theta, seed: scn.seed },
    )?;
    let pseudo = pseudo_ground_truth(&out);
    let losses = frame_losses(&out.decisions, &trace.frames, &pseudo, &h.initial_box);
    regret(
        &out.decisions[..pseudo.len()],
        &losses,
        &out.anchor_frames(),
        mode,
        Reference::PseudoGroundTruth,
        bound_constant,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub frames: usize,
    pub seeds: usize,
    pub mean_regret: f64,
    pub mean_total_delay: f64,
    pub mean_anchor_ratio: f64,
}

/// Runs `base` once per seed (in parallel) and averages the results.
pub fn seed_sweep(
    base: &SyntheticScenario,
    seeds: &[u64],
    theta: f64,
    mode: LossMode,
    bound_constant: f64,
) -> Result<(SeedSummary, Vec<RegretReport>)> {
    if seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    let reports = seeds
        .par_iter()
        .map(|&seed| {
            let mut scn = base.clone();
            scn.seed = seed;
            synthetic_regret(&scn, theta, mode, bound_constant)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = reports.len() as f64;
    let mean = |f: fn(&RegretReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    let summary = SeedSummary {
        frames: base.frames,
        seeds: seeds.len(),
        mean_regret: mean(|r| r.regret),
        mean_total_delay: mean(|r| r.total_delay as f64),
        mean_anchor_ratio: mean(|r| r.anchor_ratio),
    };
    Ok((summary, reports))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("need two or more positive points".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}
