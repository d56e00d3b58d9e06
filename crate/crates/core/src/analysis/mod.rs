//! Regret and delay accounting, bound values, the average-outperformance
//! condition across sequence sets, and tracking metrics.

pub mod delay;
pub mod metrics;
pub mod proposition;
pub mod regret;

pub use delay::{partial_delay, total_delay};
pub use metrics::{
    precision_curve, precision_dp, rank_histogram, success_auc, success_curve, AUC_THRESHOLDS,
    DP_THRESHOLD_PX,
};
pub use proposition::{proposition1, PropositionReport, SequenceLosses};
pub use regret::{
    bound_theorem1, bound_theorem2, empirical_anchor_ratio, regret, FrameLosses, LossMode,
    Reference, RegretReport,
};
