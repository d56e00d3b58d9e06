//! Adaptive aggregation of arbitrary online trackers.
//!
//! Each frame, `N` black-box trackers propose a box. The [`engine`] picks one
//! by sampling from Hedge weights, except on anchor frames, where an expert
//! matches the target template closely enough to be trusted outright. At
//! each anchor an offline path over the buffered frames yields delayed
//! feedback, which updates the weights.
//!
//! ```
//! use aaa_core::{harness, EngineConfig};
//!
//! let scn = harness::SyntheticScenario::new(200, 3, 50, 0.2, 7);
//! let trace = harness::generate_adversarial(&scn).unwrap();
//! let out = aaa_core::run(
//!     trace.header.initial_box,
//!     trace.header.template.clone(),
//!     &trace.frames,
//!     EngineConfig { theta: 0.69, seed: 7 },
//! )
//! .unwrap();
//! assert_eq!(out.decisions.len(), 200);
//! ```

pub mod analysis;
pub mod engine;
pub mod error;
pub mod feedback;
pub mod geometry;
pub mod harness;
pub mod hedge;

pub use analysis::{LossMode, PropositionReport, Reference, RegretReport};
pub use engine::{
    max_baseline, run, Aggregator, DecisionMode, EngineConfig, Event, FrameDecision,
    FrameObservation, RunOutput,
};
pub use error::{Error, Result};
pub use feedback::{AnchorRecord, FeedbackSegment};
pub use geometry::{BoundingBox, FeatureVector};
pub use harness::{RunReport, SyntheticScenario, Trace, TraceHeader};
pub use hedge::{LearningRateState, SegmentLosses, WeightVector};
