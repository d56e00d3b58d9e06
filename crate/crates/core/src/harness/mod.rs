//! Trace I/O, synthetic traces, reports, sweeps and multi-seed experiments.

pub mod experiment;
pub mod report;
pub mod sweep;
pub mod synthetic;
pub mod trace;

pub use experiment::{loglog_slope, seed_sweep, synthetic_regret, SeedSummary};
pub use report::{
    analyze, frame_losses, pseudo_ground_truth, read_json, run_report, to_json_bytes,
    write_atomic, write_json_atomic, AnalysisReport, RunReport, RunSummary, SequenceAnalysis, TrackerScores,
    REPORT_SCHEMA_VERSION,
};
pub use sweep::{parse_grid, theta_sweep, SweepReport, SweepRow, DEFAULT_GRID};
pub use synthetic::{generate_adversarial, SyntheticScenario};
pub use trace::{load_trace, read_trace, Trace, TraceHeader, TraceReader, TRACE_FORMAT, TRACE_VERSION};
