//! Interval-by-interval execution of the decision tree.

mod engine;
mod node;
mod policy;
mod trace;

pub use engine::{
    interval_count, run_episode, run_interval, EpisodeRun, IntervalInput, QualitySummary, SchedulerConfig,
    EXTRAPOLATION_BUDGET_SLOTS, HISTORY_FRAMES,
};
pub use node::{classify_scenario, format_path, Action, NodeId, Scenario};
pub use policy::{FixedPolicy, NodeOption, NodeView, OraclePolicy, Policy, QPolicy};
pub use trace::{
    effective_fps, interval_quality_csv, traces_from_jsonl, traces_to_jsonl, Decision, DecisionTrace, DisplayedSlot,
    FpsReport, Provenance,
};
