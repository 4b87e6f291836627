//! Scoring by deterministic replay.

pub mod bootstrap;
pub mod metrics;
pub mod scorecard;
pub mod slots;

pub use bootstrap::{paired_bootstrap, BootstrapError, BootstrapResult};
pub use metrics::{action_f1, replay, score_actions, score_log, tcr_of, wsr_of, EvalError, Prf, Replay, TaskScore};
pub use scorecard::{aggregate_long_horizon, score_episode, score_ground_truth, PositionRow, ScoreCard};
pub use slots::{changed_slots, slot_table, slot_value, SlotRef};
