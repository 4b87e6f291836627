//! The embodied control loop and the planner boundary.

pub mod binding;
pub mod config;
pub mod heuristic;
pub mod oracle;
pub mod planner;
pub mod runner;

pub use binding::{bind_instance, route_area, Constraint, Route, RouteError};
pub use config::{ConfigError, InterfaceMode, RunConfig, ENV_OVERRIDES};
pub use heuristic::{HeuristicPlanner, TemplateTable};
pub use oracle::{visual_oracle_query, ReportEntry, VisualReport};
pub use planner::{Notice, PlanError, PlanRequest, Planner, RepairRequest, ScriptedPlanner};
pub use runner::{
    gated_visual_query, run_episode, run_task, LogEvent, RunCounters, StepOrigin, StepRecord, TaskOutcome, TaskRunLog,
};
