use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefParams, MemoryMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceMode {
    /// Full current local state each step.
    Flow,
    /// Delta since episode start, with hints on failure.
    Diff,
}

impl FromStr for InterfaceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flow" => Ok(Self::Flow),
            "diff" => Ok(Self::Diff),
            other => Err(format!("unknown interface `{other}` (flow|diff)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{var}={value}: {reason}")]
pub struct ConfigError {
    pub var: String,
    pub value: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub interface: InterfaceMode,
    pub memory: MemoryMode,
    pub seed: u64,
    /// Step budget per task is `step_factor × |GT chain|`.
    pub step_factor: usize,
    pub replan_budget: usize,
    pub repair_budget: usize,
    pub belief: BeliefParams,
    pub visual_oracle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            interface: InterfaceMode::Diff,
            memory: MemoryMode::Full,
            seed: 0,
            step_factor: 4,
            replan_budget: 5,
            repair_budget: 3,
            belief: BeliefParams::default(),
            visual_oracle: true,
        }
    }
}

/// Environment variables that override budgets and belief parameters.
pub const ENV_OVERRIDES: &[&str] = &[
    "HWSIM_STEP_FACTOR",
    "HWSIM_REPLAN_BUDGET",
    "HWSIM_REPAIR_BUDGET",
    "HWSIM_RHO_ABSENT",
    "HWSIM_RHO_FAIL",
    "HWSIM_STALE_STEPS",
];

fn parse<T: FromStr>(var: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError {
        var: var.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn unit(var: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse(var, value)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(ConfigError {
            var: var.to_string(),
            value: value.to_string(),
            reason: "must be in [0, 1]".into(),
        });
    }
    Ok(v)
}

impl RunConfig {
    pub fn with_overrides(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        for var in ENV_OVERRIDES {
            let Some(v) = lookup(var) else { continue };
            match *var {
                "HWSIM_STEP_FACTOR" => self.step_factor = parse(var, &v)?,
                "HWSIM_REPLAN_BUDGET" => self.replan_budget = parse(var, &v)?,
                "HWSIM_REPAIR_BUDGET" => self.repair_budget = parse(var, &v)?,
                "HWSIM_RHO_ABSENT" => self.belief.rho_absent = unit(var, &v)?,
                "HWSIM_RHO_FAIL" => self.belief.rho_fail = unit(var, &v)?,
                "HWSIM_STALE_STEPS" => self.belief.stale_steps = parse(var, &v)?,
                _ => unreachable!(),
            }
        }
        Ok(self)
    }

    pub fn with_env(self) -> Result<Self, ConfigError> {
        self.with_overrides(|k| std::env::var(k).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let c = RunConfig::default()
            .with_overrides(|k| match k {
                "HWSIM_REPLAN_BUDGET" => Some("2".into()),
                "HWSIM_RHO_FAIL" => Some("0.1".into()),
                _ => None,
            })
            .unwrap();
        assert_eq!((c.replan_budget, c.belief.rho_fail, c.repair_budget), (2, 0.1, 3));
        let e = RunConfig::default()
            .with_overrides(|k| (k == "HWSIM_RHO_ABSENT").then(|| "1.5".into()))
            .unwrap_err();
        assert_eq!(e.var, "HWSIM_RHO_ABSENT");
        assert!(RunConfig::default()
            .with_overrides(|k| (k == "HWSIM_STEP_FACTOR").then(|| "x".into()))
            .is_err());
    }
}
