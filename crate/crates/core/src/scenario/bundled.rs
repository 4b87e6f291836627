//! Scenarios shipped with the crate.

use super::{compile_episode, parse_scenario, Episode};

pub const COFFEE: &str = include_str!("../../scenarios/coffee.toml");
pub const JUICE: &str = include_str!("../../scenarios/juice.toml");
pub const SALAD: &str = include_str!("../../scenarios/salad.toml");

/// `(name, text)` for every bundled scenario.
pub const ALL: &[(&str, &str)] = &[("coffee", COFFEE), ("juice", JUICE), ("salad", SALAD)];

/// Compiles a bundled scenario by name.
pub fn episode(name: &str) -> Option<Episode> {
    let (_, text) = ALL.iter().find(|(n, _)| *n == name)?;
    let s = parse_scenario(text).expect("bundled scenario parses");
    Some(compile_episode(&s).expect("bundled scenario compiles").0)
}
