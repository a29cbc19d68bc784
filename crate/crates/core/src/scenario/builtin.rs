//! Scenarios shipped with the crate.

use super::config::ScenarioConfig;
use crate::error::{Error, Result};

const BUILTINS: &[(&str, &str, &str)] = &[
    (
        "exampleA",
        "50 MHz channel, four mixed-numerology subbands",
        include_str!("../../scenarios/exampleA.json"),
    ),
    (
        "exampleB",
        "20 MHz wideband carrier with narrowband carriers on either side",
        include_str!("../../scenarios/exampleB.json"),
    ),
    (
        "exampleC",
        "10 MHz carrier punctured by 60 kHz and 15 kHz symbols",
        include_str!("../../scenarios/exampleC.json"),
    ),
    (
        "exampleD",
        "10 MHz, subbands hopping in frequency every block",
        include_str!("../../scenarios/exampleD.json"),
    ),
];

/// Names and one-line descriptions.
pub fn builtin_scenarios() -> Vec<(&'static str, &'static str)> {
    BUILTINS.iter().map(|&(n, d, _)| (n, d)).collect()
}

pub fn builtin_json(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|b| b.0 == name).map(|b| b.2)
}

pub fn builtin_config(name: &str) -> Result<ScenarioConfig> {
    let text = builtin_json(name).ok_or_else(|| Error::config(format!("no builtin scenario `{name}`")))?;
    ScenarioConfig::from_json(text)
}
