use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Shrinkage setting of a sample.
///
/// `Uniform` is a fully periodic cell from the interior of a member.
/// `NonUniform` is a cell at the drying surface: periodic along the beam
/// axis (x), with the bottom raster row lying on the exposed surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Uniform,
    NonUniform,
}

/// Periodicity flags per raster axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Wrap {
    pub x: bool,
    pub y: bool,
}

impl Wrap {
    pub const NONE: Wrap = Wrap { x: false, y: false };
    pub const BOTH: Wrap = Wrap { x: true, y: true };
}

impl Scenario {
    pub fn wrap(self) -> Wrap {
        match self {
            Scenario::Uniform => Wrap::BOTH,
            Scenario::NonUniform => Wrap { x: true, y: false },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Uniform => "uniform",
            Scenario::NonUniform => "nonuniform",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown scenario `{0}` (expected `uniform` or `nonuniform`)")]
pub struct ParseScenarioError(String);

impl FromStr for Scenario {
    type Err = ParseScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Scenario::Uniform),
            "nonuniform" | "non-uniform" => Ok(Scenario::NonUniform),
            _ => Err(ParseScenarioError(s.to_string())),
        }
    }
}
