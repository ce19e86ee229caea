use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Training objective: supervised loss alone, plus unconditional MI between
/// subspaces, or plus conditional MI given each attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "base")]
    Base,
    #[serde(rename = "base+mi")]
    BaseMi,
    #[serde(rename = "base+cmi")]
    BaseCmi,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Base, Objective::BaseMi, Objective::BaseCmi];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Base => "base",
            Objective::BaseMi => "base+mi",
            Objective::BaseCmi => "base+cmi",
        }
    }

    pub fn is_adversarial(self) -> bool {
        !matches!(self, Objective::Base)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', ' '], "").as_str() {
            "base" => Ok(Objective::Base),
            "base+mi" | "basemi" | "mi" => Ok(Objective::BaseMi),
            "base+cmi" | "basecmi" | "cmi" => Ok(Objective::BaseCmi),
            other => Err(Error::InvalidArgument(format!("unknown objective `{other}`"))),
        }
    }
}
