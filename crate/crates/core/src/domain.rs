use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Task domain shared by curiosities and tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cooking,
    Diy,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Cooking, Domain::Diy];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Cooking => "cooking",
            Domain::Diy => "diy",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown domain `{0}` (expected `cooking` or `diy`)")]
pub struct UnknownDomain(pub String);

impl FromStr for Domain {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cooking" => Ok(Domain::Cooking),
            "diy" => Ok(Domain::Diy),
            _ => Err(UnknownDomain(s.to_string())),
        }
    }
}

/// Number of Unicode-whitespace separated tokens.
///
/// Used for curiosity lengths and step lengths alike so that the long-step
/// guard and the dataset statistics agree on what a word is.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
