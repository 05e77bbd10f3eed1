//! Experiment arms, event logs, aggregation and simulated users.

mod aggregate;
mod events;
mod simulate;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use aggregate::{aggregate, relative_improvement, AggregateReport, GroupRow, LabError, Table};
pub use events::{parse_events, EventKind, EventWriter, ExperimentEvent, TellSource};
pub use simulate::{simulate, SimConfig, SimError};

/// A: curiosities enabled. B: plain task guidance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::A => "A",
            Arm::B => "B",
        })
    }
}

impl std::str::FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Arm::A),
            "B" | "b" => Ok(Arm::B),
            other => Err(format!("unknown arm `{other}` (expected A or B)")),
        }
    }
}

/// Stable arm assignment: the top 53 bits of `sha256(salt || 0x00 || key)`
/// as a uniform number in [0, 1), compared against `split`.
pub fn assign_arm(session_key: &str, split: f64, salt: &str) -> Arm {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update([0u8]);
    h.update(session_key.as_bytes());
    let digest = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    let u = (u64::from_be_bytes(head) >> 11) as f64 / (1u64 << 53) as f64;
    if u < split {
        Arm::A
    } else {
        Arm::B
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        for i in 0..500 {
            let key = format!("k{i}");
            assert_eq!(assign_arm(&key, 1.0, "s"), Arm::A);
            assert_eq!(assign_arm(&key, 0.0, "s"), Arm::B);
        }
    }

    #[test]
    fn stable_and_salted() {
        assert_eq!(assign_arm("abc", 0.5, "x"), assign_arm("abc", 0.5, "x"));
        let differs = (0..200)
            .filter(|i| {
                let k = i.to_string();
                assign_arm(&k, 0.5, "x") != assign_arm(&k, 0.5, "y")
            })
            .count();
        assert!(differs > 50);
    }

    #[test]
    fn split_share() {
        let n = 100_000;
        let a = (0..n)
            .filter(|i| assign_arm(&format!("session-{i}"), 0.711, "curio-ab-v1") == Arm::A)
            .count();
        let share = a as f64 / n as f64;
        assert!((share - 0.711).abs() < 0.01, "{share}");
    }

    #[test]
    fn arm_parse() {
        assert_eq!("a".parse::<Arm>(), Ok(Arm::A));
        assert!("C".parse::<Arm>().is_err());
    }
}
