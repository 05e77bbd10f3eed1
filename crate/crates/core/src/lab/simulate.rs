//! Scripted users driving the real session engine.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{assign_arm, Arm, ExperimentEvent};
use crate::par;
use crate::session::{Engine, Phase, SessionError, UserIntent};
use crate::task::TaskContent;
use crate::ExecMode;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("no tasks to simulate")]
    NoTasks,
    #[error("session {index}: {source}")]
    Session {
        index: usize,
        #[source]
        source: SessionError,
    },
}

/// User-behaviour model. Offer answers are drawn from
/// `accept_prob` / `deny_prob` / remainder (ignore, i.e. the user says "next").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub split: f64,
    pub salt: String,
    pub accept_prob: f64,
    pub deny_prob: f64,
    /// Chance of abandoning the task before each step advance.
    pub quit_prob: f64,
    /// Chance of giving a rating once the task is finished.
    pub rate_prob: f64,
    /// Rating means for A sessions with an accepted curiosity, A without, and B.
    pub rating_mean_accepted: f64,
    pub rating_mean_not_accepted: f64,
    pub rating_mean_b: f64,
    pub rating_sd: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            split: 0.711,
            salt: "curio-ab-v1".into(),
            accept_prob: 0.6,
            deny_prob: 0.22,
            quit_prob: 0.03,
            rate_prob: 0.7,
            rating_mean_accepted: 3.94,
            rating_mean_not_accepted: 3.55,
            rating_mean_b: 3.62,
            rating_sd: 1.2,
        }
    }
}

impl SimConfig {
    pub fn from_toml(s: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()
    }

    pub fn validate(self) -> Result<Self, SimError> {
        let probs = [
            ("split", self.split),
            ("accept_prob", self.accept_prob),
            ("deny_prob", self.deny_prob),
            ("quit_prob", self.quit_prob),
            ("rate_prob", self.rate_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if self.accept_prob + self.deny_prob > 1.0 + 1e-12 {
            return Err(SimError::Config("accept_prob + deny_prob exceeds 1".into()));
        }
        if self.rating_sd.is_nan() || self.rating_sd < 0.0 {
            return Err(SimError::Config("rating_sd must be non-negative".into()));
        }
        Ok(self)
    }
}

fn draw_rating(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> u8 {
    let x = if sd > 0.0 {
        Normal::new(mean, sd).expect("sd validated").sample(rng)
    } else {
        mean
    };
    x.round().clamp(1.0, 5.0) as u8
}

fn run_one(
    engine: &Engine,
    tasks: &[Arc<TaskContent>],
    cfg: &SimConfig,
    seed: u64,
    index: usize,
) -> Result<Vec<ExperimentEvent>, SessionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);

    let key = format!("sim-{seed:x}-{index:06}");
    let arm = assign_arm(&key, cfg.split, &cfg.salt);
    let task = tasks[rng.random_range(0..tasks.len())].clone();
    let mut s = engine.create_session(key, task, arm, rng.random())?;
    let mut events = Vec::new();
    let mut say = |s: &mut _, intent| -> Result<(), SessionError> {
        events.extend(engine.handle(s, intent)?.events);
        Ok(())
    };

    if rng.random_bool(0.5) {
        say(&mut s, UserIntent::Other)?;
    }
    say(&mut s, UserIntent::StartTask)?;
    let mut accepted = false;
    loop {
        match s.phase {
            Phase::OfferingCuriosity => {
                let r: f64 = rng.random();
                let intent = if r < cfg.accept_prob {
                    accepted = true;
                    UserIntent::Accept
                } else if r < cfg.accept_prob + cfg.deny_prob {
                    UserIntent::Deny
                } else {
                    UserIntent::Next
                };
                say(&mut s, intent)?;
            }
            Phase::Finished => {
                if rng.random_bool(cfg.rate_prob) {
                    let mean = match (arm, accepted) {
                        (Arm::A, true) => cfg.rating_mean_accepted,
                        (Arm::A, false) => cfg.rating_mean_not_accepted,
                        (Arm::B, _) => cfg.rating_mean_b,
                    };
                    say(&mut s, UserIntent::Rate(draw_rating(&mut rng, mean, cfg.rating_sd)))?;
                }
                break;
            }
            Phase::Rated => break,
            _ => {
                if rng.random_bool(cfg.quit_prob) {
                    break;
                }
                say(&mut s, UserIntent::Next)?;
            }
        }
    }
    Ok(events)
}

/// Runs `n_sessions` scripted sessions. Session `i` draws from its own
/// ChaCha stream, so the result is identical in every [`ExecMode`].
pub fn simulate(
    engine: &Engine,
    tasks: &[Arc<TaskContent>],
    cfg: &SimConfig,
    n_sessions: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<Vec<ExperimentEvent>, SimError> {
    let cfg = cfg.clone().validate()?;
    if tasks.is_empty() {
        return Err(SimError::NoTasks);
    }
    let per_session = par::map_indexed(mode, n_sessions, |i| run_one(engine, tasks, &cfg, seed, i));
    let mut out = Vec::new();
    for (index, r) in per_session.into_iter().enumerate() {
        out.extend(r.map_err(|source| SimError::Session { index, source })?);
    }
    Ok(out)
}
