//! Offer/backoff policy: whether to offer a curiosity at the current step.
//!
//! Guards run in this order, the first failing one giving the reason:
//! quota, opt-out, long step, then the step conjunction
//! (not step 1, exactly `k` steps after the last offer, not the
//! second-to-last step).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Minimum spacing between offers, in steps.
    pub k: u32,
    /// Step at which the first offer may land.
    pub first_offer_step: u32,
    /// Steps with at least this many words never carry an offer.
    pub long_step_words: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            k: 6,
            first_offer_step: 2,
            long_step_words: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("task must have at least one step")]
    NoSteps,
    #[error("no offer is pending at step {0}")]
    NoPendingOffer(u32),
    #[error("step {step} out of range 1..={n_steps}")]
    StepOutOfRange { step: u32, n_steps: u32 },
}

/// `(n_steps // k) + 1`.
pub fn max_questions(n_steps: u32, k: u32) -> u32 {
    n_steps / k.max(1) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyState {
    pub n_steps: u32,
    /// 1-based.
    pub curr_step: u32,
    pub last_fact_step: i64,
    pub questions_asked: u32,
    pub k: u32,
    pub user_opted_out: bool,
    pub first_offer_step: u32,
    pub long_step_words: usize,
    /// Step at which an offer is awaiting the user's answer.
    pub pending_offer: Option<u32>,
}

impl PolicyState {
    /// Fresh state at step 1. `last_fact_step` starts at
    /// `first_offer_step - k` so the first offer lands on `first_offer_step`.
    pub fn new(n_steps: u32, cfg: PolicyConfig) -> Result<Self, PolicyError> {
        if cfg.k == 0 {
            return Err(PolicyError::ZeroK);
        }
        if n_steps == 0 {
            return Err(PolicyError::NoSteps);
        }
        Ok(PolicyState {
            n_steps,
            curr_step: 1,
            last_fact_step: i64::from(cfg.first_offer_step) - i64::from(cfg.k),
            questions_asked: 0,
            k: cfg.k,
            user_opted_out: false,
            first_offer_step: cfg.first_offer_step,
            long_step_words: cfg.long_step_words,
            pending_offer: None,
        })
    }

    pub fn max_questions(&self) -> u32 {
        max_questions(self.n_steps, self.k)
    }

    pub fn at_step(mut self, step: u32) -> Result<Self, PolicyError> {
        if step == 0 || step > self.n_steps {
            return Err(PolicyError::StepOutOfRange {
                step,
                n_steps: self.n_steps,
            });
        }
        self.curr_step = step;
        Ok(self)
    }

    /// Marks that an offer was just made at the current step.
    pub fn offer_made(mut self) -> Self {
        self.pending_offer = Some(self.curr_step);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfferReason {
    QuotaExhausted,
    FirstStep,
    Spacing,
    LastStepGuard,
    LongStep,
    OptedOut,
    Ok,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferDecision {
    pub ask_curiosity: bool,
    pub reason: OfferReason,
}

impl OfferDecision {
    fn deny(reason: OfferReason) -> Self {
        OfferDecision {
            ask_curiosity: false,
            reason,
        }
    }
}

pub fn should_offer(s: &PolicyState, step_word_count: usize) -> OfferDecision {
    use OfferReason::*;
    if s.questions_asked >= s.max_questions() {
        return OfferDecision::deny(QuotaExhausted);
    }
    if s.user_opted_out {
        return OfferDecision::deny(OptedOut);
    }
    if step_word_count >= s.long_step_words {
        return OfferDecision::deny(LongStep);
    }
    let curr = i64::from(s.curr_step);
    if s.curr_step == 1 {
        return OfferDecision::deny(FirstStep);
    }
    if curr != s.last_fact_step + i64::from(s.k) || s.last_fact_step > curr {
        return OfferDecision::deny(Spacing);
    }
    if curr == i64::from(s.n_steps) - 1 {
        return OfferDecision::deny(LastStepGuard);
    }
    OfferDecision {
        ask_curiosity: true,
        reason: Ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfferOutcome {
    Accepted,
    Denied,
    Ignored,
}

/// Applies the user's answer to the pending offer. Denying or ignoring opts
/// the user out for the rest of the session.
pub fn record_outcome(s: &PolicyState, action: OfferOutcome) -> Result<PolicyState, PolicyError> {
    if s.pending_offer != Some(s.curr_step) {
        return Err(PolicyError::NoPendingOffer(s.curr_step));
    }
    let mut next = *s;
    next.pending_offer = None;
    next.questions_asked += 1;
    next.last_fact_step = i64::from(s.curr_step);
    if matches!(action, OfferOutcome::Denied | OfferOutcome::Ignored) {
        next.user_opted_out = true;
    }
    Ok(next)
}
