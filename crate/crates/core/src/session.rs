//! Dialogue state machine: greeting, task start, the step loop with its
//! curiosity sub-flow, finish and rating.
//!
//! ```text
//! greeting --other--> task_started --start--> in_step <--next--+
//!     \--------------start---------------------^   |           |
//!                                    offer? -> offering --accept--> telling
//!                                                  |--deny--> in_step
//!                                                  '--anything else: ignored, then handled as in_step
//! in_step/telling --next on last step / finish--> finished --rate--> rated
//! ```
//!
//! [`Engine::handle`] is transactional: on error the session is untouched.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::domain::Domain;
use crate::lab::{Arm, EventKind, ExperimentEvent, TellSource};
use crate::phrasing::{render_curiosity, render_offer, PhraseBank};
use crate::policy::{record_outcome, should_offer, OfferOutcome, PolicyError, PolicyState};
use crate::semantic::{build_index, match_semantic, CuriosityIndex, EmbeddingProvider, SemanticError};
use crate::store::CuriosityCollection;
use crate::task::TaskContent;
use crate::text::{Lexicon, MatchResult, TextError, TextMatcher};
use crate::ExecMode;

/// Sessions with fewer turns than this are excluded from experiment aggregates.
pub const MIN_QUALIFYING_TURNS: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("intent `{intent}` is not allowed in phase `{phase}`")]
    IllegalIntent { phase: Phase, intent: String },
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("rating must be between 1 and 5, got {0}")]
    InvalidRating(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Greeting,
    TaskStarted,
    InStep,
    OfferingCuriosity,
    TellingCuriosity,
    Finished,
    Rated,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Greeting => "greeting",
            Phase::TaskStarted => "task_started",
            Phase::InStep => "in_step",
            Phase::OfferingCuriosity => "offering_curiosity",
            Phase::TellingCuriosity => "telling_curiosity",
            Phase::Finished => "finished",
            Phase::Rated => "rated",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum UserIntent {
    StartTask,
    Next,
    Accept,
    Deny,
    Other,
    Finish,
    Rate(u8),
}

impl std::fmt::Display for UserIntent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UserIntent::StartTask => f.write_str("start_task"),
            UserIntent::Next => f.write_str("next"),
            UserIntent::Accept => f.write_str("accept"),
            UserIntent::Deny => f.write_str("deny"),
            UserIntent::Other => f.write_str("other"),
            UserIntent::Finish => f.write_str("finish"),
            UserIntent::Rate(v) => write!(f, "rate({v})"),
        }
    }
}

const ACCEPT_WORDS: &[&str] = &[
    "yes", "yeah", "yep", "yup", "sure", "ok", "okay", "please", "absolutely", "alright",
];
const DENY_WORDS: &[&str] = &["no", "nope", "nah", "skip"];
const RATING_FILLER: &[&str] = &[
    "rate", "rating", "star", "stars", "i", "give", "it", "a", "out", "of", "5", "would", "say",
];
const NUMBER_WORDS: &[&str] = &["one", "two", "three", "four", "five"];

impl UserIntent {
    /// Fixed keyword vocabulary.
    pub fn parse(text: &str) -> Self {
        let lowered = text.to_lowercase();
        let tokens: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let Some(first) = tokens.first().copied() else {
            return UserIntent::Other;
        };

        let rating = |t: &str| -> Option<u8> {
            t.parse::<u8>()
                .ok()
                .or_else(|| NUMBER_WORDS.iter().position(|w| *w == t).map(|p| p as u8 + 1))
                .filter(|v| (1..=5).contains(v))
        };
        if let Some(v) = tokens.iter().find_map(|t| rating(t)) {
            if tokens
                .iter()
                .all(|t| rating(t).is_some() || RATING_FILLER.contains(t))
            {
                return UserIntent::Rate(v);
            }
        }
        let has = |w: &str| tokens.contains(&w);
        if DENY_WORDS.contains(&first) {
            return UserIntent::Deny;
        }
        if ACCEPT_WORDS.contains(&first) || lowered.contains("tell me") {
            return UserIntent::Accept;
        }
        if has("next") || has("continue") {
            return UserIntent::Next;
        }
        if has("finish") || has("done") || has("stop") || has("quit") || has("exit") {
            return UserIntent::Finish;
        }
        if has("start") || has("begin") {
            return UserIntent::StartTask;
        }
        UserIntent::Other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telling {
    pub curiosity_id: String,
    pub source: TellSource,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub task: Arc<TaskContent>,
    pub phase: Phase,
    pub policy: PolicyState,
    /// Task-level semantic matches, best first. Empty for arm B.
    pub curiosity_pool: Vec<MatchResult>,
    pub pool_cursor: usize,
    pub told_ids: BTreeSet<String>,
    pub tellings: Vec<Telling>,
    pub arm: Arm,
    pub turn_count: u32,
    pub rating: Option<u8>,
    pub seed: u64,
    pub offers_made: u32,
}

impl SessionState {
    pub fn offer_pending(&self) -> bool {
        self.phase == Phase::OfferingCuriosity
    }

    /// Current step, or `None` before the task has started.
    pub fn step(&self) -> Option<u32> {
        match self.phase {
            Phase::Greeting | Phase::TaskStarted => None,
            _ => Some(self.policy.curr_step),
        }
    }

    pub fn is_short(&self) -> bool {
        self.turn_count < MIN_QUALIFYING_TURNS
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.session_id.clone(),
            task_id: self.task.id.clone(),
            title: self.task.title.clone(),
            arm: self.arm,
            phase: self.phase,
            step: self.step(),
            n_steps: self.task.n_steps as u32,
            offer_pending: self.offer_pending(),
            turn_count: self.turn_count,
            offers_made: self.offers_made,
            told: self.tellings.iter().map(|t| t.curiosity_id.clone()).collect(),
            rating: self.rating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub task_id: String,
    pub title: String,
    pub arm: Arm,
    pub phase: Phase,
    pub step: Option<u32>,
    pub n_steps: u32,
    pub offer_pending: bool,
    pub turn_count: u32,
    pub offers_made: u32,
    pub told: Vec<String>,
    pub rating: Option<u8>,
}

/// Result of one handled utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub response: String,
    pub events: Vec<ExperimentEvent>,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Shared, read-only dialogue resources. Cheap to share across threads.
pub struct Engine {
    collection: Arc<CuriosityCollection>,
    text: TextMatcher,
    indexes: BTreeMap<Domain, CuriosityIndex>,
    provider: Arc<dyn EmbeddingProvider>,
    phrases: PhraseBank,
    cfg: EngineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("curiosities", &self.collection.len())
            .field("provider", &self.provider.id())
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl Engine {
    /// Builds the text matcher and one semantic index per non-empty domain.
    pub fn new(
        collection: Arc<CuriosityCollection>,
        lexicon: Lexicon,
        phrases: PhraseBank,
        provider: Arc<dyn EmbeddingProvider>,
        cfg: EngineConfig,
    ) -> Result<Self, SessionError> {
        cfg.semantic.validate()?;
        let text = TextMatcher::new(lexicon, &collection, ExecMode::default());
        let mut indexes = BTreeMap::new();
        for domain in Domain::ALL {
            if collection.domain_len(domain) > 0 {
                indexes.insert(domain, build_index(&collection, domain, provider.as_ref())?);
            }
        }
        Ok(Engine {
            collection,
            text,
            indexes,
            provider,
            phrases,
            cfg,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn collection(&self) -> &CuriosityCollection {
        &self.collection
    }

    pub fn phrases(&self) -> &PhraseBank {
        &self.phrases
    }

    pub fn create_session(
        &self,
        session_id: impl Into<String>,
        task: Arc<TaskContent>,
        arm: Arm,
        seed: u64,
    ) -> Result<SessionState, SessionError> {
        let policy = PolicyState::new(task.n_steps as u32, self.cfg.policy)?;
        let curiosity_pool = match (arm, self.indexes.get(&task.domain)) {
            (Arm::A, Some(idx)) => match_semantic(
                &task,
                idx,
                &self.collection,
                self.cfg.semantic,
                self.provider.as_ref(),
            )?,
            _ => Vec::new(),
        };
        Ok(SessionState {
            session_id: session_id.into(),
            task,
            phase: Phase::Greeting,
            policy,
            curiosity_pool,
            pool_cursor: 0,
            told_ids: BTreeSet::new(),
            tellings: Vec::new(),
            arm,
            turn_count: 0,
            rating: None,
            seed,
            offers_made: 0,
        })
    }

    pub fn greeting(&self, s: &SessionState) -> String {
        format!(
            "Hi! I'm excited to help you with {}. Say 'start' when you're ready.",
            s.task.title
        )
    }

    /// `Step <i>. <text>`, followed by the offer question while one is pending.
    pub fn step_response(&self, s: &SessionState) -> String {
        let i = s.policy.curr_step;
        let text = &s.task.steps[i as usize - 1];
        let mut out = format!("Step {i}. {text}");
        if s.offer_pending() {
            out.push(' ');
            out.push_str(render_offer(&self.phrases, s.seed.wrapping_add(u64::from(s.offers_made - 1))));
        }
        out
    }

    fn start_response(&self, s: &SessionState) -> String {
        let first = &s.task.steps[0];
        match s.task.domain {
            Domain::Cooking => format!(
                "{} will be yummy. Step 1: {} To keep going with this recipe, say 'next'.",
                s.task.title, first
            ),
            Domain::Diy => format!(
                "Let's get started with {}. Step 1: {} To keep going with this task, say 'next'.",
                s.task.title, first
            ),
        }
    }

    fn rating_prompt(&self, s: &SessionState) -> String {
        format!(
            "You've completed {}! On a scale of 1 to 5, how would you rate this conversation?",
            s.task.title
        )
    }

    fn legal(phase: Phase, intent: UserIntent) -> bool {
        use UserIntent::*;
        match phase {
            Phase::Greeting | Phase::TaskStarted => matches!(intent, StartTask | Other),
            Phase::InStep | Phase::TellingCuriosity => matches!(intent, Next | Finish | Other),
            Phase::OfferingCuriosity => !matches!(intent, Rate(_) | StartTask),
            Phase::Finished => matches!(intent, Rate(_) | Other),
            Phase::Rated => false,
        }
    }

    /// Applies one user intent. On error `s` is left unchanged.
    pub fn handle(&self, s: &mut SessionState, intent: UserIntent) -> Result<Turn, SessionError> {
        if !Self::legal(s.phase, intent) {
            return Err(SessionError::IllegalIntent {
                phase: s.phase,
                intent: intent.to_string(),
            });
        }
        if let UserIntent::Rate(v) = intent {
            if !(1..=5).contains(&v) {
                return Err(SessionError::InvalidRating(v));
            }
        }
        let mut next = s.clone();
        next.turn_count += 1;
        let mut events = vec![];
        let ts = u64::from(next.turn_count);
        let mut emit = |st: &SessionState, kind: EventKind| {
            events.push(ExperimentEvent {
                session_id: st.session_id.clone(),
                arm: st.arm,
                ts,
                kind,
            })
        };
        emit(&next, EventKind::Turn);

        let response = match (next.phase, intent) {
            (Phase::Greeting | Phase::TaskStarted, UserIntent::StartTask) => {
                next.phase = Phase::InStep;
                self.start_response(&next)
            }
            (Phase::Greeting | Phase::TaskStarted, _) => {
                next.phase = Phase::TaskStarted;
                format!("Sure, I found {}. Would you like to 'start'?", next.task.title)
            }
            (Phase::OfferingCuriosity, UserIntent::Accept) => {
                next.policy = record_outcome(&next.policy, OfferOutcome::Accepted)?;
                emit(&next, EventKind::Accept);
                next.phase = Phase::TellingCuriosity;
                match self.select_curiosity(&mut next)? {
                    Some(telling) => {
                        let curiosity = self
                            .collection
                            .get(&telling.curiosity_id)
                            .expect("selected from collection");
                        let seed = next.seed.wrapping_add(next.tellings.len() as u64);
                        let rendered = render_curiosity(curiosity, &self.phrases, seed, true);
                        emit(
                            &next,
                            EventKind::Tell {
                                method: telling.source.method(),
                                curiosity_id: telling.curiosity_id.clone(),
                                fallback: telling.source == TellSource::Fallback,
                            },
                        );
                        next.told_ids.insert(telling.curiosity_id.clone());
                        next.tellings.push(telling);
                        rendered.text
                    }
                    None => format!(
                        "Sorry, I'm out of fun facts for this one. {}",
                        self.phrases.continuation()
                    ),
                }
            }
            (Phase::OfferingCuriosity, UserIntent::Deny) => {
                next.policy = record_outcome(&next.policy, OfferOutcome::Denied)?;
                emit(&next, EventKind::Deny);
                next.phase = Phase::InStep;
                self.cfg.session.deny_ack.clone()
            }
            (Phase::OfferingCuriosity, other) => {
                next.policy = record_outcome(&next.policy, OfferOutcome::Ignored)?;
                emit(&next, EventKind::Ignore);
                next.phase = Phase::InStep;
                self.step_intent(&mut next, other, &mut emit)?
            }
            (Phase::InStep | Phase::TellingCuriosity, other) => {
                self.step_intent(&mut next, other, &mut emit)?
            }
            (Phase::Finished, UserIntent::Rate(v)) => {
                next.rating = Some(v);
                next.phase = Phase::Rated;
                emit(&next, EventKind::Rating { value: v });
                "Thanks for your feedback! Goodbye.".to_string()
            }
            (Phase::Finished, _) => self.rating_prompt(&next),
            (Phase::Rated, _) => unreachable!("rejected by legality check"),
        };
        *s = next;
        Ok(Turn { response, events })
    }

    fn step_intent(
        &self,
        s: &mut SessionState,
        intent: UserIntent,
        emit: &mut impl FnMut(&SessionState, EventKind),
    ) -> Result<String, SessionError> {
        match intent {
            UserIntent::Next if (s.policy.curr_step as usize) < s.task.n_steps => {
                let step = s.policy.curr_step + 1;
                s.policy = s.policy.at_step(step)?;
                s.phase = Phase::InStep;
                if s.arm == Arm::A {
                    let words = s.task.step_word_counts[step as usize - 1];
                    if should_offer(&s.policy, words).ask_curiosity {
                        s.policy = s.policy.offer_made();
                        s.offers_made += 1;
                        s.phase = Phase::OfferingCuriosity;
                        emit(s, EventKind::Offer);
                    }
                }
                Ok(self.step_response(s))
            }
            UserIntent::Next | UserIntent::Finish => {
                s.phase = Phase::Finished;
                Ok(self.rating_prompt(s))
            }
            _ => {
                s.phase = Phase::InStep;
                Ok(format!(
                    "We're on step {} of {}. To keep going, say 'next'.",
                    s.policy.curr_step, s.task.n_steps
                ))
            }
        }
    }

    /// Semantic pool first (round-robin), then positive step-level text
    /// matches, then a seeded pick among the remaining domain curiosities.
    fn select_curiosity(&self, s: &mut SessionState) -> Result<Option<Telling>, SessionError> {
        let step = s.policy.curr_step;
        let pool_len = s.curiosity_pool.len();
        for offset in 0..pool_len {
            let i = (s.pool_cursor + offset) % pool_len;
            let id = &s.curiosity_pool[i].curiosity_id;
            if !s.told_ids.contains(id) {
                s.pool_cursor = (i + 1) % pool_len;
                return Ok(Some(Telling {
                    curiosity_id: id.clone(),
                    source: TellSource::Semantic,
                    step,
                }));
            }
        }

        let domain = s.task.domain;
        if self.collection.domain_len(domain) == 0 {
            return Ok(None);
        }
        let step_text = &s.task.steps[step as usize - 1];
        let matches = self.text.rank(step_text, domain, self.cfg.session.text_top_m.max(1))?;
        if let Some(m) = matches
            .iter()
            .find(|m| m.score > 0.0 && !s.told_ids.contains(&m.curiosity_id))
        {
            return Ok(Some(Telling {
                curiosity_id: m.curiosity_id.clone(),
                source: TellSource::Text,
                step,
            }));
        }

        let remaining: Vec<&str> = self
            .collection
            .in_domain(domain)
            .map(|c| c.id.as_str())
            .filter(|id| !s.told_ids.contains(*id))
            .collect();
        if remaining.is_empty() {
            return Ok(None);
        }
        let pick = mix(s.seed, s.tellings.len() as u64 + 1) % remaining.len() as u64;
        Ok(Some(Telling {
            curiosity_id: remaining[pick as usize].to_string(),
            source: TellSource::Fallback,
            step,
        }))
    }
}

/// One recorded conversation: how it was created and what the user said.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub task_id: String,
    pub arm: Arm,
    pub seed: u64,
    pub greeting: String,
    pub turns: Vec<TranscriptTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub utterance: String,
    /// Response text, or `error: ...` for rejected intents.
    pub response: String,
}

fn turn_text(r: Result<Turn, SessionError>) -> String {
    match r {
        Ok(t) => t.response,
        Err(e) => format!("error: {e}"),
    }
}

impl Engine {
    /// Runs `utterances` through a fresh session and records every response.
    pub fn record(
        &self,
        session_id: &str,
        task: Arc<TaskContent>,
        arm: Arm,
        seed: u64,
        utterances: &[&str],
    ) -> Result<Transcript, SessionError> {
        let task_id = task.id.clone();
        let mut s = self.create_session(session_id, task, arm, seed)?;
        let greeting = self.greeting(&s);
        let turns = utterances
            .iter()
            .map(|u| TranscriptTurn {
                utterance: u.to_string(),
                response: turn_text(self.handle(&mut s, UserIntent::parse(u))),
            })
            .collect();
        Ok(Transcript {
            session_id: session_id.to_string(),
            task_id,
            arm,
            seed,
            greeting,
            turns,
        })
    }

    /// Re-runs a transcript and returns the responses produced now.
    pub fn replay(
        &self,
        t: &Transcript,
        tasks: &BTreeMap<String, Arc<TaskContent>>,
    ) -> Result<Transcript, SessionError> {
        let task = tasks
            .get(&t.task_id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownTask(t.task_id.clone()))?;
        let utterances: Vec<&str> = t.turns.iter().map(|x| x.utterance.as_str()).collect();
        self.record(&t.session_id, task, t.arm, t.seed, &utterances)
    }
}

/// Append-only journal entry used to rebuild sessions after a restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalRecord {
    Create {
        session_id: String,
        task_id: String,
        arm: Arm,
        seed: u64,
    },
    Intent {
        session_id: String,
        intent: UserIntent,
    },
}

impl Engine {
    /// Rebuilds sessions from journal records. Intents that were rejected
    /// originally are rejected again and leave no trace.
    pub fn recover(
        &self,
        records: &[JournalRecord],
        tasks: &BTreeMap<String, Arc<TaskContent>>,
    ) -> Result<BTreeMap<String, SessionState>, SessionError> {
        let mut sessions = BTreeMap::new();
        for rec in records {
            match rec {
                JournalRecord::Create {
                    session_id,
                    task_id,
                    arm,
                    seed,
                } => {
                    let task = tasks
                        .get(task_id)
                        .cloned()
                        .ok_or_else(|| SessionError::UnknownTask(task_id.clone()))?;
                    let s = self.create_session(session_id.clone(), task, *arm, *seed)?;
                    sessions.insert(session_id.clone(), s);
                }
                JournalRecord::Intent { session_id, intent } => {
                    if let Some(s) = sessions.get_mut(session_id) {
                        let _ = self.handle(s, *intent);
                    }
                }
            }
        }
        Ok(sessions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::StubProvider;
    use crate::store::Curiosity;
    use crate::task::{extract, RawTask};
    use crate::text::MatchMethod;

    fn tacos() -> Arc<TaskContent> {
        Arc::new(
            extract(&RawTask {
                id: "chicken-tacos".into(),
                domain: Domain::Cooking,
                title: "Chicken Tacos".into(),
                steps: vec![
                    "Preheat oven to 375°F.".into(),
                    "Brush butter onto both sides of the tortillas.".into(),
                    "Fold the tortillas over the oven rack.".into(),
                    "Bake until crisp.".into(),
                    "Shred the chicken.".into(),
                    "Fill the shells and serve.".into(),
                ],
                ingredients: Some(vec!["tortillas".into(), "butter".into(), "chicken".into()]),
                extras: Default::default(),
            })
            .unwrap(),
        )
    }

    fn engine() -> Engine {
        let items = vec![
            Curiosity::new("tortilla", Domain::Cooking, "Food", "The word tortilla comes from the Spanish word torta which means round cake.").unwrap(),
            Curiosity::new("butter", Domain::Cooking, "Food", "It takes about 21 pounds of milk to make one pound of butter.").unwrap(),
            Curiosity::new("chicken", Domain::Cooking, "Meat", "There are more chickens on Earth than people.").unwrap(),
            Curiosity::new("honey", Domain::Cooking, "Food", "Honey never spoils.").unwrap(),
            Curiosity::new("hammer", Domain::Diy, "Tools", "The claw hammer dates back to Roman times.").unwrap(),
        ];
        Engine::new(
            Arc::new(CuriosityCollection::new(items).unwrap()),
            Lexicon::bundled(),
            PhraseBank::bundled(),
            Arc::new(StubProvider::new()),
            EngineConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn intent_vocabulary() {
        assert_eq!(UserIntent::parse("Next."), UserIntent::Next);
        assert_eq!(UserIntent::parse("Next Step."), UserIntent::Next);
        assert_eq!(UserIntent::parse("Sure."), UserIntent::Accept);
        assert_eq!(UserIntent::parse("no thanks"), UserIntent::Deny);
        assert_eq!(UserIntent::parse("skip"), UserIntent::Deny);
        assert_eq!(UserIntent::parse("Start the recipe."), UserIntent::StartTask);
        assert_eq!(UserIntent::parse("5"), UserIntent::Rate(5));
        assert_eq!(UserIntent::parse("I'd give it 4 stars"), UserIntent::Other);
        assert_eq!(UserIntent::parse("give it 4 stars"), UserIntent::Rate(4));
        assert_eq!(UserIntent::parse("three"), UserIntent::Rate(3));
        assert_eq!(UserIntent::parse("7"), UserIntent::Other);
        assert_eq!(UserIntent::parse("I want to make chicken tacos."), UserIntent::Other);
        assert_eq!(UserIntent::parse("I'm done"), UserIntent::Finish);
        assert_eq!(UserIntent::parse(""), UserIntent::Other);
    }

    #[test]
    fn arm_b_has_empty_pool_and_never_offers() {
        let e = engine();
        let mut s = e.create_session("b", tacos(), Arm::B, 0).unwrap();
        assert!(s.curiosity_pool.is_empty());
        e.handle(&mut s, UserIntent::StartTask).unwrap();
        for _ in 0..5 {
            let t = e.handle(&mut s, UserIntent::Next).unwrap();
            assert!(!t.response.contains("fun fact"));
            assert!(!s.offer_pending());
        }
        e.handle(&mut s, UserIntent::Next).unwrap();
        assert_eq!(s.phase, Phase::Finished);
    }

    #[test]
    fn arm_a_pool_bounded_by_m() {
        let e = engine();
        let s = e.create_session("a", tacos(), Arm::A, 0).unwrap();
        assert!(!s.curiosity_pool.is_empty() && s.curiosity_pool.len() <= 3);
        assert_eq!(s.phase, Phase::Greeting);
    }

    #[test]
    fn table_four_flow() {
        let e = engine();
        let mut s = e.create_session("a", tacos(), Arm::A, 0).unwrap();
        assert_eq!(
            e.handle(&mut s, UserIntent::parse("I want to make chicken tacos.")).unwrap().response,
            "Sure, I found Chicken Tacos. Would you like to 'start'?"
        );
        assert_eq!(
            e.handle(&mut s, UserIntent::parse("Start the recipe.")).unwrap().response,
            "Chicken Tacos will be yummy. Step 1: Preheat oven to 375°F. To keep going with this recipe, say 'next'."
        );
        let t = e.handle(&mut s, UserIntent::parse("Next.")).unwrap();
        assert_eq!(
            t.response,
            "Step 2. Brush butter onto both sides of the tortillas. And look, would you like me to astonish you with a fun fact?"
        );
        assert!(t.events.iter().any(|ev| ev.kind == EventKind::Offer));
        let t = e.handle(&mut s, UserIntent::parse("Sure.")).unwrap();
        assert!(t.response.starts_with("Did you know that: "));
        assert!(t.response.contains("I love sharing these facts!"));
        assert!(t.response.ends_with("Anyway, to continue, say 'next'."));
        assert_eq!(s.phase, Phase::TellingCuriosity);
        let kinds: Vec<_> = t.events.iter().map(|e| e.kind.clone()).collect();
        assert_eq!(kinds[0], EventKind::Turn);
        assert_eq!(kinds[1], EventKind::Accept);
        assert!(matches!(kinds[2], EventKind::Tell { method: MatchMethod::Semantic, .. }));
    }

    #[test]
    fn next_during_offer_is_ignore() {
        let e = engine();
        let mut s = e.create_session("a", tacos(), Arm::A, 0).unwrap();
        e.handle(&mut s, UserIntent::StartTask).unwrap();
        e.handle(&mut s, UserIntent::Next).unwrap();
        assert!(s.offer_pending());
        let t = e.handle(&mut s, UserIntent::Next).unwrap();
        assert!(t.events.iter().any(|ev| ev.kind == EventKind::Ignore));
        assert!(t.response.starts_with("Step 3."));
        assert!(s.policy.user_opted_out);
        assert_eq!(s.policy.curr_step, 3);
    }

    #[test]
    fn deny_acknowledges() {
        let e = engine();
        let mut s = e.create_session("a", tacos(), Arm::A, 0).unwrap();
        e.handle(&mut s, UserIntent::StartTask).unwrap();
        e.handle(&mut s, UserIntent::Next).unwrap();
        let t = e.handle(&mut s, UserIntent::Deny).unwrap();
        assert_eq!(t.response, "No problem. To continue, say 'next'.");
        assert_eq!(s.phase, Phase::InStep);
    }

    #[test]
    fn illegal_intents_leave_state_untouched() {
        let e = engine();
        let mut s = e.create_session("a", tacos(), Arm::A, 0).unwrap();
        let before = s.clone();
        let err = e.handle(&mut s, UserIntent::Next).unwrap_err();
        assert!(err.to_string().contains("greeting") && err.to_string().contains("next"));
        assert_eq!(s, before);
        e.handle(&mut s, UserIntent::StartTask).unwrap();
        assert!(e.handle(&mut s, UserIntent::Accept).is_err());
        assert!(e.handle(&mut s, UserIntent::Rate(5)).is_err());
    }

    #[test]
    fn finish_and_rate() {
        let e = engine();
        let mut s = e.create_session("a", tacos(), Arm::B, 0).unwrap();
        e.handle(&mut s, UserIntent::StartTask).unwrap();
        let t = e.handle(&mut s, UserIntent::Finish).unwrap();
        assert!(t.response.contains("1 to 5"));
        assert!(matches!(e.handle(&mut s, UserIntent::Rate(9)), Err(SessionError::InvalidRating(9))));
        let t = e.handle(&mut s, UserIntent::Rate(4)).unwrap();
        assert_eq!(s.rating, Some(4));
        assert_eq!(s.phase, Phase::Rated);
        assert!(t.events.iter().any(|ev| ev.kind == EventKind::Rating { value: 4 }));
        assert!(e.handle(&mut s, UserIntent::Other).is_err());
        assert_eq!(s.turn_count, 3);
        assert!(!s.is_short());
    }

    #[test]
    fn step_response_without_offer_has_no_offer_text() {
        let e = engine();
        let mut s = e.create_session("a", tacos(), Arm::A, 0).unwrap();
        e.handle(&mut s, UserIntent::StartTask).unwrap();
        e.handle(&mut s, UserIntent::Next).unwrap();
        e.handle(&mut s, UserIntent::Accept).unwrap();
        let t = e.handle(&mut s, UserIntent::Next).unwrap();
        assert_eq!(t.response, "Step 3. Fold the tortillas over the oven rack.");
        assert!(!e.phrases().offers().iter().any(|o| t.response.contains(o.as_str())));
    }

    #[test]
    fn replay_and_recover() {
        let e = engine();
        let tasks = BTreeMap::from([("chicken-tacos".to_string(), tacos())]);
        let said = ["hello", "start", "next", "sure", "next", "yes", "next", "next", "next", "next", "5"];
        let t = e.record("s1", tacos(), Arm::A, 42, &said).unwrap();
        assert_eq!(e.replay(&t, &tasks).unwrap(), t);
        assert!(t.turns[5].response.starts_with("error:"));

        let mut records = vec![JournalRecord::Create {
            session_id: "s1".into(),
            task_id: "chicken-tacos".into(),
            arm: Arm::A,
            seed: 42,
        }];
        let mut live = e.create_session("s1", tacos(), Arm::A, 42).unwrap();
        for u in said {
            let intent = UserIntent::parse(u);
            let _ = e.handle(&mut live, intent);
            records.push(JournalRecord::Intent { session_id: "s1".into(), intent });
        }
        let recovered = e.recover(&records, &tasks).unwrap();
        assert_eq!(recovered["s1"], live);
    }

    #[test]
    fn selection_falls_back_when_pool_exhausted() {
        let e = engine();
        let mut s = e.create_session("a", tacos(), Arm::A, 3).unwrap();
        s.curiosity_pool.clear();
        s.policy = s.policy.at_step(2).unwrap().offer_made();
        s.phase = Phase::OfferingCuriosity;
        s.offers_made = 1;
        let t = e.handle(&mut s, UserIntent::Accept).unwrap();
        // step 2 mentions butter and tortillas, so a text match exists
        assert!(t.events.iter().any(|ev| matches!(ev.kind, EventKind::Tell { method: MatchMethod::Text, fallback: false, .. })));
    }
}
