//! Lexical matcher: normalisation, bag-of-words vectors and cosine ranking.
//!
//! Normalisation pipeline, applied per token:
//!
//! 1. lowercase, drop apostrophes, split on anything that is not alphanumeric;
//! 2. drop tokens without a letter and single-character tokens;
//! 3. reduce plurals (suffix rules plus an irregulars table);
//! 4. drop stopwords and domain common words (raw or reduced form);
//! 5. drop verbs: reduced form in the noun whitelist is kept, otherwise a
//!    hit in the verb lexicon (raw or reduced) or an `-ing` / `-ed` ending
//!    removes the token.
//!
//! Every step only looks at the token itself, so the pipeline is idempotent.

use std::collections::{BTreeMap, HashSet};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::par::{self, ExecMode};
use crate::store::CuriosityCollection;

const BUNDLED_STOPWORDS: &str = include_str!("../../../config/stopwords.txt");
const BUNDLED_VERBS: &str = include_str!("../../../config/verbs.txt");
const BUNDLED_NOUNS: &str = include_str!("../../../config/nouns.txt");
const BUNDLED_COMMON_COOKING: &str = include_str!("../../../config/common_words.cooking.txt");
const BUNDLED_COMMON_DIY: &str = include_str!("../../../config/common_words.diy.txt");

const IRREGULAR_PLURALS: &[(&str, &str)] = &[
    ("brownies", "brownie"),
    ("calories", "calorie"),
    ("children", "child"),
    ("cookies", "cookie"),
    ("feet", "foot"),
    ("geese", "goose"),
    ("halves", "half"),
    ("knives", "knife"),
    ("leaves", "leaf"),
    ("lives", "life"),
    ("loaves", "loaf"),
    ("men", "man"),
    ("mice", "mouse"),
    ("molasses", "molasses"),
    ("movies", "movie"),
    ("people", "person"),
    ("series", "series"),
    ("shelves", "shelf"),
    ("shoes", "shoe"),
    ("smoothies", "smoothie"),
    ("species", "species"),
    ("teeth", "tooth"),
    ("veggies", "veggie"),
    ("wives", "wife"),
    ("wolves", "wolf"),
    ("women", "woman"),
];

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("no candidate curiosities in domain `{0}`")]
    EmptyCandidates(Domain),
    #[error("top_m must be at least 1")]
    ZeroTopM,
}

fn parse_word_list(input: &str) -> HashSet<String> {
    input
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Reduces a lowercase token to its singular form.
pub fn singularize(word: &str) -> String {
    if let Some((_, single)) = IRREGULAR_PLURALS.iter().find(|(p, _)| *p == word) {
        return single.to_string();
    }
    if word.chars().count() <= 3 || word.ends_with("ss") || word.ends_with("us") || word.ends_with("is")
    {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.chars().count() >= 2 {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "xes", "zes", "ches", "shes", "oes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    match word.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => word.to_string(),
    }
}

/// Word lists driving [`normalize`].
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    verbs: HashSet<String>,
    nouns: HashSet<String>,
    common: BTreeMap<Domain, HashSet<String>>,
}

impl Lexicon {
    /// The lists shipped under `config/`, compiled in.
    pub fn bundled() -> Self {
        Self::from_sources(
            BUNDLED_STOPWORDS,
            BUNDLED_VERBS,
            BUNDLED_NOUNS,
            BUNDLED_COMMON_COOKING,
            BUNDLED_COMMON_DIY,
        )
    }

    pub fn from_sources(
        stopwords: &str,
        verbs: &str,
        nouns: &str,
        common_cooking: &str,
        common_diy: &str,
    ) -> Self {
        let reduce = |s: &str| -> HashSet<String> {
            parse_word_list(s).iter().map(|w| singularize(w)).collect()
        };
        Lexicon {
            stopwords: parse_word_list(stopwords),
            verbs: parse_word_list(verbs),
            nouns: reduce(nouns),
            common: BTreeMap::from([
                (Domain::Cooking, reduce(common_cooking)),
                (Domain::Diy, reduce(common_diy)),
            ]),
        }
    }

    /// Reads `stopwords.txt`, `verbs.txt`, `common_words.<domain>.txt` and
    /// the optional `nouns.txt` from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| std::fs::read_to_string(dir.join(name));
        let nouns = match read("nouns.txt") {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e),
        };
        Ok(Self::from_sources(
            &read("stopwords.txt")?,
            &read("verbs.txt")?,
            &nouns,
            &read("common_words.cooking.txt")?,
            &read("common_words.diy.txt")?,
        ))
    }

    fn is_stopword(&self, raw: &str, reduced: &str) -> bool {
        self.stopwords.contains(raw) || self.stopwords.contains(reduced)
    }

    fn is_common(&self, domain: Domain, raw: &str, reduced: &str) -> bool {
        self.common
            .get(&domain)
            .is_some_and(|set| set.contains(raw) || set.contains(reduced))
    }

    fn is_verb(&self, raw: &str, reduced: &str) -> bool {
        if self.nouns.contains(reduced) {
            return false;
        }
        if self.verbs.contains(raw) || self.verbs.contains(reduced) {
            return true;
        }
        let len = reduced.chars().count();
        (len >= 5 && reduced.ends_with("ing")) || (len >= 5 && reduced.ends_with("ed"))
    }
}

/// Normalised terms of a text, in order of appearance (a multiset).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSet {
    pub tokens: Vec<String>,
}

impl TokenSet {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn to_bow(&self) -> BowVector {
        let mut entries = BTreeMap::new();
        for t in &self.tokens {
            *entries.entry(t.clone()).or_insert(0u32) += 1;
        }
        BowVector { entries }
    }
}

pub fn normalize(text: &str, domain: Domain, lexicon: &Lexicon) -> TokenSet {
    let lowered: String = text
        .chars()
        .filter(|c| *c != '\'' && *c != '’')
        .flat_map(char::to_lowercase)
        .collect();
    let tokens = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1 && t.chars().any(char::is_alphabetic))
        .filter_map(|raw| {
            let reduced = singularize(raw);
            if lexicon.is_stopword(raw, &reduced)
                || lexicon.is_common(domain, raw, &reduced)
                || lexicon.is_verb(raw, &reduced)
            {
                None
            } else {
                Some(reduced)
            }
        })
        .collect();
    TokenSet { tokens }
}

/// Sparse term-frequency vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BowVector {
    pub entries: BTreeMap<String, u32>,
}

impl BowVector {
    fn squared_norm(&self) -> u64 {
        self.entries.values().map(|&c| u64::from(c) * u64::from(c)).sum()
    }
}

/// Integer pieces of a cosine: `dot / sqrt(norm_product)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CosineParts {
    pub dot: u64,
    pub norm_product: u64,
}

impl CosineParts {
    pub fn of(a: &BowVector, b: &BowVector) -> Self {
        let (small, large) = if a.entries.len() <= b.entries.len() {
            (a, b)
        } else {
            (b, a)
        };
        let dot: u64 = small
            .entries
            .iter()
            .filter_map(|(t, &c)| large.entries.get(t).map(|&d| u64::from(c) * u64::from(d)))
            .sum();
        CosineParts {
            dot,
            norm_product: a.squared_norm() * b.squared_norm(),
        }
    }

    pub fn value(self) -> f64 {
        if self.dot == 0 {
            return 0.0;
        }
        // sqrt of the integer product keeps cosine(a, a) exactly 1.
        (self.dot as f64 / (self.norm_product as f64).sqrt()).min(1.0)
    }

    /// Exact comparison of the two cosines (squared, cross-multiplied), so
    /// mathematically equal scores tie regardless of float rounding.
    pub fn cmp_exact(self, other: Self) -> std::cmp::Ordering {
        if self.dot == 0 || other.dot == 0 {
            return self.dot.min(1).cmp(&other.dot.min(1));
        }
        let lhs = u128::from(self.dot).pow(2) * u128::from(other.norm_product);
        let rhs = u128::from(other.dot).pow(2) * u128::from(self.norm_product);
        lhs.cmp(&rhs)
    }
}

/// Cosine of two term-frequency vectors; 0 when either is empty.
pub fn cosine(a: &BowVector, b: &BowVector) -> f64 {
    CosineParts::of(a, b).value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Text,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageScores {
    pub bi: f64,
    pub cross: f64,
}

/// One ranked curiosity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub curiosity_id: String,
    pub score: f64,
    pub method: MatchMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_scores: Option<StageScores>,
}

/// Descending score, ascending id.
pub(crate) fn rank_order(a: (&str, f64), b: (&str, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Curiosity vectors of one collection, normalised once and reused across
/// queries.
#[derive(Debug, Clone)]
pub struct TextMatcher {
    lexicon: Lexicon,
    vectors: BTreeMap<Domain, Vec<(String, BowVector)>>,
    mode: ExecMode,
}

impl TextMatcher {
    pub fn new(lexicon: Lexicon, collection: &CuriosityCollection, mode: ExecMode) -> Self {
        let mut vectors = BTreeMap::new();
        for domain in Domain::ALL {
            let items: Vec<_> = collection.in_domain(domain).collect();
            let bows = par::map(mode, &items, |c| {
                (c.id.clone(), normalize(&c.text, domain, &lexicon).to_bow())
            });
            vectors.insert(domain, bows);
        }
        TextMatcher {
            lexicon,
            vectors,
            mode,
        }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn with_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    /// Top `top_m` same-domain curiosities for `step_text`.
    pub fn rank(
        &self,
        step_text: &str,
        domain: Domain,
        top_m: usize,
    ) -> Result<Vec<MatchResult>, TextError> {
        if top_m == 0 {
            return Err(TextError::ZeroTopM);
        }
        let candidates = self
            .vectors
            .get(&domain)
            .filter(|v| !v.is_empty())
            .ok_or(TextError::EmptyCandidates(domain))?;
        let query = normalize(step_text, domain, &self.lexicon).to_bow();
        let mut scored: Vec<(&str, CosineParts)> = par::map_indexed(self.mode, candidates.len(), |i| {
            let (id, bow) = &candidates[i];
            (id.as_str(), CosineParts::of(&query, bow))
        });
        scored.sort_by(|a, b| b.1.cmp_exact(a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(top_m);
        Ok(scored
            .into_iter()
            .map(|(id, parts)| MatchResult {
                curiosity_id: id.to_string(),
                score: parts.value(),
                method: MatchMethod::Text,
                stage_scores: None,
            })
            .collect())
    }
}

/// Ranks the same-domain `candidates` against one step's text.
pub fn rank_text(
    step_text: &str,
    candidates: &CuriosityCollection,
    domain: Domain,
    top_m: usize,
    lexicon: &Lexicon,
) -> Result<Vec<MatchResult>, TextError> {
    if top_m == 0 {
        return Err(TextError::ZeroTopM);
    }
    let domain_only = CuriosityCollection::new(candidates.in_domain(domain).cloned().collect())
        .expect("ids already unique");
    TextMatcher::new(lexicon.clone(), &domain_only, ExecMode::default()).rank(
        step_text,
        domain,
        top_m,
    )
}
