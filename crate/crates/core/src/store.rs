//! Curiosity dataset: loading, validation, statistics and national-day
//! generation.
//!
//! The on-disk format is one flat JSON object per line:
//!
//! ```text
//! {"id":"cook-0001","domain":"cooking","category":"Fruit","text":"Avocados are berries."}
//! ```
//!
//! Optional keys are `source` and `date_tag` (`MM-DD`). A `word_count` key is
//! accepted but ignored; counts are always recomputed from `text`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{word_count, Domain};

pub const DEFAULT_MAX_WORDS: usize = 40;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown domain `{domain}`")]
    UnknownDomain { line: usize, domain: String },
    #[error("duplicate curiosity id `{id}` (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("curiosity `{id}` has empty text")]
    EmptyText { id: String },
    #[error("no curiosities in domain `{0}`")]
    EmptyDomain(Domain),
    #[error("template pattern must contain `{{{0}}}` exactly once")]
    Placeholder(&'static str),
    #[error("national-day calendar is empty")]
    EmptyCalendar,
    #[error("invalid month-day `{0}` (expected MM-DD)")]
    InvalidDate(String),
}

/// Calendar day without a year, written `MM-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthDay {
    month: u8,
    day: u8,
}

const MONTHS: [(&str, u8); 12] = [
    ("January", 31),
    ("February", 29),
    ("March", 31),
    ("April", 30),
    ("May", 31),
    ("June", 30),
    ("July", 31),
    ("August", 31),
    ("September", 30),
    ("October", 31),
    ("November", 30),
    ("December", 31),
];

impl MonthDay {
    pub fn new(month: u8, day: u8) -> Option<Self> {
        let (_, max) = MONTHS.get(usize::from(month).checked_sub(1)?)?;
        (1..=*max).contains(&day).then_some(MonthDay { month, day })
    }

    pub fn month(self) -> u8 {
        self.month
    }

    pub fn day(self) -> u8 {
        self.day
    }

    /// Spoken form, e.g. `14th of May`.
    pub fn phrase(self) -> String {
        let suffix = match (self.day % 10, self.day % 100) {
            (_, 11..=13) => "th",
            (1, _) => "st",
            (2, _) => "nd",
            (3, _) => "rd",
            _ => "th",
        };
        let month = MONTHS[usize::from(self.month) - 1].0;
        format!("{}{} of {}", self.day, suffix, month)
    }
}

impl fmt::Display for MonthDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}-{:02}", self.month, self.day)
    }
}

impl FromStr for MonthDay {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StoreError::InvalidDate(s.to_string());
        let (m, d) = s.split_once('-').ok_or_else(bad)?;
        if m.len() != 2 || d.len() != 2 {
            return Err(bad());
        }
        let month = m.parse().map_err(|_| bad())?;
        let day = d.parse().map_err(|_| bad())?;
        MonthDay::new(month, day).ok_or_else(bad)
    }
}

impl Serialize for MonthDay {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthDay {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// One curated fun fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Curiosity {
    pub id: String,
    pub domain: Domain,
    pub category: String,
    pub text: String,
    #[serde(skip)]
    pub word_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub date_tag: Option<MonthDay>,
}

impl Curiosity {
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        category: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self, StoreError> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(StoreError::EmptyText { id });
        }
        Ok(Curiosity {
            word_count: word_count(&text),
            id,
            domain,
            category: category.into(),
            text,
            source: None,
            date_tag: None,
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn with_date_tag(mut self, tag: MonthDay) -> Self {
        self.date_tag = Some(tag);
        self
    }
}

/// Raw line shape. `domain` is kept as a string so an unknown value can be
/// reported with its own error rather than a generic parse failure.
#[derive(Deserialize)]
struct Record {
    id: String,
    domain: String,
    #[serde(default)]
    category: String,
    text: String,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    date_tag: Option<MonthDay>,
}

/// Immutable set of curiosities with a per-domain index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CuriosityCollection {
    items: Vec<Curiosity>,
    by_id: HashMap<String, usize>,
    by_domain: BTreeMap<Domain, Vec<usize>>,
}

impl CuriosityCollection {
    pub fn new(items: Vec<Curiosity>) -> Result<Self, StoreError> {
        let mut by_id = HashMap::with_capacity(items.len());
        let mut by_domain: BTreeMap<Domain, Vec<usize>> = BTreeMap::new();
        for (pos, item) in items.iter().enumerate() {
            if by_id.insert(item.id.clone(), pos).is_some() {
                return Err(StoreError::DuplicateId {
                    id: item.id.clone(),
                    line: pos + 1,
                });
            }
            by_domain.entry(item.domain).or_default().push(pos);
        }
        Ok(CuriosityCollection {
            items,
            by_id,
            by_domain,
        })
    }

    /// Parses the line-delimited format. Blank lines are skipped but still
    /// counted for error line numbers.
    pub fn from_jsonl(input: &str) -> Result<Self, StoreError> {
        let mut items = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in input.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(raw).map_err(|e| StoreError::Parse {
                line,
                message: e.to_string(),
            })?;
            let domain = rec
                .domain
                .parse::<Domain>()
                .map_err(|_| StoreError::UnknownDomain {
                    line,
                    domain: rec.domain.clone(),
                })?;
            if seen.insert(rec.id.clone(), line).is_some() {
                return Err(StoreError::DuplicateId { id: rec.id, line });
            }
            let mut item = Curiosity::new(rec.id, domain, rec.category, rec.text).map_err(|e| {
                StoreError::Parse {
                    line,
                    message: e.to_string(),
                }
            })?;
            item.source = rec.source;
            item.date_tag = rec.date_tag;
            items.push(item);
        }
        Self::new(items)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("curiosity serializes"));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Curiosity] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&Curiosity> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn domain_len(&self, domain: Domain) -> usize {
        self.by_domain.get(&domain).map_or(0, Vec::len)
    }

    /// Items of one domain, in file order.
    pub fn in_domain(&self, domain: Domain) -> impl Iterator<Item = &Curiosity> + '_ {
        self.by_domain
            .get(&domain)
            .into_iter()
            .flatten()
            .map(move |&i| &self.items[i])
    }

    /// Ids of one domain, in file order.
    pub fn domain_ids(&self, domain: Domain) -> Vec<&str> {
        self.in_domain(domain).map(|c| c.id.as_str()).collect()
    }

    /// Returns a new collection with `extra` appended.
    pub fn extended(&self, extra: Vec<Curiosity>) -> Result<Self, StoreError> {
        let mut items = self.items.clone();
        items.extend(extra);
        Self::new(items)
    }
}

pub fn load_collection(path: impl AsRef<Path>) -> Result<CuriosityCollection, StoreError> {
    let path = path.as_ref();
    let input = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    CuriosityCollection::from_jsonl(&input)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Finding {
    TooLong { id: String, words: usize, max: usize },
    EmptyText { id: String },
    MissingTerminalPunctuation { id: String },
}

impl Finding {
    pub fn id(&self) -> &str {
        match self {
            Finding::TooLong { id, .. }
            | Finding::EmptyText { id }
            | Finding::MissingTerminalPunctuation { id } => id,
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::TooLong { id, words, max } => {
                write!(f, "{id}: {words} words exceeds cap of {max}")
            }
            Finding::EmptyText { id } => write!(f, "{id}: empty text"),
            Finding::MissingTerminalPunctuation { id } => {
                write!(f, "{id}: text does not end with sentence punctuation")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub checked: usize,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

fn ends_with_sentence_punctuation(text: &str) -> bool {
    let trimmed = text
        .trim_end()
        .trim_end_matches(['"', '\'', '”', '’', ')']);
    trimmed.ends_with(['.', '!', '?', '…'])
}

/// Checks every item against the curiosity invariants and the length cap.
pub fn validate(c: &CuriosityCollection, max_words: usize) -> ValidationReport {
    let max_words = max_words.max(1);
    let mut findings = Vec::new();
    for item in c.items() {
        if item.text.trim().is_empty() {
            findings.push(Finding::EmptyText {
                id: item.id.clone(),
            });
            continue;
        }
        let words = word_count(&item.text);
        if words > max_words {
            findings.push(Finding::TooLong {
                id: item.id.clone(),
                words,
                max: max_words,
            });
        }
        if !ends_with_sentence_punctuation(&item.text) {
            findings.push(Finding::MissingTerminalPunctuation {
                id: item.id.clone(),
            });
        }
    }
    ValidationReport {
        checked: c.len(),
        findings,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainLengths {
    /// Width-1 bins: word count to number of items.
    pub bins: BTreeMap<usize, usize>,
    pub count: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LengthHistogram {
    pub domains: BTreeMap<Domain, DomainLengths>,
}

impl LengthHistogram {
    /// CSV with header `domain,words,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,words,count\n");
        for (domain, lengths) in &self.domains {
            for (words, count) in &lengths.bins {
                out.push_str(&format!("{domain},{words},{count}\n"));
            }
        }
        out
    }
}

/// Per-domain word-count histogram and mean for the requested domains.
pub fn length_stats(
    c: &CuriosityCollection,
    domains: &[Domain],
) -> Result<LengthHistogram, StoreError> {
    let mut hist = LengthHistogram::default();
    for &domain in domains {
        let mut bins = BTreeMap::new();
        let mut total = 0usize;
        let mut count = 0usize;
        for item in c.in_domain(domain) {
            *bins.entry(item.word_count).or_insert(0) += 1;
            total += item.word_count;
            count += 1;
        }
        if count == 0 {
            return Err(StoreError::EmptyDomain(domain));
        }
        hist.domains.insert(
            domain,
            DomainLengths {
                bins,
                count,
                mean: total as f64 / count as f64,
            },
        );
    }
    Ok(hist)
}

/// Statistics for every domain that has at least one item.
pub fn length_stats_present(c: &CuriosityCollection) -> Result<LengthHistogram, StoreError> {
    let present: Vec<Domain> = Domain::ALL
        .into_iter()
        .filter(|d| c.domain_len(*d) > 0)
        .collect();
    length_stats(c, &present)
}

pub const DATE_PLACEHOLDER: &str = "date_phrase";
pub const ITEM_PLACEHOLDER: &str = "item";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarEntry {
    pub date: MonthDay,
    pub item: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NationalDayTemplate {
    pub pattern: String,
    pub calendar: Vec<CalendarEntry>,
}

impl NationalDayTemplate {
    pub const DEFAULT_PATTERN: &'static str =
        "In the US, on the {date_phrase}, it's the national {item} day.";

    fn check_pattern(&self) -> Result<(), StoreError> {
        for name in [DATE_PLACEHOLDER, ITEM_PLACEHOLDER] {
            let token = format!("{{{name}}}");
            if self.pattern.matches(&token).count() != 1 {
                return Err(StoreError::Placeholder(name));
            }
        }
        Ok(())
    }
}

fn slug(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut dash = false;
    for ch in s.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            out.push(ch);
            dash = false;
        } else if !dash && !out.is_empty() {
            out.push('-');
            dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

/// One curiosity per calendar entry, with ids derived from
/// `(domain, month-day, item)`.
pub fn generate_national_day(
    t: &NationalDayTemplate,
    domain: Domain,
) -> Result<Vec<Curiosity>, StoreError> {
    t.check_pattern()?;
    if t.calendar.is_empty() {
        return Err(StoreError::EmptyCalendar);
    }
    t.calendar
        .iter()
        .map(|entry| {
            let text = t
                .pattern
                .replace("{date_phrase}", &entry.date.phrase())
                .replace("{item}", &entry.item);
            let id = format!("nd-{}-{}-{}", domain, entry.date, slug(&entry.item));
            Curiosity::new(id, domain, "National days", text).map(|c| c.with_date_tag(entry.date))
        })
        .collect()
}
