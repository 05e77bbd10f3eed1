//! Offer questions and opener/closer framing for curiosities.
//!
//! Phrase bank files have four sections, one phrase per line:
//!
//! ```text
//! [offers]
//! And look, would you like me to astonish you with a fun fact?
//! [openers]
//! Did you know that:
//! [closers]
//! I love sharing these facts!
//! [continuation]
//! Anyway, to continue, say 'next'.
//! ```
//!
//! Lines starting with `#` are comments. Selection is driven by an explicit
//! seed (`seed mod len` per list) so dialogues replay exactly.

use std::path::Path;

use serde::Serialize;

use crate::store::Curiosity;

const BUNDLED_EN: &str = include_str!("../../../config/phrases.en.txt");

#[derive(Debug, thiserror::Error)]
pub enum PhraseError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: unknown section `{name}`")]
    UnknownSection { line: usize, name: String },
    #[error("line {0}: phrase outside of any section")]
    NoSection(usize),
    #[error("section `{0}` is empty")]
    EmptySection(&'static str),
    #[error("[continuation] must hold exactly one line, found {0}")]
    Continuation(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseBank {
    offers: Vec<String>,
    openers: Vec<String>,
    closers: Vec<String>,
    continuation: String,
}

impl PhraseBank {
    pub fn new(
        offers: Vec<String>,
        openers: Vec<String>,
        closers: Vec<String>,
        continuation: String,
    ) -> Result<Self, PhraseError> {
        let clean = |v: Vec<String>, name| {
            let v: Vec<String> = v
                .into_iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if v.is_empty() {
                Err(PhraseError::EmptySection(name))
            } else {
                Ok(v)
            }
        };
        let continuation = continuation.trim().to_string();
        if continuation.is_empty() {
            return Err(PhraseError::EmptySection("continuation"));
        }
        Ok(PhraseBank {
            offers: clean(offers, "offers")?,
            openers: clean(openers, "openers")?,
            closers: clean(closers, "closers")?,
            continuation,
        })
    }

    /// English bank compiled from `config/phrases.en.txt`.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_EN).expect("bundled phrase bank is valid")
    }

    pub fn parse(input: &str) -> Result<Self, PhraseError> {
        let mut sections: [Vec<String>; 4] = Default::default();
        let mut current: Option<usize> = None;
        for (idx, raw) in input.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(match name {
                    "offers" => 0,
                    "openers" => 1,
                    "closers" => 2,
                    "continuation" => 3,
                    _ => {
                        return Err(PhraseError::UnknownSection {
                            line: idx + 1,
                            name: name.to_string(),
                        })
                    }
                });
                continue;
            }
            let section = current.ok_or(PhraseError::NoSection(idx + 1))?;
            sections[section].push(line.to_string());
        }
        let [offers, openers, closers, continuation] = sections;
        if continuation.len() > 1 {
            return Err(PhraseError::Continuation(continuation.len()));
        }
        let continuation = continuation.into_iter().next().unwrap_or_default();
        Self::new(offers, openers, closers, continuation)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PhraseError> {
        let path = path.as_ref();
        let input = std::fs::read_to_string(path).map_err(|source| PhraseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&input)
    }

    pub fn offers(&self) -> &[String] {
        &self.offers
    }

    pub fn openers(&self) -> &[String] {
        &self.openers
    }

    pub fn closers(&self) -> &[String] {
        &self.closers
    }

    pub fn continuation(&self) -> &str {
        &self.continuation
    }
}

fn pick(len: usize, seed: u64) -> usize {
    (seed % len as u64) as usize
}

pub fn render_offer(bank: &PhraseBank, seed: u64) -> &str {
    &bank.offers[pick(bank.offers.len(), seed)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedCuriosity {
    pub text: String,
    pub opener_id: usize,
    pub closer_id: usize,
}

pub fn render_curiosity(
    c: &Curiosity,
    bank: &PhraseBank,
    seed: u64,
    append_continuation: bool,
) -> RenderedCuriosity {
    let opener_id = pick(bank.openers.len(), seed);
    let closer_id = pick(bank.closers.len(), seed);
    let mut text = format!(
        "{} {} {}",
        bank.openers[opener_id],
        c.text,
        bank.closers[closer_id]
    );
    if append_continuation {
        text.push(' ');
        text.push_str(&bank.continuation);
    }
    RenderedCuriosity {
        text,
        opener_id,
        closer_id,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::store::StoreError;

    fn tortilla() -> Curiosity {
        Curiosity::new(
            "tortilla",
            Domain::Cooking,
            "Popular countries' food",
            "The word tortilla comes from the Spanish word torta which means round cake.",
        )
        .unwrap()
    }

    #[test]
    fn bundled_offers() {
        let bank = PhraseBank::bundled();
        assert_eq!(
            render_offer(&bank, 0),
            "And look, would you like me to astonish you with a fun fact?"
        );
        assert_eq!(render_offer(&bank, 7), render_offer(&bank, 7));
        assert!(bank
            .offers()
            .iter()
            .any(|o| o.contains("would you be interested in a fun fact about this?")));
    }

    #[test]
    fn opener_fact_closer() {
        let bank = PhraseBank::bundled();
        let r = render_curiosity(&tortilla(), &bank, 0, false);
        assert_eq!(
            r.text,
            "Did you know that: The word tortilla comes from the Spanish word torta which means round cake. I love sharing these facts!"
        );
        let r = render_curiosity(&tortilla(), &bank, 0, true);
        assert!(r.text.ends_with("Anyway, to continue, say 'next'."));
        // reconstruction from recorded ids
        let rebuilt = format!(
            "{} {} {} {}",
            bank.openers()[r.opener_id],
            tortilla().text,
            bank.closers()[r.closer_id],
            bank.continuation()
        );
        assert_eq!(rebuilt, r.text);
    }

    #[test]
    fn selection_is_uniform_over_one_cycle() {
        let bank = PhraseBank::bundled();
        let n = bank.openers().len() as u64;
        let mut hits = vec![0; bank.openers().len()];
        for seed in 0..n {
            hits[render_curiosity(&tortilla(), &bank, seed, false).opener_id] += 1;
        }
        assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn empty_text_rejected_upstream() {
        assert!(matches!(
            Curiosity::new("x", Domain::Diy, "c", "  "),
            Err(StoreError::EmptyText { .. })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            PhraseBank::parse("[offers]\na\n[openers]\nb\n[closers]\n[continuation]\nc"),
            Err(PhraseError::EmptySection("closers"))
        ));
        assert!(matches!(
            PhraseBank::parse("orphan"),
            Err(PhraseError::NoSection(1))
        ));
        assert!(matches!(
            PhraseBank::parse("[bogus]"),
            Err(PhraseError::UnknownSection { .. })
        ));
        let bank = PhraseBank::parse("[offers]\nQ?\n[openers]\nO:\n[closers]\nC!\n[continuation]\nGo on.").unwrap();
        assert_eq!(render_curiosity(&tortilla(), &bank, 99, true).text.split(' ').next(), Some("O:"));
    }
}
