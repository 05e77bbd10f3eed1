//! Per-session grouping of experiment logs into the three report tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::{Arm, EventKind, ExperimentEvent};
use crate::session::MIN_QUALIFYING_TURNS;
use crate::text::MatchMethod;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("malformed event at offset {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("baseline mean must be positive, got {0}")]
    NonPositiveBaseline(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Table {
    /// A with at least one accepted offer, A without, B.
    Acceptance,
    /// Arm A by number of curiosities told.
    TellCount,
    /// (session, method) pairs.
    Method,
}

impl Table {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Table::Acceptance),
            2 => Some(Table::TellCount),
            3 => Some(Table::Method),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub label: String,
    /// Qualifying (rated, ≥ 3 turns) conversations.
    pub count: u64,
    pub rating_sum: u64,
    /// Share of the table total, in percent.
    pub share_pct: f64,
    /// Conversations with ≥ 3 turns but no rating.
    pub unrated: u64,
}

impl GroupRow {
    fn new(label: &str) -> Self {
        GroupRow {
            label: label.to_string(),
            count: 0,
            rating_sum: 0,
            share_pct: 0.0,
            unrated: 0,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.rating_sum as f64 / self.count as f64)
    }

    /// Mean to two decimals, or `-`.
    pub fn mean_2dp(&self) -> String {
        self.mean().map_or_else(|| "-".to_string(), |m| format!("{m:.2}"))
    }

    fn add(&mut self, rating: Option<u8>) {
        match rating {
            Some(r) => {
                self.count += 1;
                self.rating_sum += u64::from(r);
            }
            None => self.unrated += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub sessions: u64,
    /// Sessions under the minimum turn count, excluded everywhere.
    pub short: u64,
    pub qualifying: u64,
    pub unrated: u64,
    pub table1: Vec<GroupRow>,
    pub table2: Vec<GroupRow>,
    pub table3: Vec<GroupRow>,
}

impl AggregateReport {
    pub fn rows(&self, t: Table) -> &[GroupRow] {
        match t {
            Table::Acceptance => &self.table1,
            Table::TellCount => &self.table2,
            Table::Method => &self.table3,
        }
    }

    pub fn row(&self, t: Table, label: &str) -> Option<&GroupRow> {
        self.rows(t).iter().find(|r| r.label == label)
    }

    pub fn to_text(&self, t: Table) -> String {
        let rows = self.rows(t);
        let w = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
        let mut out = format!(
            "{:<w$}  {:>8}  {:>7}  {:>6}  {:>7}\n",
            "group", "convs", "share", "rating", "unrated"
        );
        for r in rows {
            let _ = writeln!(
                out,
                "{:<w$}  {:>8}  {:>6.1}%  {:>6}  {:>7}",
                r.label,
                r.count,
                r.share_pct,
                r.mean_2dp(),
                r.unrated
            );
        }
        out
    }

    pub fn to_csv(&self, t: Table) -> String {
        let mut out = String::from("group,conversations,share_pct,mean_rating,unrated\n");
        for r in self.rows(t) {
            let mean = r.mean().map(|m| format!("{m:.2}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.1},{},{}", r.label, r.count, r.share_pct, mean, r.unrated);
        }
        out
    }
}

#[derive(Default)]
struct SessionAcc {
    arm: Option<Arm>,
    turns: u32,
    accepts: u32,
    tells: u32,
    methods: BTreeSet<MatchMethod>,
    rating: Option<u8>,
}

pub const TABLE1_LABELS: [&str; 3] = ["A accepted (>=1)", "A not accepted", "B"];
pub const TABLE2_LABELS: [&str; 4] = ["0", "1", "2", ">=3"];
pub const TABLE3_LABELS: [&str; 2] = ["semantic", "text"];

fn fill_shares(rows: &mut [GroupRow]) {
    let total: u64 = rows.iter().map(|r| r.count).sum();
    for r in rows {
        r.share_pct = if total == 0 {
            0.0
        } else {
            100.0 * r.count as f64 / total as f64
        };
    }
}

/// Groups events per session and fills the three tables. Event order across
/// sessions is irrelevant; a session's arm must not change.
pub fn aggregate(events: &[ExperimentEvent]) -> Result<AggregateReport, LabError> {
    let mut sessions: BTreeMap<&str, SessionAcc> = BTreeMap::new();
    for (offset, ev) in events.iter().enumerate() {
        let acc = sessions.entry(ev.session_id.as_str()).or_default();
        match acc.arm {
            None => acc.arm = Some(ev.arm),
            Some(a) if a != ev.arm => {
                return Err(LabError::Malformed {
                    offset,
                    message: format!("session `{}` switches arm {a} -> {}", ev.session_id, ev.arm),
                })
            }
            Some(_) => {}
        }
        match &ev.kind {
            EventKind::Turn => acc.turns += 1,
            EventKind::Accept => acc.accepts += 1,
            EventKind::Tell { method, .. } => {
                acc.tells += 1;
                acc.methods.insert(*method);
            }
            EventKind::Rating { value } => {
                if !(1..=5).contains(value) {
                    return Err(LabError::Malformed {
                        offset,
                        message: format!("rating {value} outside 1..=5"),
                    });
                }
                acc.rating = Some(*value);
            }
            EventKind::Offer | EventKind::Deny | EventKind::Ignore => {}
        }
    }

    let mut t1: Vec<GroupRow> = TABLE1_LABELS.iter().map(|l| GroupRow::new(l)).collect();
    let mut t2: Vec<GroupRow> = TABLE2_LABELS.iter().map(|l| GroupRow::new(l)).collect();
    let mut t3: Vec<GroupRow> = TABLE3_LABELS.iter().map(|l| GroupRow::new(l)).collect();
    let mut report = AggregateReport {
        sessions: sessions.len() as u64,
        short: 0,
        qualifying: 0,
        unrated: 0,
        table1: vec![],
        table2: vec![],
        table3: vec![],
    };
    for acc in sessions.values() {
        if acc.turns < MIN_QUALIFYING_TURNS {
            report.short += 1;
            continue;
        }
        match acc.rating {
            Some(_) => report.qualifying += 1,
            None => report.unrated += 1,
        }
        let arm = acc.arm.expect("set on first event");
        let g1 = match arm {
            Arm::A if acc.accepts > 0 => 0,
            Arm::A => 1,
            Arm::B => 2,
        };
        t1[g1].add(acc.rating);
        if arm == Arm::A {
            t2[(acc.tells as usize).min(3)].add(acc.rating);
        }
        for m in &acc.methods {
            let g3 = match m {
                MatchMethod::Semantic => 0,
                MatchMethod::Text => 1,
            };
            t3[g3].add(acc.rating);
        }
    }
    for t in [&mut t1, &mut t2, &mut t3] {
        fill_shares(t);
    }
    report.table1 = t1;
    report.table2 = t2;
    report.table3 = t3;
    Ok(report)
}

/// `100 * (treatment - baseline) / baseline`, rounded to one decimal.
pub fn relative_improvement(treatment_mean: f64, baseline_mean: f64) -> Result<f64, LabError> {
    if baseline_mean.is_nan() || baseline_mean <= 0.0 {
        return Err(LabError::NonPositiveBaseline(baseline_mean));
    }
    let pct = 100.0 * (treatment_mean - baseline_mean) / baseline_mean;
    Ok((pct * 10.0).round() / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(id: &str, arm: Arm, turns: u32, accepts: u32, tells: &[MatchMethod], rating: Option<u8>) -> Vec<ExperimentEvent> {
        let mut ts = 0;
        let mut ev = |kind| {
            ts += 1;
            ExperimentEvent { session_id: id.into(), arm, ts, kind }
        };
        let mut out: Vec<_> = (0..turns).map(|_| ev(EventKind::Turn)).collect();
        for _ in 0..accepts {
            out.push(ev(EventKind::Offer));
            out.push(ev(EventKind::Accept));
        }
        for (i, m) in tells.iter().enumerate() {
            out.push(ev(EventKind::Tell { method: *m, curiosity_id: format!("c{i}"), fallback: false }));
        }
        if let Some(v) = rating {
            out.push(ev(EventKind::Rating { value: v }));
        }
        out
    }

    #[test]
    fn two_sessions_mean() {
        let mut evs = session("a", Arm::B, 3, 0, &[], Some(3));
        evs.extend(session("b", Arm::B, 4, 0, &[], Some(4)));
        let r = aggregate(&evs).unwrap();
        assert_eq!(r.row(Table::Acceptance, "B").unwrap().mean_2dp(), "3.50");
        assert_eq!(r.qualifying, 2);
    }

    #[test]
    fn short_and_unrated() {
        let mut evs = session("short", Arm::A, 2, 0, &[], Some(5));
        evs.extend(session("unrated", Arm::A, 5, 1, &[MatchMethod::Text], None));
        evs.extend(session("ok", Arm::A, 5, 2, &[MatchMethod::Text, MatchMethod::Semantic], Some(4)));
        let r = aggregate(&evs).unwrap();
        assert_eq!((r.short, r.unrated, r.qualifying), (1, 1, 1));
        let acc = r.row(Table::Acceptance, "A accepted (>=1)").unwrap();
        assert_eq!((acc.count, acc.unrated), (1, 1));
        assert_eq!(r.row(Table::TellCount, "2").unwrap().count, 1);
        assert_eq!(r.row(Table::Method, "semantic").unwrap().count, 1);
        assert_eq!(r.row(Table::Method, "text").unwrap().count, 1);
        assert!(r.to_text(Table::Method).contains("semantic"));
        assert!(r.to_csv(Table::Acceptance).starts_with("group,conversations"));
    }

    #[test]
    fn order_insensitive() {
        let mut evs = session("x", Arm::A, 4, 1, &[MatchMethod::Semantic], Some(5));
        evs.extend(session("y", Arm::B, 3, 0, &[], Some(2)));
        let a = aggregate(&evs).unwrap();
        evs.reverse();
        assert_eq!(aggregate(&evs).unwrap(), a);
    }

    #[test]
    fn bad_rating_and_arm_switch() {
        let mut evs = session("x", Arm::A, 3, 0, &[], Some(9));
        assert!(matches!(aggregate(&evs), Err(LabError::Malformed { offset: 3, .. })));
        evs.pop();
        evs.push(ExperimentEvent { session_id: "x".into(), arm: Arm::B, ts: 9, kind: EventKind::Turn });
        assert!(matches!(aggregate(&evs), Err(LabError::Malformed { offset: 3, .. })));
    }

    #[test]
    fn improvement() {
        assert_eq!(relative_improvement(3.60, 3.60).unwrap(), 0.0);
        assert_eq!(relative_improvement(3.95, 3.55).unwrap(), 11.3);
        assert_eq!(relative_improvement(3.94, 3.62).unwrap(), 8.8);
        assert!(relative_improvement(3.9, 0.0).is_err());
    }
}
