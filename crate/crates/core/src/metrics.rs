//! Answer-set metrics and per-type reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::answer::AnswerSet;

pub fn precision(pred: &AnswerSet, gold: &AnswerSet) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.intersection_len(gold) as f64 / pred.len() as f64
}

pub fn recall(pred: &AnswerSet, gold: &AnswerSet) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    pred.intersection_len(gold) as f64 / gold.len() as f64
}

/// Harmonic mean of precision and recall, computed as 2|P∩G| / (|P| + |G|)
/// so the result is rounded once.
pub fn f1(pred: &AnswerSet, gold: &AnswerSet) -> f64 {
    let hits = pred.intersection_len(gold);
    if hits == 0 {
        0.0
    } else {
        (2 * hits) as f64 / (pred.len() + gold.len()) as f64
    }
}

/// Expected hit rate of one uniform pick from the prediction.
pub fn rhits1(pred: &AnswerSet, gold: &AnswerSet) -> f64 {
    precision(pred, gold)
}

/// One uniform pick from the prediction, scored 1 on a hit.
pub fn rhits1_sampled(pred: &AnswerSet, gold: &AnswerSet, rng: &mut impl Rng) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let pick = pred.iter().nth(rng.gen_range(0..pred.len())).expect("index in range");
    if gold.contains(pick) {
        1.0
    } else {
        0.0
    }
}

/// 1 when any predicted answer is a gold answer.
pub fn em(pred: &AnswerSet, gold: &AnswerSet) -> f64 {
    if pred.intersection_len(gold) > 0 {
        1.0
    } else {
        0.0
    }
}

/// 1 when the sets are equal. Empty predictions never score.
pub fn set_accuracy(pred: &AnswerSet, gold: &AnswerSet) -> f64 {
    if !pred.is_empty() && pred == gold {
        1.0
    } else {
        0.0
    }
}

pub fn max_at_k(branches: &[AnswerSet], gold: &AnswerSet) -> f64 {
    branches.iter().map(|b| f1(b, gold)).fold(0.0, f64::max)
}

pub fn empty_at_k(branches: &[AnswerSet], gold: &AnswerSet) -> f64 {
    if branches.iter().all(|b| f1(b, gold) == 0.0) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    #[serde(default = "untyped")]
    pub qtype: String,
    pub pred: AnswerSet,
    pub gold: AnswerSet,
    #[serde(default)]
    pub branches: Vec<AnswerSet>,
}

fn untyped() -> String {
    "untyped".into()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f1: f64,
    pub rhits1: f64,
    pub em: f64,
    pub acc: f64,
    pub max_at_k: f64,
    pub empty_at_k: f64,
}

impl Scores {
    pub fn of(r: &EvalRecord) -> Self {
        Self {
            f1: f1(&r.pred, &r.gold),
            rhits1: rhits1(&r.pred, &r.gold),
            em: em(&r.pred, &r.gold),
            acc: set_accuracy(&r.pred, &r.gold),
            max_at_k: max_at_k(&r.branches, &r.gold),
            empty_at_k: empty_at_k(&r.branches, &r.gold),
        }
    }

    fn mean(all: &[Scores]) -> Self {
        let n = all.len() as f64;
        let sum = |f: fn(&Scores) -> f64| all.iter().map(f).sum::<f64>() / n;
        Self {
            f1: sum(|s| s.f1),
            rhits1: sum(|s| s.rhits1),
            em: sum(|s| s.em),
            acc: sum(|s| s.acc),
            max_at_k: sum(|s| s.max_at_k),
            empty_at_k: sum(|s| s.empty_at_k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub qtype: String,
    pub count: usize,
    pub scores: Scores,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Per-type rows in type order, then `overall`.
    pub rows: Vec<ReportRow>,
    /// Records skipped for having an empty gold set.
    pub excluded: usize,
}

impl Report {
    pub fn overall(&self) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.qtype == "overall")
    }

    pub fn row(&self, qtype: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.qtype == qtype)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,count,f1,rhits1,em,acc,max_at_k,empty_at_k\n");
        for r in &self.rows {
            let s = &r.scores;
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                r.qtype, r.count, s.f1, s.rhits1, s.em, s.acc, s.max_at_k, s.empty_at_k
            );
        }
        out
    }
}

/// Macro averages over records, per type and overall.
pub fn aggregate(records: &[EvalRecord]) -> Report {
    let mut by_type: BTreeMap<&str, Vec<Scores>> = BTreeMap::new();
    let mut all = Vec::new();
    let mut excluded = 0;
    for r in records {
        if r.gold.is_empty() {
            excluded += 1;
            continue;
        }
        let s = Scores::of(r);
        by_type.entry(&r.qtype).or_default().push(s);
        all.push(s);
    }
    let mut rows: Vec<ReportRow> = by_type
        .into_iter()
        .map(|(t, s)| ReportRow { qtype: t.to_owned(), count: s.len(), scores: Scores::mean(&s) })
        .collect();
    if !all.is_empty() {
        rows.push(ReportRow { qtype: "overall".into(), count: all.len(), scores: Scores::mean(&all) });
    }
    Report { rows, excluded }
}
