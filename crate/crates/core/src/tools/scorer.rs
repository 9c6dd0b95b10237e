use std::collections::BTreeSet;

use crate::kb::label::{normalize, tokens};

/// Relevance of a candidate text (node label, predicate label) to a query.
/// Zero means "no match"; larger is better.
pub trait Scorer: Send + Sync {
    fn score(&self, query: &str, candidate: &str) -> f64;
}

/// Minimum trigram similarity for a candidate with no shared token.
pub const MIN_TRIGRAM_SIMILARITY: f64 = 0.3;

/// Deterministic three-tier lexical scorer.
///
/// * exact normalized match: `3.0`
/// * any shared token: `1.0 + jaccard(tokens)`, in `(1, 2]`
/// * otherwise character-trigram jaccard, kept when at least
///   [`MIN_TRIGRAM_SIMILARITY`] and capped below `1.0`
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(&self, query: &str, candidate: &str) -> f64 {
        let nq = normalize(query);
        let nc = normalize(candidate);
        if nq.is_empty() || nc.is_empty() {
            return 0.0;
        }
        if nq == nc {
            return 3.0;
        }
        let overlap = token_jaccard(query, candidate);
        if overlap > 0.0 {
            return 1.0 + overlap;
        }
        let t = trigram_jaccard(&nq, &nc);
        if t >= MIN_TRIGRAM_SIMILARITY {
            t.min(0.999)
        } else {
            0.0
        }
    }
}

pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<String> = tokens(a).into_iter().collect();
    let tb: BTreeSet<String> = tokens(b).into_iter().collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

fn trigrams(s: &str) -> BTreeSet<Vec<char>> {
    let padded: Vec<char> = format!("  {s} ").chars().collect();
    padded.windows(3).map(<[char]>::to_vec).collect()
}

pub fn trigram_jaccard(a: &str, b: &str) -> f64 {
    let ga = trigrams(a);
    let gb = trigrams(b);
    let union = ga.union(&gb).count();
    if union == 0 {
        return 0.0;
    }
    ga.intersection(&gb).count() as f64 / union as f64
}
