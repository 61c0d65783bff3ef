//! Text statistics over question batches: n-gram diversity, repetition
//! penalty, anchor alignment and the difficulty curve.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::curriculum::AnchorPool;
use crate::math::sqrt;
use crate::verification::SuccessStats;
use crate::{Error, Result};

/// Default bigram-Jaccard threshold above which two questions count as
/// duplicates.
pub const DEFAULT_SIM_THRESHOLD: f64 = 0.5;

/// Lower-cased tokens with punctuation removed; tokens that were pure
/// punctuation are dropped.
pub fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Sliding-window n-gram counts.
pub fn ngram_multiset(text: &str, n: usize) -> Result<BTreeMap<String, usize>> {
    if n == 0 {
        return Err(Error::domain("n-gram order must be at least 1"));
    }
    let toks = tokens(text);
    let mut grams = BTreeMap::new();
    for window in toks.windows(n) {
        *grams.entry(window.join(" ")).or_insert(0) += 1;
    }
    Ok(grams)
}

/// `100 * distinct / total` n-grams across the batch; 100 when the batch has
/// no n-grams at all.
pub fn lexical_diversity<S: AsRef<str>>(batch: &[S], n: usize) -> Result<f64> {
    let mut distinct = BTreeSet::new();
    let mut total = 0usize;
    for text in batch {
        for (gram, count) in ngram_multiset(text.as_ref(), n)? {
            total += count;
            distinct.insert(gram);
        }
    }
    if total == 0 {
        return Ok(100.0);
    }
    Ok(100.0 * distinct.len() as f64 / total as f64)
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Fraction of peers whose bigram-Jaccard similarity reaches `sim_threshold`.
///
/// Texts too short to have a bigram only match peers with the same tokens.
pub fn rep_penalty<S: AsRef<str>>(batch: &[S], sim_threshold: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::domain("repetition penalty over an empty batch"));
    }
    if !(0.0..=1.0).contains(&sim_threshold) {
        return Err(Error::domain("sim_threshold must lie in [0, 1]"));
    }
    let n = batch.len();
    if n == 1 {
        return Ok(alloc::vec![0.0]);
    }
    let toks: Vec<_> = batch.iter().map(|t| tokens(t.as_ref())).collect();
    let sets: Vec<BTreeSet<(&str, &str)>> = toks
        .iter()
        .map(|t| {
            t.windows(2)
                .map(|w| (w[0].as_str(), w[1].as_str()))
                .collect()
        })
        .collect();
    let mut dup_counts = alloc::vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let similar = if sets[i].is_empty() && sets[j].is_empty() {
                toks[i] == toks[j]
            } else {
                jaccard(&sets[i], &sets[j]) >= sim_threshold
            };
            if similar {
                dup_counts[i] += 1;
                dup_counts[j] += 1;
            }
        }
    }
    let peers = (n - 1) as f64;
    Ok(dup_counts.into_iter().map(|c| c as f64 / peers).collect())
}

/// Pairwise text similarity used for anchor alignment.
pub trait Similarity {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cosine between bigram count vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct BigramCosine;

impl Similarity for BigramCosine {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let va = ngram_multiset(a, 2).expect("n = 2");
        let vb = ngram_multiset(b, 2).expect("n = 2");
        let dot: f64 = va
            .iter()
            .filter_map(|(g, &x)| vb.get(g).map(|&y| (x * y) as f64))
            .sum();
        if dot == 0.0 {
            return 0.0;
        }
        let norm = |v: &BTreeMap<String, usize>| sqrt(v.values().map(|&x| (x * x) as f64).sum());
        (dot / (norm(&va) * norm(&vb))).min(1.0)
    }
}

/// Best similarity between `question` and any anchor prompt.
pub fn align_score_with(question: &str, anchors: &AnchorPool, sim: &impl Similarity) -> f64 {
    anchors
        .examples()
        .iter()
        .map(|a| sim.similarity(question, &a.prompt))
        .fold(0.0, f64::max)
}

pub fn align_score(question: &str, anchors: &AnchorPool) -> f64 {
    align_score_with(question, anchors, &BigramCosine)
}

/// `1 - mean(p_hat)`, the fraction of rollouts answered incorrectly.
pub fn difficulty(stats: &[SuccessStats]) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::domain("difficulty of an empty batch"));
    }
    let mean = stats.iter().map(|s| s.p_hat).sum::<f64>() / stats.len() as f64;
    Ok(1.0 - mean)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchTextStats {
    pub n_questions: usize,
    pub mean_word_count: f64,
    pub lexical_diversity_pct: f64,
    pub per_question_rep_penalty: Vec<f64>,
}

impl BatchTextStats {
    pub fn compute<S: AsRef<str>>(batch: &[S], sim_threshold: f64) -> Result<Self> {
        let rep = rep_penalty(batch, sim_threshold)?;
        let words: usize = batch.iter().map(|t| word_count(t.as_ref())).sum();
        Ok(Self {
            n_questions: batch.len(),
            mean_word_count: words as f64 / batch.len() as f64,
            lexical_diversity_pct: lexical_diversity(batch, 2)?,
            per_question_rep_penalty: rep,
        })
    }

    pub fn mean_rep_penalty(&self) -> f64 {
        let n = self.per_question_rep_penalty.len().max(1) as f64;
        self.per_question_rep_penalty.iter().sum::<f64>() / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ngram_examples() {
        let g = ngram_multiset("a b c", 2).unwrap();
        assert_eq!(g.keys().collect::<Vec<_>>(), ["a b", "b c"]);
        assert!(ngram_multiset("a", 2).unwrap().is_empty());
        let g = ngram_multiset("A  b", 2).unwrap();
        assert_eq!(g.keys().collect::<Vec<_>>(), ["a b"]);
        assert!(ngram_multiset("a", 0).is_err());
    }

    #[test]
    fn punctuation_is_stripped() {
        assert_eq!(
            tokens("Solve difficulty-3 task #17!"),
            ["solve", "difficulty3", "task", "17"]
        );
        assert_eq!(tokens("a , b"), ["a", "b"]);
    }

    #[test]
    fn rep_penalty_examples() {
        assert_eq!(rep_penalty(&["x y z"; 4], 0.5).unwrap(), vec![1.0; 4]);
        assert_eq!(
            rep_penalty(&["a b", "c d", "e f"], 0.5).unwrap(),
            vec![0.0; 3]
        );
        assert_eq!(
            rep_penalty(&["a b c", "a b c", "d e f"], 0.5).unwrap(),
            vec![0.5, 0.5, 0.0]
        );
        assert_eq!(rep_penalty(&["only"], 0.5).unwrap(), vec![0.0]);
        assert_eq!(
            rep_penalty(&["one", "one", "two"], 0.5).unwrap(),
            vec![0.5, 0.5, 0.0]
        );
        assert!(rep_penalty::<&str>(&[], 0.5).is_err());
    }

    #[test]
    fn difficulty_examples() {
        let s = |p: f64| SuccessStats {
            question_id: String::new(),
            judgments: vec![true],
            p_hat: p,
            pseudo_label: String::new(),
            vote_fraction: 1.0,
        };
        assert_eq!(difficulty(&[s(1.0), s(1.0)]).unwrap(), 0.0);
        assert_eq!(difficulty(&[s(0.0)]).unwrap(), 1.0);
        assert_eq!(difficulty(&[s(0.25), s(0.75)]).unwrap(), 0.5);
        assert!(difficulty(&[]).is_err());
    }
}
