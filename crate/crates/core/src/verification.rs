//! Answer judging, majority-vote pseudo-labels and success-rate estimates.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::abs;
use crate::{Error, Result};

/// Absolute tolerance of the numeric judge.
pub const NUMERIC_TOLERANCE: f64 = 1e-9;

// Longest first so "square feet" wins over "feet".
const UNIT_SUFFIXES: &[&str] = &[
    "square meters",
    "square feet",
    "square units",
    "centimeters",
    "kilometers",
    "kilograms",
    "degrees",
    "dollars",
    "minutes",
    "seconds",
    "meters",
    "degree",
    "inches",
    "grams",
    "hours",
    "units",
    "cents",
    "miles",
    "feet",
    "days",
    "unit",
    "cm",
    "km",
    "kg",
    "ft",
    "m",
    "g",
    "s",
    "°",
    "^\\circ",
    "%",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMethod {
    Exact,
    Numeric,
    BackendJudge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub correct: bool,
    pub method: JudgeMethod,
    pub normalized_answer: String,
    pub normalized_reference: String,
}

/// Canonical answer form: trimmed, case-folded, whitespace collapsed and a
/// trailing unit stripped when what remains is a number.
pub fn normalize_answer(text: &str) -> String {
    // plain numerals carry no case, spacing or unit to strip
    if !text.is_empty()
        && text
            .bytes()
            .all(|b| b.is_ascii_digit() || b == b'.' || b == b'-' || b == b'/')
    {
        return text.to_string();
    }
    let mut s = text
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    loop {
        let stripped = UNIT_SUFFIXES.iter().find_map(|unit| {
            let head = s.strip_suffix(unit)?.trim_end();
            let spaced = head.len() < s.len() - unit.len();
            // word units need a separating space so "5m" style tokens and
            // words that merely end in "s" are left alone
            let symbol = !unit.chars().all(|c| c.is_ascii_alphabetic());
            ((spaced || symbol) && parse_number(head).is_some()).then(|| head.to_string())
        });
        match stripped {
            Some(next) => s = next,
            None => return s,
        }
    }
}

/// Parse a decimal, integer, `p/q` or `\frac{p}{q}` into a value.
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    for prefix in ["\\frac{", "\\dfrac{", "\\tfrac{"] {
        if let Some(rest) = t.strip_prefix(prefix) {
            let (num, rest) = rest.split_once("}{")?;
            let den = rest.strip_suffix('}')?;
            return ratio(parse_plain(num)?, parse_plain(den)?);
        }
    }
    if let Some((num, den)) = t.split_once('/') {
        return ratio(parse_plain(num)?, parse_plain(den)?);
    }
    parse_plain(t)
}

fn parse_plain(text: &str) -> Option<f64> {
    let t = text.trim();
    let t = t
        .strip_prefix('(')
        .and_then(|inner| inner.strip_suffix(')'))
        .unwrap_or(t)
        .trim();
    if t.is_empty()
        || !t
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | ','))
    {
        return None;
    }
    let cleaned: String = t.chars().filter(|&c| c != ',').collect();
    let value: f64 = cleaned.parse().ok()?;
    value.is_finite().then_some(value)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Compare normalized strings.
pub fn judge_exact(answer: &str, reference: &str) -> Judgment {
    let a = normalize_answer(answer);
    let r = normalize_answer(reference);
    Judgment {
        correct: a == r,
        method: JudgeMethod::Exact,
        normalized_answer: a,
        normalized_reference: r,
    }
}

/// Compare numerically when both sides parse, otherwise fall back to the
/// exact comparison (and record that method).
pub fn judge_numeric(answer: &str, reference: &str) -> Judgment {
    let exact = judge_exact(answer, reference);
    match (
        parse_number(&exact.normalized_answer),
        parse_number(&exact.normalized_reference),
    ) {
        (Some(a), Some(r)) => Judgment {
            correct: abs(a - r) <= NUMERIC_TOLERANCE,
            method: JudgeMethod::Numeric,
            ..exact
        },
        _ => exact,
    }
}

/// Turn a judge backend's reply into a judgment. The reply must begin with
/// the word `Yes` or `No`.
pub fn judge_from_verdict(answer: &str, reference: &str, reply: &str) -> Result<Judgment> {
    let reply_trim = reply.trim_start();
    let leads_with = |word: &str| {
        reply_trim
            .strip_prefix(word)
            .is_some_and(|rest| !rest.starts_with(|c: char| c.is_alphanumeric()))
    };
    let correct = if leads_with("Yes") {
        true
    } else if leads_with("No") {
        false
    } else {
        return Err(Error::JudgeProtocol(reply.to_string()));
    };
    Ok(Judgment {
        correct,
        method: JudgeMethod::BackendJudge,
        normalized_answer: normalize_answer(answer),
        normalized_reference: normalize_answer(reference),
    })
}

/// Modal normalized answer and its share of the votes. Ties go to the
/// lexicographically smallest normalized form.
pub fn majority_vote<S: AsRef<str>>(answers: &[S]) -> Result<(String, f64)> {
    if answers.is_empty() {
        return Err(Error::domain("majority vote over an empty answer list"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for answer in answers {
        *counts.entry(normalize_answer(answer.as_ref())).or_default() += 1;
    }
    let mut best: Option<(&String, usize)> = None;
    for (label, &count) in &counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    let (label, count) = best.expect("non-empty");
    Ok((label.clone(), count as f64 / answers.len() as f64))
}

/// Mean of the correctness indicators.
pub fn success_rate(judgments: &[bool]) -> Result<f64> {
    if judgments.is_empty() {
        return Err(Error::domain("success rate needs at least one rollout"));
    }
    let hits = judgments.iter().filter(|&&j| j).count();
    Ok(hits as f64 / judgments.len() as f64)
}

/// Population variance of the correctness indicators, `p(1 - p)`.
pub fn judgment_variance(judgments: &[bool]) -> Result<f64> {
    let p = success_rate(judgments)?;
    Ok(p * (1.0 - p))
}

/// Rollout record for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessStats {
    pub question_id: String,
    pub judgments: Vec<bool>,
    pub p_hat: f64,
    pub pseudo_label: String,
    pub vote_fraction: f64,
}

impl SuccessStats {
    /// Build from already-judged rollouts and the sampled answers they came
    /// from.
    pub fn new<S: AsRef<str>>(
        question_id: impl Into<String>,
        answers: &[S],
        judgments: Vec<bool>,
    ) -> Result<Self> {
        if answers.len() != judgments.len() {
            return Err(Error::domain("answers and judgments differ in length"));
        }
        let (pseudo_label, vote_fraction) = majority_vote(answers)?;
        let p_hat = success_rate(&judgments)?;
        Ok(Self {
            question_id: question_id.into(),
            judgments,
            p_hat,
            pseudo_label,
            vote_fraction,
        })
    }

    /// Judge every answer against `reference` when one exists, else against
    /// the majority vote of the answers themselves.
    pub fn from_answers<S: AsRef<str>>(
        question_id: impl Into<String>,
        answers: &[S],
        reference: Option<&str>,
    ) -> Result<Self> {
        let (pseudo, _) = majority_vote(answers)?;
        let target = reference.map(ToString::to_string).unwrap_or(pseudo);
        let judgments = answers
            .iter()
            .map(|a| judge_numeric(a.as_ref(), &target).correct)
            .collect();
        Self::new(question_id, answers, judgments)
    }

    /// Number of rollouts `M`.
    pub fn rollouts(&self) -> usize {
        self.judgments.len()
    }

    /// Check the record's internal consistency.
    pub fn validate(&self) -> Result<()> {
        let m = self.judgments.len();
        if m == 0 {
            return Err(Error::data("success stats need at least one judgment"));
        }
        let expected = success_rate(&self.judgments)?;
        if abs(self.p_hat - expected) > 1e-12 {
            return Err(Error::data(alloc::format!(
                "p_hat {} does not match {} of {} correct",
                self.p_hat,
                self.judgments.iter().filter(|&&j| j).count(),
                m
            )));
        }
        let min_vote = 1.0 / m as f64;
        if !(self.vote_fraction >= min_vote - 1e-12 && self.vote_fraction <= 1.0) {
            return Err(Error::data(alloc::format!(
                "vote_fraction {} outside [1/M, 1]",
                self.vote_fraction
            )));
        }
        Ok(())
    }
}
