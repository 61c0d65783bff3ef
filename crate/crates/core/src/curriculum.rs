//! Human anchor pools, demonstration sampling, success-rate band filtering
//! and assembly of the mixed solver training set.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::prompts::MAX_EXAMPLES;
use crate::rewards::difficulty_shaping;
use crate::verification::SuccessStats;
use crate::{Error, Result};

/// A human-labelled question/answer pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorExample {
    pub id: String,
    pub prompt: String,
    #[serde(rename = "answer")]
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

/// Read-only pool of anchors with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AnchorExample>", into = "Vec<AnchorExample>")]
pub struct AnchorPool {
    examples: Vec<AnchorExample>,
}

impl AnchorPool {
    pub fn new(examples: Vec<AnchorExample>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, ex) in examples.iter().enumerate() {
            if ex.prompt.trim().is_empty() || ex.gold_answer.trim().is_empty() {
                return Err(Error::data(alloc::format!(
                    "anchor {i} ({}) has an empty prompt or answer",
                    ex.id
                )));
            }
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::data(alloc::format!("duplicate anchor id {}", ex.id)));
            }
        }
        Ok(Self { examples })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn examples(&self) -> &[AnchorExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&AnchorExample> {
        self.examples.iter().find(|e| e.id == id)
    }
}

impl TryFrom<Vec<AnchorExample>> for AnchorPool {
    type Error = Error;

    fn try_from(examples: Vec<AnchorExample>) -> Result<Self> {
        Self::new(examples)
    }
}

impl From<AnchorPool> for Vec<AnchorExample> {
    fn from(pool: AnchorPool) -> Self {
        pool.examples
    }
}

/// Anchors whose domain tag equals `tag`.
pub fn filter_by_domain(pool: &AnchorPool, tag: &str) -> Result<AnchorPool> {
    let kept: Vec<_> = pool
        .examples
        .iter()
        .filter(|e| e.domain.as_deref() == Some(tag))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::data(alloc::format!(
            "no anchors tagged with domain {tag:?}"
        )));
    }
    Ok(AnchorPool { examples: kept })
}

/// Demonstrations shown to the challenger for one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoContext {
    /// The uniformly drawn size before clamping to the pool.
    pub drawn_k: usize,
    pub examples: Vec<AnchorExample>,
}

impl DemoContext {
    pub fn k(&self) -> usize {
        self.examples.len()
    }
}

/// Draw `k` uniformly from `0..=k_max`, clamp it to the pool size, then pick
/// that many distinct anchors uniformly.
pub fn sample_k<R: Rng + ?Sized>(
    pool: &AnchorPool,
    k_max: usize,
    rng: &mut R,
) -> Result<DemoContext> {
    if k_max > MAX_EXAMPLES {
        return Err(Error::config(
            "k_max",
            alloc::format!("at most {MAX_EXAMPLES} demonstrations are supported"),
        ));
    }
    let drawn_k = rng.random_range(0..=k_max);
    let k = drawn_k.min(pool.len());
    let examples = rand::seq::index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool.examples[i].clone())
        .collect();
    Ok(DemoContext { drawn_k, examples })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Keep items whose success rate lies in the band.
    #[default]
    Absolute,
    /// Keep items whose rank quantile (by success rate) lies in the band.
    Quantile,
}

fn check_band(tau_low: f64, tau_high: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau_low) {
        return Err(Error::config("tau_low", "must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&tau_high) {
        return Err(Error::config("tau_high", "must lie in [0, 1]"));
    }
    if tau_low > tau_high {
        return Err(Error::config(
            "tau_low",
            alloc::format!("band is inverted: tau_low {tau_low} > tau_high {tau_high}"),
        ));
    }
    Ok(())
}

/// Indices of the items kept by the band, in input order.
pub fn band_indices(
    p_hats: &[f64],
    tau_low: f64,
    tau_high: f64,
    mode: BandMode,
) -> Result<Vec<usize>> {
    check_band(tau_low, tau_high)?;
    match mode {
        BandMode::Absolute => Ok((0..p_hats.len())
            .filter(|&i| tau_low <= p_hats[i] && p_hats[i] <= tau_high)
            .collect()),
        BandMode::Quantile => {
            let n = p_hats.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| p_hats[a].total_cmp(&p_hats[b]));
            let mut keep: Vec<usize> = order
                .into_iter()
                .enumerate()
                .filter(|&(rank, _)| {
                    let q = (rank as f64 + 0.5) / n as f64;
                    tau_low <= q && q <= tau_high
                })
                .map(|(_, i)| i)
                .collect();
            keep.sort_unstable();
            Ok(keep)
        }
    }
}

/// Items with `tau_low <= p_hat <= tau_high`, both ends inclusive.
pub fn filter_mid_band(
    stats: &[SuccessStats],
    tau_low: f64,
    tau_high: f64,
) -> Result<Vec<SuccessStats>> {
    let p: Vec<f64> = stats.iter().map(|s| s.p_hat).collect();
    Ok(band_indices(&p, tau_low, tau_high, BandMode::Absolute)?
        .into_iter()
        .map(|i| stats[i].clone())
        .collect())
}

/// Shaping-kernel weights rescaled to average 1. A batch whose raw weights
/// are all zero gets uniform weights.
pub fn curriculum_weights(p_hats: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = p_hats.iter().map(|&p| difficulty_shaping(p)).collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return alloc::vec![1.0; raw.len()];
    }
    let scale = raw.len() as f64 / total;
    raw.into_iter().map(|w| w * scale).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSource {
    Synthetic,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Pseudo { answer: String, vote_fraction: f64 },
    Gold(String),
}

impl Label {
    pub fn answer(&self) -> &str {
        match self {
            Label::Pseudo { answer, .. } | Label::Gold(answer) => answer,
        }
    }
}

/// One admitted solver training item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumItem {
    pub question_id: String,
    pub source: ItemSource,
    pub p_hat: f64,
    pub label: Label,
    pub w_cur: f64,
    pub w_hum: f64,
}

/// Merge band-filtered synthetic and human items into one shuffled list.
///
/// Synthetic items carry their majority vote and a curriculum weight
/// (uniform 1 when `weighted` is off); human items carry their gold answer
/// and `w_hum = 1`. An empty result is reported as
/// [`Error::EmptyCurriculum`].
pub fn build_mix<R: Rng + ?Sized>(
    synthetic: &[SuccessStats],
    human: &[(AnchorExample, SuccessStats)],
    weighted: bool,
    rng: &mut R,
) -> Result<Vec<CurriculumItem>> {
    let weights = if weighted {
        curriculum_weights(&synthetic.iter().map(|s| s.p_hat).collect::<Vec<_>>())
    } else {
        alloc::vec![1.0; synthetic.len()]
    };
    let mut mix: Vec<CurriculumItem> = synthetic
        .iter()
        .zip(weights)
        .map(|(s, w_cur)| CurriculumItem {
            question_id: s.question_id.clone(),
            source: ItemSource::Synthetic,
            p_hat: s.p_hat,
            label: Label::Pseudo {
                answer: s.pseudo_label.clone(),
                vote_fraction: s.vote_fraction,
            },
            w_cur,
            w_hum: 0.0,
        })
        .collect();
    mix.extend(human.iter().map(|(anchor, s)| CurriculumItem {
        question_id: anchor.id.clone(),
        source: ItemSource::Human,
        p_hat: s.p_hat,
        label: Label::Gold(anchor.gold_answer.clone()),
        w_cur: 1.0,
        w_hum: 1.0,
    }));
    if mix.is_empty() {
        return Err(Error::EmptyCurriculum);
    }
    mix.shuffle(rng);
    Ok(mix)
}
