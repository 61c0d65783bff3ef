//! A closed world where the whole challenger/solver loop runs exactly.
//!
//! Questions are difficulty bins `0..D` tagged with a nonce. The challenger
//! is a softmax policy over bins whose logits are nudged toward the bins of
//! the demonstrations it was shown. The solver answers a bin-`d` question
//! correctly with probability `competence[d]`, otherwise it picks one of
//! three distractors, so majority votes are informative but fallible.
//!
//! The solver does not run a policy gradient. It follows a mastery rule,
//! `c += rate * w * r * (1 - c)` averaged over the trained items, with half
//! of each increment spilling into the neighbouring bins. Gains shrink as a
//! bin saturates, which is the property the curriculum depends on.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::{AnchorExample, AnchorPool, DemoContext};
use crate::grpo::SoftmaxPolicy;
use crate::rng::derive_seed;
use crate::{Error, Result};

const NONCE_RANGE: u64 = 1_000_000_000;
const N_DISTRACTORS: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimQuestion {
    pub bin: usize,
    pub nonce: u64,
    pub rendered_text: String,
}

impl SimQuestion {
    pub fn new(bin: usize, nonce: u64) -> Self {
        Self {
            bin,
            nonce,
            rendered_text: alloc::format!("solve difficulty-{bin} task #{nonce}"),
        }
    }

    /// Inverse of the rendering: `(bin, nonce)`.
    pub fn parse(text: &str) -> Option<(usize, u64)> {
        let rest = text.trim().strip_prefix("solve difficulty-")?;
        let (bin, rest) = rest.split_once(" task #")?;
        if bin.starts_with('+') || rest.starts_with('+') {
            return None;
        }
        Some((bin.parse().ok()?, rest.parse().ok()?))
    }

    fn answer_seed(&self) -> u64 {
        derive_seed(0x5157_4f52_4c44, &[self.bin as u64, self.nonce])
    }

    pub fn gold_answer(&self) -> String {
        (self.answer_seed() % 100_000).to_string()
    }

    /// The `i`-th wrong answer, `i < 3`.
    pub fn distractor(&self, i: u64) -> String {
        (self.answer_seed() % 100_000 + 1 + i).to_string()
    }
}

/// Difficulty-bin proposer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimChallenger {
    pub policy: SoftmaxPolicy,
    /// How strongly demonstrations pull generation toward their bins.
    pub anchor_prior_strength: f64,
}

impl SimChallenger {
    pub fn new(bins: usize, anchor_prior_strength: f64) -> Self {
        Self {
            policy: SoftmaxPolicy::uniform(bins),
            anchor_prior_strength,
        }
    }

    pub fn bins(&self) -> usize {
        self.policy.n_actions()
    }

    /// `gamma * (count of demonstrations per bin)`; empty when that is all
    /// zeros. Demonstrations that are not sim questions are ignored.
    pub fn context_bias(&self, context: &DemoContext) -> Vec<f64> {
        let d = self.bins();
        let mut hist = vec![0.0; d];
        let mut any = false;
        for ex in &context.examples {
            if let Some((bin, _)) = SimQuestion::parse(&ex.prompt) {
                if bin < d {
                    hist[bin] += 1.0;
                    any = true;
                }
            }
        }
        if !any || self.anchor_prior_strength == 0.0 {
            return Vec::new();
        }
        hist.iter()
            .map(|h| self.anchor_prior_strength * h)
            .collect()
    }

    pub fn distribution(&self, context: &DemoContext) -> Vec<f64> {
        self.policy.probs(&self.context_bias(context))
    }

    /// Most probable bin with no demonstrations.
    pub fn modal_bin(&self) -> usize {
        self.policy.mode(&[])
    }
}

/// Draw a question from `softmax(logits + gamma * anchor_hist)`.
pub fn sim_generate<R: Rng + ?Sized>(
    challenger: &SimChallenger,
    context: &DemoContext,
    rng: &mut R,
) -> SimQuestion {
    let bias = challenger.context_bias(context);
    let bin = challenger.policy.sample_with(&bias, rng.random::<f64>());
    SimQuestion::new(bin, rng.random_range(0..NONCE_RANGE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSolver {
    pub competence: Vec<f64>,
    pub mastery_rate: f64,
}

/// One trained item as the mastery rule sees it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub bin: usize,
    /// Reward weight of the item (`w_cur`, or `lambda_hum * w_hum`).
    pub weight: f64,
    /// Realized reward in `[0, 1]`.
    pub reward: f64,
}

impl SimSolver {
    pub fn new(competence: Vec<f64>, mastery_rate: f64) -> Result<Self> {
        if competence.is_empty() || competence.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::config(
                "initial_competence",
                "values must lie in [0, 1]",
            ));
        }
        if !(mastery_rate > 0.0 && mastery_rate <= 1.0) {
            return Err(Error::config("mastery_rate", "must lie in (0, 1]"));
        }
        Ok(Self {
            competence,
            mastery_rate,
        })
    }

    /// Linear decay from 0.95 at bin 0 to 0.05 at the last bin.
    pub fn linear_profile(bins: usize) -> Vec<f64> {
        if bins == 1 {
            return vec![0.5];
        }
        (0..bins)
            .map(|d| 0.95 - 0.9 * d as f64 / (bins - 1) as f64)
            .collect()
    }

    pub fn response_prob(&self, bin: usize) -> f64 {
        self.competence[bin]
    }

    pub fn mean_competence(&self) -> f64 {
        self.competence.iter().sum::<f64>() / self.competence.len() as f64
    }

    /// Bin whose competence is closest to one half (lowest index on ties).
    pub fn frontier_bin(&self) -> usize {
        let mut best = (0, f64::INFINITY);
        for (d, &c) in self.competence.iter().enumerate() {
            let gap = crate::math::abs(c - 0.5);
            if gap < best.1 {
                best = (d, gap);
            }
        }
        best.0
    }

    /// Apply the mastery rule, averaged over `outcomes`. Increments are
    /// computed from the competence before the step.
    pub fn learn(&mut self, outcomes: &[TrainingOutcome]) {
        if outcomes.is_empty() {
            return;
        }
        let d = self.competence.len();
        let scale = self.mastery_rate / outcomes.len() as f64;
        let mut delta = vec![0.0; d];
        for o in outcomes.iter().filter(|o| o.bin < d) {
            let inc = scale * o.weight * o.reward * (1.0 - self.competence[o.bin]);
            delta[o.bin] += inc;
            if o.bin > 0 {
                delta[o.bin - 1] += inc / 2.0;
            }
            if o.bin + 1 < d {
                delta[o.bin + 1] += inc / 2.0;
            }
        }
        for (c, dc) in self.competence.iter_mut().zip(delta) {
            *c = (*c + dc).clamp(0.0, 1.0);
        }
    }
}

/// Answer a question: gold with probability `competence[bin]`, else a
/// uniformly chosen distractor.
pub fn sim_solve<R: Rng + ?Sized>(
    solver: &SimSolver,
    question: &SimQuestion,
    rng: &mut R,
) -> (String, bool) {
    let c = solver.response_prob(question.bin);
    if rng.random::<f64>() < c {
        (question.gold_answer(), true)
    } else {
        (
            question.distractor(rng.random_range(0..N_DISTRACTORS)),
            false,
        )
    }
}

/// Exact expected challenger reward per bin when `p_hat` is the mean of `m`
/// Bernoulli(`competence[d]`) rollouts.
pub fn challenger_reward_landscape(
    solver: &SimSolver,
    m: usize,
    reward: impl Fn(f64) -> f64,
) -> Vec<f64> {
    solver
        .competence
        .iter()
        .map(|&c| {
            (0..=m)
                .map(|k| binomial_pmf(m, k, c) * reward(k as f64 / m as f64))
                .sum()
        })
        .collect()
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    let mut coeff = 1.0;
    for i in 0..k {
        coeff *= (n - i) as f64 / (i + 1) as f64;
    }
    coeff * libm::pow(p, k as f64) * libm::pow(1.0 - p, (n - k) as f64)
}

/// Layout of a simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimScenario {
    pub bins: usize,
    /// Defaults to [`SimSolver::linear_profile`].
    pub initial_competence: Option<Vec<f64>>,
    pub mastery_rate: f64,
    pub anchor_prior_strength: f64,
    /// Size of the question universe anchors are drawn from.
    pub universe_size: usize,
    pub anchor_pool_size: usize,
    /// Explicit anchor bins; overrides sampling from the universe.
    pub anchor_bins: Option<Vec<usize>>,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            bins: 16,
            initial_competence: None,
            mastery_rate: 0.2,
            anchor_prior_strength: 1.0,
            universe_size: 1000,
            anchor_pool_size: 50,
            anchor_bins: None,
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::config("sim.bins", "must be positive"));
        }
        if let Some(c) = &self.initial_competence {
            if c.len() != self.bins {
                return Err(Error::config(
                    "sim.initial_competence",
                    "length must equal sim.bins",
                ));
            }
        }
        if !self.anchor_prior_strength.is_finite() || self.anchor_prior_strength < 0.0 {
            return Err(Error::config(
                "sim.anchor_prior_strength",
                "must be finite and >= 0",
            ));
        }
        if self.anchor_pool_size > self.universe_size {
            return Err(Error::config(
                "sim.anchor_pool_size",
                "cannot exceed sim.universe_size",
            ));
        }
        if let Some(bins) = &self.anchor_bins {
            if bins.iter().any(|&b| b >= self.bins) {
                return Err(Error::config("sim.anchor_bins", "bin out of range"));
            }
        }
        self.initial_solver().map(|_| ())
    }

    pub fn initial_solver(&self) -> Result<SimSolver> {
        let c = self
            .initial_competence
            .clone()
            .unwrap_or_else(|| SimSolver::linear_profile(self.bins));
        SimSolver::new(c, self.mastery_rate)
    }

    pub fn initial_challenger(&self) -> SimChallenger {
        SimChallenger::new(self.bins, self.anchor_prior_strength)
    }

    /// Human anchors for this world. The universe spreads questions evenly
    /// over the bins; anchors are a uniform sample of it.
    pub fn anchor_pool<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AnchorPool> {
        let universe_question = |i: usize| {
            let bin = i * self.bins / self.universe_size.max(1);
            SimQuestion::new(bin, derive_seed(0xA2C4, &[i as u64]) % NONCE_RANGE)
        };
        let picked: Vec<(usize, SimQuestion)> = match &self.anchor_bins {
            Some(bins) => bins
                .iter()
                .enumerate()
                .map(|(i, &b)| {
                    (
                        i,
                        SimQuestion::new(b, derive_seed(0xA2C5, &[i as u64]) % NONCE_RANGE),
                    )
                })
                .collect(),
            None => {
                let mut idx =
                    rand::seq::index::sample(rng, self.universe_size, self.anchor_pool_size)
                        .into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| (i, universe_question(i))).collect()
            }
        };
        AnchorPool::new(
            picked
                .into_iter()
                .map(|(i, q)| AnchorExample {
                    id: alloc::format!("anchor-{i}"),
                    gold_answer: q.gold_answer(),
                    prompt: q.rendered_text,
                    domain: Some("sim".to_string()),
                })
                .collect(),
        )
    }
}
