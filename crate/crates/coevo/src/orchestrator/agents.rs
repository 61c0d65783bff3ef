//! The two policies the run loop drives.
//!
//! [`SimAgents`] is the simulated world with a trainable challenger and a
//! mastery-rule solver. [`TextAgents`] puts both roles behind a text backend;
//! it samples, judges and scores but cannot update weights.

use serde::{Deserialize, Serialize};

use coevo_core::config::{GenerationConfig, JudgeModeKind};
use coevo_core::curriculum::DemoContext;
use coevo_core::grpo::{policy_step, GrpoConfig, Policy, RolloutGroup, SoftmaxPolicy, StepSummary};
use coevo_core::prompts::{render_question_block, validate_question};
use coevo_core::rng::Stream;
use coevo_core::simworld::{
    sim_generate, sim_solve, SimChallenger, SimQuestion, SimSolver, TrainingOutcome,
};
use coevo_core::verification::judge_numeric;

use crate::backend::{
    generate, parse_boxed_answer, render_challenger_prompt, render_solver_prompt,
    GenerationRequest, TextGen,
};
use crate::error::{Error, Result};
use crate::judge::Judge;

/// One proposed question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// The raw completion.
    pub raw: String,
    pub valid: bool,
    /// The question statement, when the completion is well formed.
    pub question: String,
    /// Policy action and its log-probability, for trainable challengers.
    pub action: Option<usize>,
    pub log_prob: Option<f64>,
}

/// One solver sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub completion: String,
    /// The boxed answer; `None` is a format failure.
    pub answer: Option<String>,
}

/// A challenger group after scoring.
pub struct ScoredGroup<'a> {
    pub context: &'a DemoContext,
    pub candidates: &'a [Candidate],
    pub rewards: &'a [f64],
}

/// A solver item after its rollouts.
pub struct TrainedItem<'a> {
    pub question: &'a str,
    /// `w_cur`, or `lambda_hum * w_hum` for human items.
    pub weight: f64,
    /// Fraction of rollouts that were rewarded and actually correct.
    pub realized: f64,
}

/// Policy state reported in each log record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub challenger_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modal_bin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub challenger_logits: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_competence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frontier_bin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub competence: Option<Vec<f64>>,
}

pub trait Agents {
    /// `n` candidate questions for one demonstration context.
    fn propose(
        &mut self,
        context: &DemoContext,
        n: usize,
        rng: &mut Stream,
    ) -> Result<Vec<Candidate>>;

    /// `m` solver samples for a question.
    fn solve(&mut self, question: &str, m: usize, rng: &mut Stream) -> Result<Vec<Rollout>>;

    fn judge(&self, answer: &str, reference: &str) -> Result<bool>;

    /// Ground truth for a synthetic question, when the world knows it.
    fn reference_answer(&self, question: &str) -> Option<String>;

    fn update_challenger(
        &mut self,
        groups: &[ScoredGroup<'_>],
        cfg: &GrpoConfig,
    ) -> Result<Option<StepSummary>>;

    fn update_solver(&mut self, items: &[TrainedItem<'_>]) -> Result<()>;

    fn summary(&self) -> PolicySummary;

    fn save(&self) -> Result<serde_json::Value>;

    fn load(&mut self, state: serde_json::Value) -> Result<()>;
}

/// Simulated challenger and solver. The KL term is taken against the
/// initial challenger, which stays fixed for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAgents {
    pub challenger: SimChallenger,
    pub reference: SoftmaxPolicy,
    pub solver: SimSolver,
}

impl SimAgents {
    pub fn new(challenger: SimChallenger, solver: SimSolver) -> Self {
        Self {
            reference: challenger.policy.clone(),
            challenger,
            solver,
        }
    }

    fn parse(&self, question: &str) -> Option<SimQuestion> {
        SimQuestion::parse(question)
            .filter(|(bin, _)| *bin < self.solver.competence.len())
            .map(|(bin, nonce)| SimQuestion::new(bin, nonce))
    }
}

impl Agents for SimAgents {
    fn propose(
        &mut self,
        context: &DemoContext,
        n: usize,
        rng: &mut Stream,
    ) -> Result<Vec<Candidate>> {
        let bias = self.challenger.context_bias(context);
        Ok((0..n)
            .map(|_| {
                let q = sim_generate(&self.challenger, context, rng);
                let raw = render_question_block(&q.rendered_text);
                let (valid, question) = validate_question(&raw);
                Candidate {
                    raw,
                    valid,
                    question,
                    action: Some(q.bin),
                    log_prob: Some(self.challenger.policy.log_prob(&bias, q.bin)),
                }
            })
            .collect())
    }

    fn solve(&mut self, question: &str, m: usize, rng: &mut Stream) -> Result<Vec<Rollout>> {
        let Some(q) = self.parse(question) else {
            return Ok(vec![
                Rollout {
                    completion: String::new(),
                    answer: None
                };
                m
            ]);
        };
        Ok((0..m)
            .map(|_| {
                let (answer, _) = sim_solve(&self.solver, &q, rng);
                Rollout {
                    completion: format!("\\boxed{{{answer}}}"),
                    answer: Some(answer),
                }
            })
            .collect())
    }

    fn judge(&self, answer: &str, reference: &str) -> Result<bool> {
        Ok(judge_numeric(answer, reference).correct)
    }

    fn reference_answer(&self, question: &str) -> Option<String> {
        self.parse(question).map(|q| q.gold_answer())
    }

    fn update_challenger(
        &mut self,
        groups: &[ScoredGroup<'_>],
        cfg: &GrpoConfig,
    ) -> Result<Option<StepSummary>> {
        let mut rollouts = Vec::with_capacity(groups.len());
        for g in groups {
            let mut actions = Vec::with_capacity(g.candidates.len());
            let mut log_probs_old = Vec::with_capacity(g.candidates.len());
            for c in g.candidates {
                match (c.action, c.log_prob) {
                    (Some(a), Some(l)) => {
                        actions.push(a);
                        log_probs_old.push(l);
                    }
                    _ => {
                        return Err(Error::Config(
                            "simulated candidate without an action".into(),
                        ))
                    }
                }
            }
            rollouts.push(RolloutGroup {
                context: self.challenger.context_bias(g.context),
                actions,
                log_probs_old,
                rewards: g.rewards.to_vec(),
            });
        }
        Ok(Some(policy_step(
            &mut self.challenger.policy,
            &self.reference,
            &rollouts,
            cfg,
        )?))
    }

    fn update_solver(&mut self, items: &[TrainedItem<'_>]) -> Result<()> {
        let outcomes: Vec<TrainingOutcome> = items
            .iter()
            .filter_map(|it| {
                self.parse(it.question).map(|q| TrainingOutcome {
                    bin: q.bin,
                    weight: it.weight,
                    reward: it.realized,
                })
            })
            .collect();
        self.solver.learn(&outcomes);
        Ok(())
    }

    fn summary(&self) -> PolicySummary {
        PolicySummary {
            challenger_entropy: Some(self.challenger.policy.entropy(&[])),
            modal_bin: Some(self.challenger.modal_bin()),
            challenger_logits: Some(self.challenger.policy.logits.clone()),
            mean_competence: Some(self.solver.mean_competence()),
            frontier_bin: Some(self.solver.frontier_bin()),
            competence: Some(self.solver.competence.clone()),
        }
    }

    fn save(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::Integrity(e.to_string()))
    }

    fn load(&mut self, state: serde_json::Value) -> Result<()> {
        *self = serde_json::from_value(state).map_err(|e| Error::Integrity(e.to_string()))?;
        Ok(())
    }
}

/// Both roles served by a text backend. Updates are no-ops.
pub struct TextAgents<B> {
    backend: B,
    generation: GenerationConfig,
    judge: JudgeModeKind,
}

impl<B: TextGen> TextAgents<B> {
    pub fn new(backend: B, generation: GenerationConfig, judge: JudgeModeKind) -> Self {
        Self {
            backend,
            generation,
            judge,
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }
}

impl<B: TextGen> Agents for TextAgents<B> {
    fn propose(
        &mut self,
        context: &DemoContext,
        n: usize,
        _rng: &mut Stream,
    ) -> Result<Vec<Candidate>> {
        let req = GenerationRequest::new(
            render_challenger_prompt(&context.examples)?,
            &self.generation,
            n,
        );
        Ok(generate(&self.backend, &req)?
            .into_iter()
            .map(|raw| {
                let (valid, question) = validate_question(&raw);
                Candidate {
                    raw,
                    valid,
                    question,
                    action: None,
                    log_prob: None,
                }
            })
            .collect())
    }

    fn solve(&mut self, question: &str, m: usize, _rng: &mut Stream) -> Result<Vec<Rollout>> {
        let req = GenerationRequest::new(render_solver_prompt(question)?, &self.generation, m);
        Ok(generate(&self.backend, &req)?
            .into_iter()
            .map(|completion| Rollout {
                answer: parse_boxed_answer(&completion),
                completion,
            })
            .collect())
    }

    fn judge(&self, answer: &str, reference: &str) -> Result<bool> {
        Ok(Judge::from_mode(self.judge, &self.backend)
            .judge(answer, reference)?
            .correct)
    }

    fn reference_answer(&self, _question: &str) -> Option<String> {
        None
    }

    fn update_challenger(
        &mut self,
        _groups: &[ScoredGroup<'_>],
        _cfg: &GrpoConfig,
    ) -> Result<Option<StepSummary>> {
        Ok(None)
    }

    fn update_solver(&mut self, _items: &[TrainedItem<'_>]) -> Result<()> {
        Ok(())
    }

    fn summary(&self) -> PolicySummary {
        PolicySummary::default()
    }

    fn save(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!({ "backend_cursor": self.backend.cursor() }))
    }

    fn load(&mut self, state: serde_json::Value) -> Result<()> {
        let cursor = state.get("backend_cursor").cloned().unwrap_or_default();
        Ok(self.backend.restore_cursor(&cursor)?)
    }
}
