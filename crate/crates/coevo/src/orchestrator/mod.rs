//! The alternating challenger/solver loop.
//!
//! Each cycle runs the configured number of challenger steps, then solver
//! steps. The first solver step of a cycle refreshes the training set:
//! fresh challenger questions and the human anchors are rolled out, scored,
//! band-filtered and mixed, and the remaining solver steps of the cycle keep
//! training on that mix. Every random draw comes from a stream keyed by the
//! step and slot it serves, so a run is a pure function of its seed and a
//! restored checkpoint continues exactly where it stopped.

mod agents;
mod checkpoint;
mod record;

use serde::{Deserialize, Serialize};

use coevo_core::config::{ChallengerRewardKind, RunConfig};
use coevo_core::curriculum::{
    band_indices, build_mix, sample_k, AnchorExample, AnchorPool, CurriculumItem, DemoContext,
    ItemSource,
};
use coevo_core::diversity::{align_score, lexical_diversity, rep_penalty, word_count};
use coevo_core::rewards::{
    challenger_reward_abszero, challenger_reward_rfew, challenger_reward_rzero,
    challenger_reward_spice, solver_reward_composite, solver_reward_rfew, ChallengerRewardInput,
    RewardWeights,
};
use coevo_core::rng::{self, tag, Stream};
use coevo_core::schedule::{Phase, Schedule, Slot};
use coevo_core::verification::{judgment_variance, majority_vote, SuccessStats};

pub use agents::{
    Agents, Candidate, PolicySummary, Rollout, ScoredGroup, SimAgents, TextAgents, TrainedItem,
};
pub use checkpoint::{config_hash, Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use record::{
    read_run_log, Admission, GroupAudit, LogWriter, MetricsRow, RewardStats, StepMetrics,
    StepRecord, LOG_SCHEMA_VERSION,
};

use crate::error::Result;

/// How solver rollouts are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverScoring {
    /// Correctness only.
    Indicator,
    /// Format/accuracy composite beneath the item weight (text backends).
    Composite,
}

/// A training item together with the question text it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixEntry {
    pub item: CurriculumItem,
    pub question: String,
}

/// Everything needed to continue a run besides the config and anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    /// Next global step to execute (1-based).
    pub next_step: u64,
    /// Training set of the current cycle, once refreshed.
    pub mix: Option<Vec<MixEntry>>,
    pub agents: serde_json::Value,
}

pub struct Orchestrator<A> {
    cfg: RunConfig,
    anchors: AnchorPool,
    agents: A,
    scoring: SolverScoring,
    next_step: u64,
    mix: Option<Vec<MixEntry>>,
}

impl Orchestrator<SimAgents> {
    /// A simulated run. The anchor pool comes from the scenario unless one
    /// is supplied.
    pub fn simulated(cfg: RunConfig, anchors: Option<AnchorPool>) -> Result<Self> {
        cfg.validate()?;
        let anchors = match anchors {
            Some(a) => a,
            None => cfg
                .sim
                .anchor_pool(&mut rng::stream(cfg.seed, &[tag::POOL]))?,
        };
        let agents = SimAgents::new(cfg.sim.initial_challenger(), cfg.sim.initial_solver()?);
        Self::new(cfg, anchors, agents, SolverScoring::Indicator)
    }
}

impl<A: Agents> Orchestrator<A> {
    pub fn new(
        cfg: RunConfig,
        anchors: AnchorPool,
        agents: A,
        scoring: SolverScoring,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            anchors,
            agents,
            scoring,
            next_step: 1,
            mix: None,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn agents(&self) -> &A {
        &self.agents
    }

    pub fn anchors(&self) -> &AnchorPool {
        &self.anchors
    }

    pub fn next_step(&self) -> u64 {
        self.next_step
    }

    pub fn total_steps(&self) -> u64 {
        self.schedule().total_steps(self.cfg.iterations)
    }

    pub fn is_done(&self) -> bool {
        self.next_step > self.total_steps()
    }

    fn schedule(&self) -> Schedule {
        self.cfg.schedule()
    }

    pub fn state(&self) -> Result<RunState> {
        Ok(RunState {
            next_step: self.next_step,
            mix: self.mix.clone(),
            agents: self.agents.save()?,
        })
    }

    pub fn restore_state(&mut self, state: RunState) -> Result<()> {
        self.agents.load(state.agents)?;
        self.next_step = state.next_step;
        self.mix = state.mix;
        Ok(())
    }

    /// Run every remaining step, handing each record to `sink` as soon as
    /// it exists.
    pub fn run(&mut self, mut sink: impl FnMut(&StepRecord) -> Result<()>) -> Result<()> {
        while let Some(record) = self.step()? {
            sink(&record)?;
        }
        Ok(())
    }

    /// Run to completion and collect the log.
    pub fn run_collect(&mut self) -> Result<Vec<StepRecord>> {
        let mut log = Vec::new();
        self.run(|r| {
            log.push(r.clone());
            Ok(())
        })?;
        Ok(log)
    }

    /// Execute the next step, or return `None` when the run is over.
    pub fn step(&mut self) -> Result<Option<StepRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        let step = self.next_step;
        let slot = self.schedule().slot(step);
        let record = match slot.phase {
            Phase::Challenger => self.challenger_step(step, slot)?,
            Phase::Solver => self.solver_step(step, slot)?,
        };
        self.next_step += 1;
        Ok(Some(record))
    }

    fn stream(&self, path: &[u64]) -> Stream {
        rng::stream(self.cfg.seed, path)
    }

    fn context(&self, path: &[u64]) -> Result<DemoContext> {
        if !self.cfg.grounding || self.anchors.is_empty() {
            return Ok(DemoContext {
                drawn_k: 0,
                examples: Vec::new(),
            });
        }
        Ok(sample_k(
            &self.anchors,
            self.cfg.k_max,
            &mut self.stream(path),
        )?)
    }

    /// Roll a question out `M` times and judge the answers against
    /// `reference`, or against their own majority vote when there is none.
    fn estimate(
        &mut self,
        id: String,
        question: &str,
        reference: Option<&str>,
        path: &[u64],
    ) -> Result<SuccessStats> {
        let rollouts = self
            .agents
            .solve(question, self.cfg.rollouts, &mut self.stream(path))?;
        let answers: Vec<String> = rollouts
            .iter()
            .map(|r| r.answer.clone().unwrap_or_default())
            .collect();
        let target = match reference {
            Some(r) => r.to_string(),
            None => majority_vote(&answers)?.0,
        };
        let mut judgments = Vec::with_capacity(rollouts.len());
        for r in &rollouts {
            judgments.push(match &r.answer {
                Some(a) if !target.is_empty() => self.agents.judge(a, &target)?,
                _ => false,
            });
        }
        Ok(SuccessStats::new(id, &answers, judgments)?)
    }

    fn challenger_reward(&self, input: &ChallengerRewardInput) -> Result<f64> {
        let w: &RewardWeights = &self.cfg.rewards;
        Ok(match self.cfg.challenger_reward {
            ChallengerRewardKind::Rfew => challenger_reward_rfew(input, w)?,
            ChallengerRewardKind::Rzero => challenger_reward_rzero(input, w)?,
            ChallengerRewardKind::Abszero => challenger_reward_abszero(input)?,
            ChallengerRewardKind::Spice => challenger_reward_spice(input)?,
        })
    }

    fn base_record(&self, step: u64, slot: Slot) -> StepRecord {
        StepRecord {
            schema_version: LOG_SCHEMA_VERSION,
            step,
            cycle: slot.cycle,
            phase: slot.phase,
            index_in_phase: slot.index_in_phase,
            refresh: slot.is_refresh(),
            skipped: None,
            rewards: None,
            accuracy: None,
            metrics: None,
            admission: None,
            optimizer: None,
            policy: PolicySummary::default(),
            groups: Vec::new(),
            trained_p_hats: Vec::new(),
            rng_seed: rng::derive_seed(self.cfg.seed, &[step]),
        }
    }

    fn metrics(questions: &[&str], p_hats: &[f64]) -> Result<Option<StepMetrics>> {
        if questions.is_empty() {
            return Ok(None);
        }
        debug_assert_eq!(questions.len(), p_hats.len());
        let n = questions.len() as f64;
        let words: usize = questions.iter().map(|q| word_count(q)).sum();
        Ok(Some(StepMetrics {
            diversity: lexical_diversity(questions, 2)?,
            mean_length: words as f64 / n,
            difficulty: 1.0 - p_hats.iter().sum::<f64>() / n,
        }))
    }

    fn challenger_step(&mut self, step: u64, slot: Slot) -> Result<StepRecord> {
        let cfg = self.cfg.clone();
        let mut contexts = Vec::with_capacity(cfg.batch_size);
        let mut candidates = Vec::with_capacity(cfg.batch_size);
        let mut audits = Vec::with_capacity(cfg.batch_size);
        for b in 0..cfg.batch_size as u64 {
            let ctx = self.context(&[tag::CONTEXT, step, b])?;
            let cands = self.agents.propose(
                &ctx,
                cfg.group_size,
                &mut self.stream(&[tag::QUESTION, step, b]),
            )?;
            let raw: Vec<&str> = cands.iter().map(|c| c.raw.as_str()).collect();
            let rep = rep_penalty(&raw, cfg.sim_threshold)?;
            let mut inputs = Vec::with_capacity(cands.len());
            let mut rewards = Vec::with_capacity(cands.len());
            for (g, cand) in cands.iter().enumerate() {
                let input = if cand.valid {
                    let reference = self.agents.reference_answer(&cand.question);
                    let stats = self.estimate(
                        format!("s{step}-b{b}-g{g}"),
                        &cand.question,
                        reference.as_deref(),
                        &[tag::SOLVE, step, b, g as u64],
                    )?;
                    let mut input = ChallengerRewardInput::valid(stats.p_hat)
                        .with_rep_penalty(rep[g])
                        .with_variance(judgment_variance(&stats.judgments)?);
                    if cfg.grounding && cfg.rewards.lambda_align > 0.0 && !self.anchors.is_empty() {
                        input = input.with_align(align_score(&cand.question, &self.anchors));
                    }
                    input
                } else {
                    ChallengerRewardInput::invalid()
                };
                rewards.push(self.challenger_reward(&input)?);
                inputs.push(input);
            }
            audits.push(GroupAudit {
                anchor_ids: ctx.examples.iter().map(|a| a.id.clone()).collect(),
                questions: cands.iter().map(|c| c.question.clone()).collect(),
                inputs,
                rewards,
            });
            contexts.push(ctx);
            candidates.push(cands);
        }
        let groups: Vec<ScoredGroup<'_>> = contexts
            .iter()
            .zip(&candidates)
            .zip(&audits)
            .map(|((context, cands), audit)| ScoredGroup {
                context,
                candidates: cands,
                rewards: &audit.rewards,
            })
            .collect();
        let optimizer = self
            .agents
            .update_challenger(&groups, &cfg.challenger_optim)?;

        let mut record = self.base_record(step, slot);
        let all_rewards: Vec<f64> = audits
            .iter()
            .flat_map(|a| a.rewards.iter().copied())
            .collect();
        let valid: Vec<(&str, f64)> = audits
            .iter()
            .flat_map(|a| a.questions.iter().zip(&a.inputs))
            .filter(|(_, i)| i.valid)
            .map(|(q, i)| (q.as_str(), i.p_hat))
            .collect();
        let questions: Vec<&str> = valid.iter().map(|v| v.0).collect();
        let p_hats: Vec<f64> = valid.iter().map(|v| v.1).collect();
        record.rewards = RewardStats::of(&all_rewards);
        record.metrics = Self::metrics(&questions, &p_hats)?;
        record.optimizer = optimizer;
        record.policy = self.agents.summary();
        record.groups = audits;
        Ok(record)
    }

    /// Build the cycle's training set.
    fn refresh(&mut self, step: u64) -> Result<(Option<Vec<MixEntry>>, Admission)> {
        let cfg = self.cfg.clone();
        let mut admission = Admission::default();
        let mut synthetic: Vec<(String, SuccessStats)> = Vec::new();
        for b in 0..cfg.batch_size as u64 {
            let ctx = self.context(&[tag::REFRESH, tag::CONTEXT, step, b])?;
            let cand = self
                .agents
                .propose(
                    &ctx,
                    1,
                    &mut self.stream(&[tag::REFRESH, tag::QUESTION, step, b]),
                )?
                .remove(0);
            admission.synthetic_generated += 1;
            if !cand.valid {
                continue;
            }
            admission.synthetic_valid += 1;
            let reference = self.agents.reference_answer(&cand.question);
            let stats = self.estimate(
                format!("q{step}-{b}"),
                &cand.question,
                reference.as_deref(),
                &[tag::REFRESH, tag::SOLVE, step, b],
            )?;
            synthetic.push((cand.question, stats));
        }
        let mut human: Vec<(AnchorExample, SuccessStats)> = Vec::new();
        if cfg.grounding {
            let anchors: Vec<AnchorExample> = self.anchors.examples().to_vec();
            for (i, anchor) in anchors.into_iter().enumerate() {
                let stats = self.estimate(
                    anchor.id.clone(),
                    &anchor.prompt,
                    Some(&anchor.gold_answer),
                    &[tag::ANCHOR_SOLVE, step, i as u64],
                )?;
                human.push((anchor, stats));
            }
        }
        admission.human_total = human.len();
        if cfg.curriculum {
            let keep = |p: Vec<f64>| band_indices(&p, cfg.tau_low, cfg.tau_high, cfg.band_mode);
            let idx = keep(synthetic.iter().map(|s| s.1.p_hat).collect())?;
            synthetic = idx.into_iter().map(|i| synthetic[i].clone()).collect();
            let idx = keep(human.iter().map(|h| h.1.p_hat).collect())?;
            human = idx.into_iter().map(|i| human[i].clone()).collect();
        }
        admission.synthetic_admitted = synthetic.len();
        admission.human_admitted = human.len();

        let stats: Vec<SuccessStats> = synthetic.iter().map(|s| s.1.clone()).collect();
        let items = match build_mix(
            &stats,
            &human,
            cfg.curriculum,
            &mut self.stream(&[tag::MIX, step]),
        ) {
            Ok(items) => items,
            Err(coevo_core::Error::EmptyCurriculum) => return Ok((None, admission)),
            Err(e) => return Err(e.into()),
        };
        let text_of = |item: &CurriculumItem| -> String {
            match item.source {
                ItemSource::Synthetic => synthetic
                    .iter()
                    .find(|s| s.1.question_id == item.question_id)
                    .map(|s| s.0.clone()),
                ItemSource::Human => human
                    .iter()
                    .find(|h| h.0.id == item.question_id)
                    .map(|h| h.0.prompt.clone()),
            }
            .expect("mixed item comes from the inputs")
        };
        let mix = items
            .into_iter()
            .map(|item| MixEntry {
                question: text_of(&item),
                item,
            })
            .collect();
        Ok((Some(mix), admission))
    }

    fn solver_step(&mut self, step: u64, slot: Slot) -> Result<StepRecord> {
        let mut record = self.base_record(step, slot);
        if slot.is_refresh() {
            let (mix, admission) = self.refresh(step)?;
            record.admission = Some(admission);
            self.mix = mix;
        }
        let Some(mix) = self.mix.clone() else {
            record.skipped = Some("empty curriculum".to_string());
            record.policy = self.agents.summary();
            return Ok(record);
        };
        let w = self.cfg.rewards;
        let mut rewards = Vec::new();
        let mut hits = 0usize;
        let mut trained = Vec::with_capacity(mix.len());
        for (i, entry) in mix.iter().enumerate() {
            let rollouts = self.agents.solve(
                &entry.question,
                self.cfg.group_size,
                &mut self.stream(&[tag::TRAIN, step, i as u64]),
            )?;
            let label = entry.item.label.answer();
            let reference = self.agents.reference_answer(&entry.question);
            let weight = solver_reward_rfew(&entry.item, true, true, &w)?;
            let mut realized = 0usize;
            for r in &rollouts {
                let correct = match &r.answer {
                    Some(a) if !label.is_empty() => self.agents.judge(a, label)?,
                    _ => false,
                };
                let reward = match self.scoring {
                    SolverScoring::Indicator => {
                        solver_reward_rfew(&entry.item, correct, correct, &w)?
                    }
                    SolverScoring::Composite => {
                        weight * solver_reward_composite(r.answer.is_some(), correct, &w)
                    }
                };
                rewards.push(reward);
                hits += usize::from(correct);
                let truly = match (&r.answer, &reference) {
                    (Some(a), Some(gold)) => self.agents.judge(a, gold)?,
                    _ => true,
                };
                realized += usize::from(correct && truly);
            }
            trained.push((weight, realized as f64 / rollouts.len().max(1) as f64));
        }
        let items: Vec<TrainedItem<'_>> = mix
            .iter()
            .zip(&trained)
            .map(|(e, &(weight, realized))| TrainedItem {
                question: &e.question,
                weight,
                realized,
            })
            .collect();
        self.agents.update_solver(&items)?;

        let questions: Vec<&str> = mix.iter().map(|e| e.question.as_str()).collect();
        let p_hats: Vec<f64> = mix.iter().map(|e| e.item.p_hat).collect();
        record.rewards = RewardStats::of(&rewards);
        record.accuracy = Some(hits as f64 / rewards.len().max(1) as f64);
        record.metrics = Self::metrics(&questions, &p_hats)?;
        record.policy = self.agents.summary();
        record.trained_p_hats = p_hats;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            batch_size: 4,
            iterations: 2,
            ..RunConfig::desk_scale()
        }
    }

    #[test]
    fn zero_iterations_do_nothing() {
        let mut o = Orchestrator::simulated(
            RunConfig {
                iterations: 0,
                ..small()
            },
            None,
        )
        .unwrap();
        let before = o.agents().clone();
        assert!(o.run_collect().unwrap().is_empty());
        assert_eq!(o.agents(), &before);
    }

    #[test]
    fn steps_follow_the_schedule() {
        let log = Orchestrator::simulated(small(), None)
            .unwrap()
            .run_collect()
            .unwrap();
        assert_eq!(log.len(), 30);
        for r in &log {
            let expected = if (r.step - 1) % 15 < 5 {
                Phase::Challenger
            } else {
                Phase::Solver
            };
            assert_eq!(r.phase, expected);
            assert_eq!(r.refresh, (r.step - 1) % 15 == 5);
        }
    }

    #[test]
    fn trained_items_lie_in_the_band() {
        let cfg = small();
        let log = Orchestrator::simulated(cfg.clone(), None)
            .unwrap()
            .run_collect()
            .unwrap();
        for r in log.iter().filter(|r| r.phase == Phase::Solver) {
            assert!(r
                .trained_p_hats
                .iter()
                .all(|p| (cfg.tau_low..=cfg.tau_high).contains(p)));
        }
    }

    #[test]
    fn empty_band_is_skipped() {
        let cfg = RunConfig {
            tau_low: 0.999,
            tau_high: 0.9995,
            ..small()
        };
        let log = Orchestrator::simulated(cfg, None)
            .unwrap()
            .run_collect()
            .unwrap();
        let solver: Vec<_> = log.iter().filter(|r| r.phase == Phase::Solver).collect();
        assert!(solver.iter().all(|r| r.skipped.is_some()));
    }
}
