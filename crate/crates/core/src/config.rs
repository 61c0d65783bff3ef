//! Run configuration.
//!
//! Defaults follow the published training setup (batch 512, group 8, eight
//! solver rollouts, learning rate 5e-7, KL coefficient 1e-2, 5/10 step
//! alternation, rollout temperature 1.0 and top-p 0.99). Those values are
//! sized for language models; [`RunConfig::desk_scale`] gives the small
//! simulated setup the test suites use.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::curriculum::BandMode;
use crate::grpo::GrpoConfig;
use crate::prompts::MAX_EXAMPLES;
use crate::rewards::RewardWeights;
use crate::schedule::Schedule;
use crate::simworld::SimScenario;
use crate::{Error, Result};

/// Which challenger reward drives the challenger update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengerRewardKind {
    #[default]
    Rfew,
    Rzero,
    Abszero,
    Spice,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeModeKind {
    Exact,
    #[default]
    Numeric,
    Backend,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// The built-in simulated world, driven natively.
    #[default]
    Sim,
    /// Replay of recorded completions.
    Scripted { replay_path: String },
    /// Chat-completions HTTP endpoint. The bearer token is read from the
    /// environment variable named by `api_key_env`, never stored inline.
    Http {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_p: 0.99,
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Challenger contexts per step (`B`).
    pub batch_size: usize,
    /// Candidates per context, and solver rollouts per item during training (`G`).
    pub group_size: usize,
    /// Rollouts used to estimate a success rate (`M`).
    pub rollouts: usize,
    /// Number of challenger/solver cycles (`T`).
    pub iterations: u64,
    pub k_max: usize,
    pub tau_low: f64,
    pub tau_high: f64,
    pub band_mode: BandMode,
    /// Off: train the solver on every question with uniform weights.
    pub curriculum: bool,
    /// Off: no demonstrations and no human items (the ungrounded loop).
    pub grounding: bool,
    pub challenger_reward: ChallengerRewardKind,
    pub rewards: RewardWeights,
    pub challenger_optim: GrpoConfig,
    pub solver_optim: GrpoConfig,
    pub challenger_steps_per_cycle: u64,
    pub solver_steps_per_cycle: u64,
    /// Bigram-Jaccard level at which two questions count as duplicates.
    pub sim_threshold: f64,
    pub seed: u64,
    pub judge: JudgeModeKind,
    pub generation: GenerationConfig,
    pub backend: BackendConfig,
    pub sim: SimScenario,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            group_size: 8,
            rollouts: 8,
            iterations: 10,
            k_max: MAX_EXAMPLES,
            tau_low: 0.3,
            tau_high: 0.7,
            band_mode: BandMode::Absolute,
            curriculum: true,
            grounding: true,
            challenger_reward: ChallengerRewardKind::Rfew,
            rewards: RewardWeights::default(),
            challenger_optim: GrpoConfig::default(),
            solver_optim: GrpoConfig::default(),
            challenger_steps_per_cycle: 5,
            solver_steps_per_cycle: 10,
            sim_threshold: crate::diversity::DEFAULT_SIM_THRESHOLD,
            seed: 0,
            judge: JudgeModeKind::Numeric,
            generation: GenerationConfig::default(),
            backend: BackendConfig::Sim,
            sim: SimScenario::default(),
        }
    }
}

impl RunConfig {
    /// Small simulated setup: `B = 32`, 50 anchors, 50 cycles, and a
    /// learning rate and KL weight suited to a 16-logit challenger.
    pub fn desk_scale() -> Self {
        let optim = GrpoConfig {
            learning_rate: 3.0,
            kl_coef: 0.3,
            ..GrpoConfig::default()
        };
        Self {
            batch_size: 32,
            iterations: 50,
            challenger_optim: optim,
            solver_optim: optim,
            ..Self::default()
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            challenger_steps: self.challenger_steps_per_cycle,
            solver_steps: self.solver_steps_per_cycle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("batch_size", self.batch_size), ("rollouts", self.rollouts)] {
            if v == 0 {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if self.group_size < 2 {
            return Err(Error::config(
                "group_size",
                "GRPO needs groups of at least 2",
            ));
        }
        if self.k_max > MAX_EXAMPLES {
            return Err(Error::config(
                "k_max",
                alloc::format!("at most {MAX_EXAMPLES}"),
            ));
        }
        if !(0.0..=1.0).contains(&self.tau_low) {
            return Err(Error::config("tau_low", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.tau_high) {
            return Err(Error::config("tau_high", "must lie in [0, 1]"));
        }
        if self.tau_low > self.tau_high {
            return Err(Error::config(
                "tau_low",
                alloc::format!(
                    "band is inverted: tau_low {} > tau_high {}",
                    self.tau_low,
                    self.tau_high
                ),
            ));
        }
        if self.challenger_steps_per_cycle + self.solver_steps_per_cycle == 0 {
            return Err(Error::config(
                "challenger_steps_per_cycle",
                "a cycle needs at least one step",
            ));
        }
        if !(0.0..=1.0).contains(&self.sim_threshold) {
            return Err(Error::config("sim_threshold", "must lie in [0, 1]"));
        }
        self.rewards.validate()?;
        self.challenger_optim
            .validate()
            .map_err(|e| prefix_field(e, "challenger_optim"))?;
        self.solver_optim
            .validate()
            .map_err(|e| prefix_field(e, "solver_optim"))?;
        let g = &self.generation;
        if !(g.temperature.is_finite() && g.temperature >= 0.0) {
            return Err(Error::config("generation.temperature", "must be >= 0"));
        }
        if !(g.top_p > 0.0 && g.top_p <= 1.0) {
            return Err(Error::config("generation.top_p", "must lie in (0, 1]"));
        }
        if g.max_tokens == 0 {
            return Err(Error::config("generation.max_tokens", "must be positive"));
        }
        if let BackendConfig::Http {
            endpoint, model, ..
        } = &self.backend
        {
            if endpoint.is_empty() {
                return Err(Error::config(
                    "backend.endpoint",
                    "http backend needs an endpoint",
                ));
            }
            if model.is_empty() {
                return Err(Error::config(
                    "backend.model",
                    "http backend needs a model name",
                ));
            }
        }
        if let BackendConfig::Scripted { replay_path } = &self.backend {
            if replay_path.is_empty() {
                return Err(Error::config(
                    "backend.replay_path",
                    "scripted backend needs a replay file",
                ));
            }
        }
        self.sim.validate()
    }
}

fn prefix_field(err: Error, prefix: &str) -> Error {
    match err {
        Error::Config { field, message } => {
            Error::config(alloc::format!("{prefix}.{field}"), message)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
        RunConfig::desk_scale().validate().unwrap();
        let c = RunConfig::default();
        assert_eq!((c.batch_size, c.group_size, c.rollouts), (512, 8, 8));
        assert_eq!(c.challenger_optim.learning_rate, 5e-7);
        assert_eq!(c.challenger_optim.kl_coef, 1e-2);
        assert_eq!((c.tau_low, c.tau_high), (0.3, 0.7));
        assert_eq!(c.rewards.lambda_hum, 2.0);
        assert_eq!((c.rewards.w_format, c.rewards.w_accuracy), (0.1, 0.9));
        assert_eq!((c.generation.temperature, c.generation.top_p), (1.0, 0.99));
        assert_eq!(
            (c.challenger_steps_per_cycle, c.solver_steps_per_cycle),
            (5, 10)
        );
    }

    #[test]
    fn inverted_band_names_the_field() {
        let c = RunConfig {
            tau_low: 0.8,
            tau_high: 0.2,
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "tau_low"));
    }

    #[test]
    fn nested_optimizer_fields_are_prefixed() {
        let mut c = RunConfig::default();
        c.solver_optim.clip = -1.0;
        assert!(
            matches!(c.validate(), Err(Error::Config { field, .. }) if field == "solver_optim.clip")
        );
    }
}
