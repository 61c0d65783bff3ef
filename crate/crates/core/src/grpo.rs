//! Group Relative Policy Optimization over small parametric policies.
//!
//! Advantages are group-normalized rewards `(r - mean) / (std + eps)` with the
//! population standard deviation. The objective per sample is the PPO-style
//! clipped surrogate minus `kl_coef` times the `exp(d) - d - 1` estimator of
//! the divergence from a frozen reference policy, and one step is plain
//! gradient ascent on its mean.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{exp, log_sum_exp, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub learning_rate: f64,
    pub clip: f64,
    pub kl_coef: f64,
    pub eps: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-7,
            clip: 0.2,
            kl_coef: 1e-2,
            eps: 1e-6,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("learning_rate", self.learning_rate),
            ("clip", self.clip),
            ("kl_coef", self.kl_coef),
            ("eps", self.eps),
        ];
        for (name, v) in checks {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// `G` sampled actions for one context, with the log-probabilities they had
/// when sampled and the rewards they earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup<C> {
    pub context: C,
    pub actions: Vec<usize>,
    pub log_probs_old: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl<C> RolloutGroup<C> {
    pub fn validate(&self) -> Result<()> {
        let g = self.actions.len();
        if g < 2 || self.log_probs_old.len() != g || self.rewards.len() != g {
            return Err(Error::domain(alloc::format!(
                "rollout group needs G >= 2 equally long lists, got {} actions, {} log-probs, {} rewards",
                g,
                self.log_probs_old.len(),
                self.rewards.len()
            )));
        }
        if self
            .log_probs_old
            .iter()
            .any(|&l| !l.is_finite() || l > 0.0)
        {
            return Err(Error::domain(
                "old log-probabilities must be finite and <= 0",
            ));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("rewards must be finite"));
        }
        Ok(())
    }
}

/// A differentiable stochastic policy over a finite action set.
pub trait Policy {
    type Context;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn log_prob(&self, context: &Self::Context, action: usize) -> f64;
    /// Add `scale * d log_prob / d params` into `out`.
    fn accumulate_grad_log_prob(
        &self,
        context: &Self::Context,
        action: usize,
        scale: f64,
        out: &mut [f64],
    );
}

/// Softmax over `logits + bias`, where the bias is supplied per context
/// (an empty bias means none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxPolicy {
    pub logits: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn uniform(n_actions: usize) -> Self {
        Self {
            logits: vec![0.0; n_actions],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.logits.len()
    }

    fn scores<'a>(&'a self, bias: &'a [f64]) -> impl Iterator<Item = f64> + Clone + 'a {
        self.logits
            .iter()
            .enumerate()
            .map(move |(i, &l)| l + bias.get(i).copied().unwrap_or(0.0))
    }

    pub fn probs(&self, bias: &[f64]) -> Vec<f64> {
        let lse = log_sum_exp(self.scores(bias));
        self.scores(bias).map(|s| exp(s - lse)).collect()
    }

    pub fn entropy(&self, bias: &[f64]) -> f64 {
        self.probs(bias)
            .into_iter()
            .filter(|&p| p > 0.0)
            .map(|p| -p * crate::math::ln(p))
            .sum()
    }

    /// Index of the most probable action (lowest index on ties).
    pub fn mode(&self, bias: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, s) in self.scores(bias).enumerate() {
            if s > best.1 {
                best = (i, s);
            }
        }
        best.0
    }

    /// Inverse-CDF draw given a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, bias: &[f64], u: f64) -> usize {
        let probs = self.probs(bias);
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

impl Policy for SoftmaxPolicy {
    type Context = Vec<f64>;

    fn params(&self) -> &[f64] {
        &self.logits
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn log_prob(&self, bias: &Vec<f64>, action: usize) -> f64 {
        let lse = log_sum_exp(self.scores(bias));
        self.scores(bias).nth(action).expect("action in range") - lse
    }

    fn accumulate_grad_log_prob(
        &self,
        bias: &Vec<f64>,
        action: usize,
        scale: f64,
        out: &mut [f64],
    ) {
        for (i, p) in self.probs(bias).into_iter().enumerate() {
            let indicator = if i == action { 1.0 } else { 0.0 };
            out[i] += scale * (indicator - p);
        }
    }
}

/// Group-normalized advantages. A zero-variance group gets all zeros.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::domain("advantages need a group of at least 2"));
    }
    // Exact test, since a rounded mean leaves a spurious variance.
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = sqrt(var);
    if std == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / (std + eps)).collect())
}

pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clamped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clamped * advantage)
}

/// Per-sample `exp(d) - d - 1` with `d = logp_ref - logp_new`; never negative.
pub fn kl_penalty(logp_new: f64, logp_ref: f64) -> f64 {
    let d = logp_ref - logp_new;
    (exp(d) - d - 1.0).max(0.0)
}

/// What a policy step did, for logging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub n_samples: usize,
    pub mean_reward: f64,
    pub mean_surrogate: f64,
    pub mean_kl: f64,
    pub grad_norm: f64,
}

/// One ascent step on the mean over all samples of
/// `clipped_surrogate - kl_coef * kl_penalty`.
///
/// `reference` is the frozen policy the KL term is measured against.
pub fn policy_step<P: Policy>(
    policy: &mut P,
    reference: &P,
    groups: &[RolloutGroup<P::Context>],
    cfg: &GrpoConfig,
) -> Result<StepSummary> {
    cfg.validate()?;
    let n_params = policy.params().len();
    if reference.params().len() != n_params {
        return Err(Error::domain(
            "reference policy has a different parameter count",
        ));
    }
    let mut grad = vec![0.0; n_params];
    let mut summary = StepSummary::default();
    let mut group_grad = vec![0.0; n_params];
    for (gi, group) in groups.iter().enumerate() {
        group.validate()?;
        let adv = group_advantages(&group.rewards, cfg.eps)?;
        group_grad.iter_mut().for_each(|g| *g = 0.0);
        for (m, &action) in group.actions.iter().enumerate() {
            let logp = policy.log_prob(&group.context, action);
            let ratio = exp(logp - group.log_probs_old[m]);
            let a = adv[m];
            let clipped_out =
                (a >= 0.0 && ratio > 1.0 + cfg.clip) || (a < 0.0 && ratio < 1.0 - cfg.clip);
            let mut coef = if clipped_out { 0.0 } else { a * ratio };
            summary.mean_surrogate += clipped_surrogate(ratio, a, cfg.clip);
            if cfg.kl_coef > 0.0 {
                let logp_ref = reference.log_prob(&group.context, action);
                summary.mean_kl += kl_penalty(logp, logp_ref);
                // d/dθ [exp(d) - d - 1] = (1 - exp(d)) * d logp/dθ
                coef -= cfg.kl_coef * (1.0 - exp(logp_ref - logp));
            }
            if coef != 0.0 {
                policy.accumulate_grad_log_prob(&group.context, action, coef, &mut group_grad);
            }
            summary.mean_reward += group.rewards[m];
            summary.n_samples += 1;
        }
        if let Some(bad) = group_grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Optimizer {
                group: gi,
                message: alloc::format!("non-finite gradient component {bad}"),
            });
        }
        grad.iter_mut().zip(&group_grad).for_each(|(g, x)| *g += x);
    }
    if summary.n_samples == 0 {
        return Ok(summary);
    }
    let n = summary.n_samples as f64;
    summary.mean_reward /= n;
    summary.mean_surrogate /= n;
    summary.mean_kl /= n;
    summary.grad_norm = sqrt(grad.iter().map(|g| (g / n) * (g / n)).sum());
    for (p, g) in policy.params_mut().iter_mut().zip(&grad) {
        *p += cfg.learning_rate * g / n;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn advantage_examples() {
        let a = group_advantages(&[1.0, 0.0, 1.0, 0.0], 1e-6).unwrap();
        for (x, y) in a.iter().zip([1.0, -1.0, 1.0, -1.0]) {
            assert!(close(*x, y, 1e-5));
        }
        assert_eq!(group_advantages(&[3.0; 3], 1e-6).unwrap(), [0.0; 3]);
        let a = group_advantages(&[2.0, 0.0], 0.0).unwrap();
        assert_eq!(a, [1.0, -1.0]);
        assert!(group_advantages(&[1.0], 1e-6).is_err());
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
        assert!(close(clipped_surrogate(2.0, 1.0, 0.2), 1.2, 1e-12));
        assert_eq!(clipped_surrogate(2.0, -1.0, 0.2), -2.0);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_penalty(-1.3, -1.3), 0.0);
        let ln2 = core::f64::consts::LN_2;
        assert!(close(kl_penalty(0.0, ln2), 2.0 - ln2 - 1.0, 1e-12));
    }

    #[test]
    fn zero_advantage_without_kl_is_a_no_op() {
        let mut p = SoftmaxPolicy {
            logits: vec![0.3, -0.2, 0.1],
        };
        let reference = p.clone();
        let lp = p.log_prob(&vec![], 0);
        let group = RolloutGroup {
            context: vec![],
            actions: vec![0, 1, 2],
            log_probs_old: vec![lp, p.log_prob(&vec![], 1), p.log_prob(&vec![], 2)],
            rewards: vec![0.5; 3],
        };
        let cfg = GrpoConfig {
            learning_rate: 0.1,
            kl_coef: 0.0,
            ..Default::default()
        };
        policy_step(&mut p, &reference, &[group], &cfg).unwrap();
        assert_eq!(p, reference);
    }

    #[test]
    fn bad_groups_are_rejected() {
        let mut p = SoftmaxPolicy::uniform(2);
        let reference = p.clone();
        let group = RolloutGroup {
            context: vec![],
            actions: vec![0],
            log_probs_old: vec![-0.7],
            rewards: vec![1.0],
        };
        assert!(policy_step(&mut p, &reference, &[group], &GrpoConfig::default()).is_err());
    }

    /// Gradient blows up only in contexts flagged `true`.
    struct Exploding(Vec<f64>);

    impl Policy for Exploding {
        type Context = bool;
        fn params(&self) -> &[f64] {
            &self.0
        }
        fn params_mut(&mut self) -> &mut [f64] {
            &mut self.0
        }
        fn log_prob(&self, _: &bool, _: usize) -> f64 {
            -core::f64::consts::LN_2
        }
        fn accumulate_grad_log_prob(&self, explode: &bool, _: usize, scale: f64, out: &mut [f64]) {
            out[0] += if *explode { f64::NAN } else { scale };
        }
    }

    #[test]
    fn non_finite_gradient_names_the_group() {
        let mut p = Exploding(vec![0.0]);
        let reference = Exploding(vec![0.0]);
        let ok = RolloutGroup {
            context: false,
            actions: vec![0, 1],
            log_probs_old: vec![-core::f64::consts::LN_2; 2],
            rewards: vec![1.0, 0.0],
        };
        let bad = RolloutGroup {
            context: true,
            ..ok.clone()
        };
        let err = policy_step(&mut p, &reference, &[ok, bad], &GrpoConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Optimizer { group: 1, .. }), "{err:?}");
    }
}
