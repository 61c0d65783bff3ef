//! Challenger and solver reward functions.
//!
//! The challenger family covers the uncertainty-shaped reward used by the
//! grounded loop together with the zero-data baselines it is compared
//! against (absolute-zero, pass-rate sweet spot, variance targeting). All
//! functions are pure and validate their inputs.

use serde::{Deserialize, Serialize};

use crate::curriculum::{CurriculumItem, ItemSource, Label};
use crate::math::{abs, check_non_negative, check_unit, exp};
use crate::{Error, Result};

/// Per-question statistics a challenger reward may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChallengerRewardInput {
    /// Fraction of solver rollouts judged correct.
    pub p_hat: f64,
    /// Second pass-rate, only read by [`challenger_reward_sqlm`].
    pub p_succ_aux: Option<f64>,
    pub rep_penalty: f64,
    pub align: Option<f64>,
    /// Variance of the sampled answers' correctness.
    pub variance: Option<f64>,
    pub valid: bool,
}

impl ChallengerRewardInput {
    /// A valid question with the given success rate and nothing else set.
    pub fn valid(p_hat: f64) -> Self {
        Self {
            p_hat,
            p_succ_aux: None,
            rep_penalty: 0.0,
            align: None,
            variance: None,
            valid: true,
        }
    }

    pub fn invalid() -> Self {
        Self {
            valid: false,
            ..Self::valid(0.0)
        }
    }

    pub fn with_rep_penalty(mut self, rep_penalty: f64) -> Self {
        self.rep_penalty = rep_penalty;
        self
    }

    pub fn with_align(mut self, align: f64) -> Self {
        self.align = Some(align);
        self
    }

    pub fn with_variance(mut self, variance: f64) -> Self {
        self.variance = Some(variance);
        self
    }

    pub fn with_aux_pass_rate(mut self, p_succ: f64) -> Self {
        self.p_succ_aux = Some(p_succ);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub lambda_rep: f64,
    /// Weight of the anchor-alignment bonus. Zero leaves it out entirely.
    pub lambda_align: f64,
    /// Multiplier on human-anchor solver rewards.
    pub lambda_hum: f64,
    /// Penalty magnitude for invalid challenger output.
    pub rho_inv: f64,
    pub w_format: f64,
    pub w_accuracy: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda_rep: 0.5,
            lambda_align: 0.0,
            lambda_hum: 2.0,
            rho_inv: 1.0,
            w_format: 0.1,
            w_accuracy: 0.9,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda_rep", self.lambda_rep),
            ("lambda_align", self.lambda_align),
            ("lambda_hum", self.lambda_hum),
            ("rho_inv", self.rho_inv),
            ("w_format", self.w_format),
            ("w_accuracy", self.w_accuracy),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        if abs(self.w_format + self.w_accuracy - 1.0) > 1e-12 {
            return Err(Error::config(
                "w_format",
                "w_format + w_accuracy must equal 1",
            ));
        }
        Ok(())
    }
}

/// The difficulty-shaping kernel `1 - 2|p - 1/2|`: 1 at one half, 0 at the ends.
pub fn difficulty_shaping(p_hat: f64) -> f64 {
    1.0 - 2.0 * abs(p_hat - 0.5)
}

fn shaped(input: &ChallengerRewardInput, w: &RewardWeights, use_align: bool) -> Result<f64> {
    w.validate()?;
    if !input.valid {
        return Ok(-w.rho_inv);
    }
    check_unit("p_hat", input.p_hat)?;
    check_non_negative("rep_penalty", input.rep_penalty)?;
    let mut reward = difficulty_shaping(input.p_hat) - w.lambda_rep * input.rep_penalty;
    if use_align && w.lambda_align > 0.0 {
        let align = input
            .align
            .ok_or_else(|| Error::domain("lambda_align > 0 requires an align score"))?;
        check_unit("align", align)?;
        reward += w.lambda_align * align;
    }
    Ok(reward)
}

/// Grounded challenger reward: shaping minus repetition penalty, plus an
/// optional alignment bonus. Invalid questions score `-rho_inv`.
///
/// With `lambda_align = 0` the result never exceeds 1.
pub fn challenger_reward_rfew(input: &ChallengerRewardInput, w: &RewardWeights) -> Result<f64> {
    shaped(input, w, true)
}

/// Ungrounded uncertainty reward; identical shaping with no alignment term.
pub fn challenger_reward_rzero(input: &ChallengerRewardInput, w: &RewardWeights) -> Result<f64> {
    shaped(input, w, false)
}

/// `(1 - p) * 1(p != 0)`.
pub fn challenger_reward_abszero(input: &ChallengerRewardInput) -> Result<f64> {
    check_unit("p_hat", input.p_hat)?;
    Ok(if input.p_hat != 0.0 {
        1.0 - input.p_hat
    } else {
        0.0
    })
}

/// `(1 - p_hat) * 1(0 < p_succ < p_hat)`, with `p_succ` taken from
/// `p_succ_aux`. The two pass rates are separate inputs.
pub fn challenger_reward_sqlm(input: &ChallengerRewardInput) -> Result<f64> {
    let p_succ = input
        .p_succ_aux
        .ok_or_else(|| Error::domain("sqlm reward needs the auxiliary pass rate p_succ"))?;
    check_unit("p_hat", input.p_hat)?;
    check_unit("p_succ", p_succ)?;
    Ok(if 0.0 < p_succ && p_succ < input.p_hat {
        1.0 - input.p_hat
    } else {
        0.0
    })
}

/// Gaussian bump around an answer variance of 0.25, zero for invalid output.
pub fn challenger_reward_spice(input: &ChallengerRewardInput) -> Result<f64> {
    let var = input
        .variance
        .ok_or_else(|| Error::domain("spice reward needs the answer variance"))?;
    check_non_negative("variance", var)?;
    if !input.valid {
        return Ok(0.0);
    }
    let d = var - 0.25;
    Ok(exp(-(d * d) / (2.0 * 0.01)))
}

/// Solver reward on a curriculum item.
///
/// Synthetic items pay `w_cur` when the answer matches the majority-vote
/// label. Human anchors pay `lambda_hum * w_hum` when the answer matches the
/// gold label; the pseudo-label term does not apply to them.
pub fn solver_reward_rfew(
    item: &CurriculumItem,
    correct_vs_pseudo: bool,
    correct_vs_human: bool,
    w: &RewardWeights,
) -> Result<f64> {
    match (item.source, &item.label) {
        (ItemSource::Synthetic, Label::Pseudo { .. }) => {
            Ok(if correct_vs_pseudo { item.w_cur } else { 0.0 })
        }
        (ItemSource::Human, Label::Gold(gold)) if !gold.is_empty() => Ok(if correct_vs_human {
            w.lambda_hum * item.w_hum
        } else {
            0.0
        }),
        (ItemSource::Human, _) => Err(Error::data(alloc::format!(
            "human item {} has no gold label",
            item.question_id
        ))),
        (ItemSource::Synthetic, Label::Gold(_)) => Err(Error::data(alloc::format!(
            "synthetic item {} must carry a pseudo-label",
            item.question_id
        ))),
    }
}

/// Format/accuracy composite. An unparsable answer scores nothing.
pub fn solver_reward_composite(format_ok: bool, accuracy: bool, w: &RewardWeights) -> f64 {
    if !format_ok {
        return 0.0;
    }
    w.w_format + if accuracy { w.w_accuracy } else { 0.0 }
}
