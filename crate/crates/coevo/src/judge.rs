//! Answer verification for text backends.

use coevo_core::config::JudgeModeKind;
use coevo_core::verification::{judge_exact, judge_from_verdict, judge_numeric, Judgment};

use crate::backend::{generate, render_judge_prompt, GenerationRequest, TextGen};
use crate::error::Result;

const VERDICT_MAX_TOKENS: u32 = 16;

/// Decides whether an answer matches a reference, either by rule or by
/// asking a backend with the judge template at temperature 0.
pub struct Judge<'a> {
    mode: JudgeModeKind,
    backend: Option<&'a dyn TextGen>,
}

impl<'a> Judge<'a> {
    pub fn exact() -> Self {
        Self {
            mode: JudgeModeKind::Exact,
            backend: None,
        }
    }

    pub fn numeric() -> Self {
        Self {
            mode: JudgeModeKind::Numeric,
            backend: None,
        }
    }

    pub fn with_backend(backend: &'a dyn TextGen) -> Self {
        Self {
            mode: JudgeModeKind::Backend,
            backend: Some(backend),
        }
    }

    pub fn from_mode(mode: JudgeModeKind, backend: &'a dyn TextGen) -> Self {
        match mode {
            JudgeModeKind::Exact => Self::exact(),
            JudgeModeKind::Numeric => Self::numeric(),
            JudgeModeKind::Backend => Self::with_backend(backend),
        }
    }

    pub fn judge(&self, answer: &str, reference: &str) -> Result<Judgment> {
        match (self.mode, self.backend) {
            (JudgeModeKind::Exact, _) => Ok(judge_exact(answer, reference)),
            (JudgeModeKind::Backend, Some(backend)) => {
                let req = GenerationRequest::greedy(
                    render_judge_prompt(answer, reference),
                    VERDICT_MAX_TOKENS,
                );
                let reply = generate(backend, &req)?.remove(0);
                Ok(judge_from_verdict(answer, reference, &reply)?)
            }
            _ => Ok(judge_numeric(answer, reference)),
        }
    }
}
