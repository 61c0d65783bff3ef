use std::sync::Mutex;

use coevo_core::curriculum::{AnchorExample, DemoContext};
use coevo_core::prompts::{
    render_question_block, CHALLENGER_INSTRUCTION, CHALLENGER_SYSTEM, JUDGE_SYSTEM, SOLVER_SYSTEM,
};
use coevo_core::rng::{self, Stream};
use coevo_core::simworld::{sim_generate, sim_solve, SimChallenger, SimQuestion, SimSolver};
use coevo_core::verification::judge_numeric;

use super::{BackendError, GenerationRequest, TextGen};

/// Text front-end to the simulated world.
///
/// Challenger prompts yield `{question}` blocks drawn from the challenger
/// policy (conditioned on any sim questions among the demonstrations),
/// solver prompts yield a `\boxed{}` answer, and judge prompts are decided
/// numerically. The world is a read-only snapshot; draws come from one
/// seeded stream, so sequential use is reproducible.
pub struct SimulatedBackend {
    challenger: SimChallenger,
    solver: SimSolver,
    rng: Mutex<Stream>,
}

impl SimulatedBackend {
    pub fn new(challenger: SimChallenger, solver: SimSolver, seed: u64) -> Self {
        Self {
            challenger,
            solver,
            rng: Mutex::new(rng::stream(seed, &[0x5eed])),
        }
    }

    fn challenger_completions(&self, user: &str, n: usize) -> Vec<String> {
        let examples = user
            .strip_suffix(CHALLENGER_INSTRUCTION)
            .unwrap_or("")
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| AnchorExample {
                id: String::new(),
                prompt: l.to_string(),
                gold_answer: String::new(),
                domain: None,
            })
            .collect::<Vec<_>>();
        let ctx = DemoContext {
            drawn_k: examples.len(),
            examples,
        };
        let mut rng = self.rng.lock().expect("rng lock");
        (0..n)
            .map(|_| {
                render_question_block(
                    &sim_generate(&self.challenger, &ctx, &mut *rng).rendered_text,
                )
            })
            .collect()
    }

    fn solver_completions(&self, problem: &str, n: usize) -> Vec<String> {
        let Some((bin, nonce)) =
            SimQuestion::parse(problem).filter(|(b, _)| *b < self.solver.competence.len())
        else {
            return vec!["This task is not one I recognise.".to_string(); n];
        };
        let q = SimQuestion::new(bin, nonce);
        let mut rng = self.rng.lock().expect("rng lock");
        (0..n)
            .map(|_| {
                let (answer, _) = sim_solve(&self.solver, &q, &mut *rng);
                format!("Working through difficulty {bin}.\n\\boxed{{{answer}}}")
            })
            .collect()
    }

    fn judge_completion(user: &str) -> Result<String, BackendError> {
        let field = |prefix: &str| {
            user.lines()
                .rev()
                .find_map(|l| l.trim_start().strip_prefix(prefix))
                .map(str::to_string)
                .ok_or_else(|| {
                    BackendError::InvalidRequest(format!("judge prompt lacks `{prefix}`"))
                })
        };
        let a = field("Expression 1: ")?;
        let b = field("Expression 2: ")?;
        Ok(if judge_numeric(&a, &b).correct {
            "Yes"
        } else {
            "No"
        }
        .to_string())
    }
}

impl TextGen for SimulatedBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let user = request
            .user()
            .ok_or_else(|| BackendError::InvalidRequest("request has no user message".into()))?;
        match request.system() {
            Some(CHALLENGER_SYSTEM) => Ok(self.challenger_completions(user, request.n_samples)),
            Some(SOLVER_SYSTEM) => Ok(self.solver_completions(user, request.n_samples)),
            Some(JUDGE_SYSTEM) => (0..request.n_samples)
                .map(|_| Self::judge_completion(user))
                .collect(),
            _ => Err(BackendError::InvalidRequest(
                "simulated backend only serves challenger, solver and judge prompts".into(),
            )),
        }
    }

    fn cursor(&self) -> serde_json::Value {
        let pos = self.rng.lock().expect("rng lock").get_word_pos();
        serde_json::Value::String(pos.to_string())
    }

    fn restore_cursor(&self, cursor: &serde_json::Value) -> Result<(), BackendError> {
        let pos = cursor
            .as_str()
            .and_then(|s| s.parse::<u128>().ok())
            .ok_or_else(|| BackendError::Replay(format!("bad simulated cursor {cursor}")))?;
        self.rng.lock().expect("rng lock").set_word_pos(pos);
        Ok(())
    }

    fn kind(&self) -> &'static str {
        "simulated"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{
        parse_boxed_answer, render_challenger_prompt, render_judge_prompt, render_solver_prompt,
    };
    use coevo_core::prompts::validate_question;

    fn backend(c: f64) -> SimulatedBackend {
        SimulatedBackend::new(
            SimChallenger::new(4, 50.0),
            SimSolver::new(vec![c; 4], 0.1).unwrap(),
            1,
        )
    }

    #[test]
    fn challenger_follows_demonstrations() {
        let demo = AnchorExample {
            id: "a".into(),
            prompt: SimQuestion::new(2, 5).rendered_text,
            gold_answer: "x".into(),
            domain: None,
        };
        let req = GenerationRequest::greedy(render_challenger_prompt(&[demo]).unwrap(), 64);
        let req = GenerationRequest {
            n_samples: 5,
            ..req
        };
        for completion in backend(0.5).generate(&req).unwrap() {
            let (valid, body) = validate_question(&completion);
            assert!(valid);
            assert_eq!(SimQuestion::parse(&body).unwrap().0, 2);
        }
    }

    #[test]
    fn solver_boxes_gold_when_competent() {
        let q = SimQuestion::new(1, 9);
        let req = GenerationRequest::greedy(render_solver_prompt(&q.rendered_text).unwrap(), 64);
        let out = backend(1.0).generate(&req).unwrap();
        assert_eq!(parse_boxed_answer(&out[0]), Some(q.gold_answer()));
        let req = GenerationRequest::greedy(render_solver_prompt("what?").unwrap(), 64);
        assert_eq!(
            parse_boxed_answer(&backend(1.0).generate(&req).unwrap()[0]),
            None
        );
    }

    #[test]
    fn cursor_resumes_the_stream() {
        let q = SimQuestion::new(3, 1);
        let req = GenerationRequest::greedy(render_solver_prompt(&q.rendered_text).unwrap(), 64);
        let req = GenerationRequest {
            n_samples: 20,
            ..req
        };
        let a = backend(0.5);
        a.generate(&req).unwrap();
        let cursor = a.cursor();
        let expected = a.generate(&req).unwrap();
        let b = backend(0.5);
        b.restore_cursor(&cursor).unwrap();
        assert_eq!(b.generate(&req).unwrap(), expected);
    }

    #[test]
    fn judge_is_numeric() {
        let b = backend(0.5);
        let yes = GenerationRequest::greedy(render_judge_prompt("1/2", "0.5"), 4);
        assert_eq!(b.generate(&yes).unwrap(), ["Yes"]);
        let no = GenerationRequest::greedy(render_judge_prompt("3", "4"), 4);
        assert_eq!(b.generate(&no).unwrap(), ["No"]);
    }
}
