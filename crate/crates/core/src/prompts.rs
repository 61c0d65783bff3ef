//! Chat prompt rendering and completion parsing.
//!
//! The template texts live in `assets/` as plain files and are embedded at
//! build time; rendering is pure string assembly so identical inputs always
//! produce identical bytes.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::curriculum::AnchorExample;
use crate::{Error, Result};

pub const SOLVER_SYSTEM: &str = include_str!("../assets/solver_system.txt");
pub const CHALLENGER_SYSTEM: &str = include_str!("../assets/challenger_system.txt");
pub const CHALLENGER_INSTRUCTION: &str = include_str!("../assets/challenger_instruction.txt");
pub const JUDGE_SYSTEM: &str = include_str!("../assets/judge_system.txt");
pub const JUDGE_USER_TEMPLATE: &str = include_str!("../assets/judge_user.txt");

/// Most demonstrations a challenger prompt can hold.
pub const MAX_EXAMPLES: usize = 5;

const QUESTION_OPEN: &str = "{question}";
const QUESTION_CLOSE: &str = "{/question}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Challenger prompt with up to five demonstrations, one per line, followed
/// by the closing instruction.
pub fn render_challenger_prompt(examples: &[AnchorExample]) -> Result<Vec<Message>> {
    if examples.len() > MAX_EXAMPLES {
        return Err(Error::domain(alloc::format!(
            "at most {MAX_EXAMPLES} demonstrations fit the challenger template, got {}",
            examples.len()
        )));
    }
    let mut user = String::new();
    for example in examples {
        user.push_str(&example.prompt);
        user.push('\n');
    }
    user.push_str(CHALLENGER_INSTRUCTION);
    Ok(vec![
        Message::system(CHALLENGER_SYSTEM),
        Message::user(user),
    ])
}

pub fn render_solver_prompt(problem: &str) -> Result<Vec<Message>> {
    if problem.trim().is_empty() {
        return Err(Error::domain(
            "solver prompt needs a non-empty problem statement",
        ));
    }
    Ok(vec![Message::system(SOLVER_SYSTEM), Message::user(problem)])
}

/// Equivalence-judge prompt. Placeholders are substituted in one pass, so an
/// answer that itself contains a placeholder string is inserted verbatim.
pub fn render_judge_prompt(expression_1: &str, expression_2: &str) -> Vec<Message> {
    let user = substitute(
        JUDGE_USER_TEMPLATE,
        &[
            ("<Expression 1>", expression_1),
            ("<Expression 2>", expression_2),
        ],
    );
    vec![Message::system(JUDGE_SYSTEM), Message::user(user)]
}

fn substitute(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = slots
            .iter()
            .filter_map(|(key, value)| rest.find(key).map(|at| (at, *key, *value)))
            .min_by_key(|(at, _, _)| *at);
        match next {
            Some((at, key, value)) => {
                out.push_str(&rest[..at]);
                out.push_str(value);
                rest = &rest[at + key.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// Wrap a statement in the question block the challenger is asked to emit.
pub fn render_question_block(body: &str) -> String {
    alloc::format!("{QUESTION_OPEN}\n{body}\n{QUESTION_CLOSE}")
}

/// Extract the question body from a challenger completion.
///
/// Valid iff the completion holds exactly one opening and one closing
/// marker, in that order, around a non-blank body.
pub fn validate_question(raw: &str) -> (bool, String) {
    let invalid = (false, String::new());
    if raw.matches(QUESTION_OPEN).count() != 1 || raw.matches(QUESTION_CLOSE).count() != 1 {
        return invalid;
    }
    let (Some(open), Some(close)) = (raw.find(QUESTION_OPEN), raw.find(QUESTION_CLOSE)) else {
        return invalid;
    };
    let start = open + QUESTION_OPEN.len();
    if close < start {
        return invalid;
    }
    let body = raw[start..close].trim();
    if body.is_empty() {
        return invalid;
    }
    (true, body.to_string())
}

/// Contents of the last `\boxed{...}` in a completion, matched with brace
/// balancing. `None` when there is no box or the last one never closes.
pub fn parse_boxed_answer(completion: &str) -> Option<String> {
    const MARKER: &str = "\\boxed{";
    let start = completion.rfind(MARKER)? + MARKER.len();
    let mut depth = 1usize;
    for (offset, ch) in completion[start..].char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(completion[start..start + offset].to_string());
                }
            }
            _ => {}
        }
    }
    None
}
