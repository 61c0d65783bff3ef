//! Rendered prompts compared byte for byte with hand-transcribed templates.

use coevo_core::curriculum::AnchorExample;
use coevo_core::prompts::{
    render_challenger_prompt, render_judge_prompt, render_solver_prompt, Message, Role,
};

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn check(messages: &[Message], stem: &str) {
    assert_eq!(messages.len(), 2);
    assert_eq!(messages[0].role, Role::System);
    assert_eq!(messages[1].role, Role::User);
    assert_eq!(
        messages[0].content,
        golden(&format!("{stem}.system.txt")),
        "{stem} system message"
    );
    assert_eq!(
        messages[1].content,
        golden(&format!("{stem}.user.txt")),
        "{stem} user message"
    );
}

fn placeholder(i: usize) -> AnchorExample {
    AnchorExample {
        id: i.to_string(),
        prompt: format!("<Example {i}>"),
        gold_answer: "0".into(),
        domain: None,
    }
}

#[test]
fn challenger_prompt_with_five_examples() {
    let examples: Vec<_> = (1..=5).map(placeholder).collect();
    check(
        &render_challenger_prompt(&examples).unwrap(),
        "challenger_k5",
    );
}

#[test]
fn challenger_prompt_keeps_example_order() {
    let examples = vec![placeholder(2), placeholder(1)];
    let user = &render_challenger_prompt(&examples).unwrap()[1].content;
    let lines: Vec<&str> = user.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(&lines[..2], ["<Example 2>", "<Example 1>"]);
    let full = golden("challenger_k5.user.txt");
    assert_eq!(lines[2], full.lines().last().unwrap());
}

#[test]
fn challenger_prompt_rejects_six_examples() {
    let examples: Vec<_> = (1..=6).map(placeholder).collect();
    assert!(render_challenger_prompt(&examples).is_err());
}

#[test]
fn solver_prompt() {
    check(
        &render_solver_prompt("<problem_statement>").unwrap(),
        "solver",
    );
}

#[test]
fn judge_prompt() {
    check(
        &render_judge_prompt("<Expression 1>", "<Expression 2>"),
        "judge",
    );
    let filled = render_judge_prompt("3245/5", "649");
    let expected = golden("judge.user.txt")
        .replace("<Expression 1>", "3245/5")
        .replace("<Expression 2>", "649");
    assert_eq!(filled[1].content, expected);
}

#[test]
fn rendering_is_deterministic() {
    let examples: Vec<_> = (1..=3).map(placeholder).collect();
    assert_eq!(
        render_challenger_prompt(&examples).unwrap(),
        render_challenger_prompt(&examples).unwrap()
    );
}
