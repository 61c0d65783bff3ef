//! Invariants checked on random inputs.

use std::collections::BTreeMap;

use proptest::prelude::*;

use coevo_core::curriculum::{curriculum_weights, filter_mid_band, AnchorExample, AnchorPool};
use coevo_core::diversity::{align_score, difficulty, lexical_diversity, rep_penalty};
use coevo_core::grpo::{group_advantages, kl_penalty};
use coevo_core::prompts::{parse_boxed_answer, render_question_block, validate_question};
use coevo_core::rewards::{
    challenger_reward_abszero, challenger_reward_rfew, challenger_reward_rzero,
    challenger_reward_spice, difficulty_shaping, solver_reward_composite, ChallengerRewardInput,
    RewardWeights,
};
use coevo_core::schedule::{Phase, Schedule};
use coevo_core::simworld::{SimQuestion, SimSolver, TrainingOutcome};
use coevo_core::verification::{
    judge_exact, judge_numeric, majority_vote, normalize_answer, success_rate, SuccessStats,
};

fn stats(id: usize, p_hat: f64) -> SuccessStats {
    SuccessStats {
        question_id: id.to_string(),
        judgments: vec![true],
        p_hat,
        pseudo_label: "x".into(),
        vote_fraction: 1.0,
    }
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "alpha", "beta", "gamma", "delta", "eps", "zeta", "eta",
    ])
    .prop_map(String::from)
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 2..7).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn shaping_is_symmetric_and_bounded(p in 0.0f64..=1.0) {
        let w = RewardWeights::default();
        let a = challenger_reward_rfew(&ChallengerRewardInput::valid(p), &w).unwrap();
        let b = challenger_reward_rfew(&ChallengerRewardInput::valid(1.0 - p), &w).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        let z = challenger_reward_rzero(&ChallengerRewardInput::valid(p), &w).unwrap();
        prop_assert!((a - z).abs() < 1e-15);
    }

    #[test]
    fn rewards_do_not_increase_with_rep_penalty(p in 0.0f64..=1.0, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
        let w = RewardWeights::default();
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let at = |rep| ChallengerRewardInput::valid(p).with_rep_penalty(rep);
        prop_assert!(challenger_reward_rfew(&at(hi), &w).unwrap() <= challenger_reward_rfew(&at(lo), &w).unwrap());
        prop_assert!(challenger_reward_rzero(&at(hi), &w).unwrap() <= challenger_reward_rzero(&at(lo), &w).unwrap());
    }

    #[test]
    fn spice_range(v in 0.0f64..=0.25) {
        let valid = challenger_reward_spice(&ChallengerRewardInput::valid(0.5).with_variance(v)).unwrap();
        prop_assert!(valid > 0.0 && valid <= 1.0);
        let invalid = challenger_reward_spice(&ChallengerRewardInput::invalid().with_variance(v)).unwrap();
        prop_assert_eq!(invalid, 0.0);
    }

    #[test]
    fn abszero_formula(p in 0.0f64..=1.0) {
        let r = challenger_reward_abszero(&ChallengerRewardInput::valid(p)).unwrap();
        let expected = if p == 0.0 { 0.0 } else { 1.0 - p };
        prop_assert_eq!(r, expected);
    }

    #[test]
    fn composite_takes_three_values(format_ok: bool, correct: bool) {
        let r = solver_reward_composite(format_ok, correct, &RewardWeights::default());
        prop_assert!([0.0, 0.1, 1.0].iter().any(|v| (r - v).abs() < 1e-12));
        prop_assert!(r <= 1.0);
    }

    #[test]
    fn majority_vote_is_permutation_invariant(
        answers in prop::collection::vec(prop::sample::select(vec!["1", "2", "3", "a", "B", "b"]), 1..12),
        seed in any::<u64>(),
    ) {
        let (label, frac) = majority_vote(&answers).unwrap();
        let mut shuffled = answers.clone();
        let n = shuffled.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(majority_vote(&shuffled).unwrap(), (label.clone(), frac));
        // counting oracle
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for a in &answers {
            *counts.entry(normalize_answer(a)).or_default() += 1;
        }
        let best = counts.values().max().copied().unwrap();
        let first = counts.iter().find(|(_, &c)| c == best).map(|(k, _)| k.clone()).unwrap();
        prop_assert_eq!(label, first);
        prop_assert!((frac - best as f64 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn success_rate_times_m_is_integral(js in prop::collection::vec(any::<bool>(), 1..64)) {
        let p = success_rate(&js).unwrap();
        let k = p * js.len() as f64;
        prop_assert!((k - k.round()).abs() < 1e-9);
        prop_assert_eq!(k.round() as usize, js.iter().filter(|&&j| j).count());
    }

    #[test]
    fn normalization_is_idempotent(s in "[ a-zA-Z0-9./-]{0,16}( degrees| units| cm)?") {
        let once = normalize_answer(&s);
        prop_assert_eq!(normalize_answer(&once), once.clone());
    }

    #[test]
    fn judges_are_reflexive(s in "[a-z0-9./]{1,10}") {
        prop_assert!(judge_exact(&s, &s).correct);
        prop_assert!(judge_numeric(&s, &s).correct);
    }

    #[test]
    fn band_filter_matches_a_naive_scan(
        ps in prop::collection::vec(0.0f64..=1.0, 0..40),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let items: Vec<_> = ps.iter().enumerate().map(|(i, &p)| stats(i, p)).collect();
        let kept = filter_mid_band(&items, lo, hi).unwrap();
        let mut naive = Vec::new();
        for s in &items {
            if s.p_hat >= lo && s.p_hat <= hi {
                naive.push(s.clone());
            }
        }
        prop_assert_eq!(kept, naive);
    }

    #[test]
    fn curriculum_weights_average_one(ps in prop::collection::vec(0.0f64..=1.0, 1..30)) {
        let w = curriculum_weights(&ps);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12);
        let closest = ps.iter().map(|p| (p - 0.5).abs()).fold(f64::INFINITY, f64::min);
        let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (p, x) in ps.iter().zip(&w) {
            if ((p - 0.5).abs() - closest).abs() < 1e-15 {
                prop_assert!((x - wmax).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn advantages_sum_to_zero_and_ignore_affine_maps(
        rs in prop::collection::vec(-5.0f64..5.0, 2..16),
        shift in -10.0f64..10.0,
        scale in 0.1f64..10.0,
    ) {
        let a = group_advantages(&rs, 0.0).unwrap();
        prop_assert!(a.iter().sum::<f64>().abs() < 1e-9 * rs.len() as f64);
        let moved: Vec<f64> = rs.iter().map(|r| scale * r + shift).collect();
        let b = group_advantages(&moved, 0.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_groups_have_exactly_zero_advantage(c in -1e6f64..1e6, n in 2usize..64) {
        prop_assert!(group_advantages(&vec![c; n], 1e-8).unwrap().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn kl_estimator_is_non_negative(new in -20.0f64..0.0, reference in -20.0f64..0.0) {
        prop_assert!(kl_penalty(new, reference) >= 0.0);
    }

    #[test]
    fn diversity_ignores_order_and_falls_on_duplication(batch in prop::collection::vec(sentence(), 1..8), pick in any::<prop::sample::Index>()) {
        let d = lexical_diversity(&batch, 2).unwrap();
        prop_assert!(d > 0.0 && d <= 100.0);
        let mut rev = batch.clone();
        rev.reverse();
        prop_assert!((lexical_diversity(&rev, 2).unwrap() - d).abs() < 1e-9);
        let mut dup = batch.clone();
        dup.push(batch[pick.index(batch.len())].clone());
        prop_assert!(lexical_diversity(&dup, 2).unwrap() < d);
    }

    #[test]
    fn rep_penalty_relabels_with_the_batch(batch in prop::collection::vec(sentence(), 1..8)) {
        let p = rep_penalty(&batch, 0.5).unwrap();
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        let mut rev = batch.clone();
        rev.reverse();
        let mut q = rep_penalty(&rev, 0.5).unwrap();
        q.reverse();
        prop_assert_eq!(p.clone(), q);
        for i in 0..batch.len() {
            for j in 0..batch.len() {
                if batch[i] == batch[j] {
                    prop_assert_eq!(p[i], p[j]);
                }
            }
        }
    }

    #[test]
    fn question_aligns_with_itself(q in sentence(), others in prop::collection::vec(sentence(), 0..4)) {
        let mut examples: Vec<AnchorExample> = others
            .iter()
            .enumerate()
            .map(|(i, p)| AnchorExample { id: i.to_string(), prompt: p.clone(), gold_answer: "1".into(), domain: None })
            .collect();
        examples.push(AnchorExample { id: "self".into(), prompt: q.clone(), gold_answer: "1".into(), domain: None });
        let pool = AnchorPool::new(examples).unwrap();
        prop_assert!((align_score(&q, &pool) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn difficulty_is_antitone(ps in prop::collection::vec(0.0f64..=0.9, 1..10), i in any::<prop::sample::Index>(), bump in 0.0f64..0.1) {
        let base: Vec<_> = ps.iter().enumerate().map(|(k, &p)| stats(k, p)).collect();
        let d = difficulty(&base).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        let mut up = base.clone();
        let k = i.index(up.len());
        up[k].p_hat += bump;
        prop_assert!(difficulty(&up).unwrap() <= d + 1e-15);
    }

    #[test]
    fn boxed_parser_never_panics(s in "[\\\\a-z{}]{0,40}") {
        let _ = parse_boxed_answer(&s);
    }

    #[test]
    fn question_block_round_trip(body in "[A-Za-z0-9 ?+=]{0,30}[A-Za-z0-9?]") {
        let (valid, text) = validate_question(&render_question_block(&body));
        prop_assert!(valid);
        prop_assert_eq!(text, body.trim());
    }

    #[test]
    fn schedule_alternation(c in 0u64..6, s in 0u64..12, cycles in 0u64..8) {
        prop_assume!(c + s > 0);
        let sched = Schedule { challenger_steps: c, solver_steps: s };
        let phases: Vec<Phase> = sched.phases(cycles).collect();
        let mut expected = Vec::new();
        for _ in 0..cycles {
            expected.extend(std::iter::repeat_n(Phase::Challenger, c as usize));
            expected.extend(std::iter::repeat_n(Phase::Solver, s as usize));
        }
        prop_assert_eq!(phases, expected);
    }

    #[test]
    fn sim_question_round_trip(bin in 0usize..64, nonce in any::<u64>()) {
        let q = SimQuestion::new(bin, nonce);
        prop_assert_eq!(SimQuestion::parse(&q.rendered_text), Some((bin, q.nonce)));
    }

    #[test]
    fn mastery_stays_in_unit_interval_and_never_decreases(
        c in prop::collection::vec(0.0f64..=1.0, 3..10),
        outcomes in prop::collection::vec((0usize..10, 0.0f64..3.0, 0.0f64..=1.0), 0..20),
        eta in 0.01f64..=1.0,
    ) {
        let mut s = SimSolver::new(c.clone(), eta).unwrap();
        let o: Vec<TrainingOutcome> = outcomes
            .into_iter()
            .map(|(bin, weight, reward)| TrainingOutcome { bin, weight, reward })
            .collect();
        s.learn(&o);
        for (before, after) in c.iter().zip(&s.competence) {
            prop_assert!((0.0..=1.0).contains(after));
            prop_assert!(after >= before);
        }
    }
}

#[test]
fn shaping_grid_of_1001_points() {
    for i in 0..=1000 {
        let p = i as f64 / 1000.0;
        assert!((difficulty_shaping(p) - difficulty_shaping(1.0 - p)).abs() < 1e-12);
    }
    assert_eq!(difficulty_shaping(0.5), 1.0);
    assert_eq!(difficulty_shaping(0.0), 0.0);
    assert_eq!(difficulty_shaping(1.0), 0.0);
}
