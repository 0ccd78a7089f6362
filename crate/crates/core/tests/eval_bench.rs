mod common;

use common::{constant_gateway, keyword_gateway, scripted_gateway};
use proptest::prelude::*;
use rubric_rewards::eval::{
    alignment_accuracy, generate_pairs, grade_response, label_map_for_seed, mcq_accuracy,
    permute_choices, synthetic_pairs, IdealItem, Label, McqInstance, McqRun, TiePolicy,
};
use rubric_rewards::gateway::FailurePolicy;
use rubric_rewards::RewardMethod;

fn instances() -> Vec<McqInstance> {
    let text = std::fs::read_to_string(common::data_path("mcq.jsonl")).unwrap();
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn grading_follows_the_answer_text_under_any_permutation() {
    let insts = instances();
    for seed in 0..100 {
        for inst in &insts {
            let (permuted, map) = permute_choices(inst, seed);
            assert_eq!(permuted.correct_text(), inst.correct_text());
            assert_eq!(permuted.correct_label, map.apply(inst.correct_label));
            for label in Label::ALL {
                let g = grade_response(&permuted, &format!("\\boxed{{{label}}}"), None).unwrap();
                assert_eq!(
                    g.correct,
                    permuted.choices[label.index()] == inst.correct_text()
                );
            }
        }
    }
}

fn answering_run(insts: &[McqInstance], seed: u64, right: bool) -> McqRun {
    let map = label_map_for_seed(seed);
    let responses = insts
        .iter()
        .map(|i| {
            let correct = map.apply(i.correct_label);
            let label = if right {
                correct
            } else {
                Label::from_index((correct.index() + 1) % 4).unwrap()
            };
            format!("Final: \\boxed{{{label}}}")
        })
        .collect();
    McqRun { seed, responses }
}

proptest! {
    #[test]
    fn knowing_the_answer_scores_one_under_every_seed(seed in any::<u64>()) {
        let insts = instances();
        let r = mcq_accuracy(&insts, &[answering_run(&insts, seed, true)], None, 4).unwrap();
        prop_assert_eq!(r.mean, 1.0);
        let r = mcq_accuracy(&insts, &[answering_run(&insts, seed, false)], None, 4).unwrap();
        prop_assert_eq!(r.mean, 0.0);
    }
}

#[test]
fn alternating_runs_report_half_plus_minus_half() {
    let insts = instances();
    let runs: Vec<McqRun> = [true, false, true, false]
        .iter()
        .enumerate()
        .map(|(i, &right)| answering_run(&insts, 100 + i as u64, right))
        .collect();
    let r = mcq_accuracy(&insts, &runs, None, 2).unwrap();
    assert_eq!(r.per_run, vec![1.0, 0.0, 1.0, 0.0]);
    assert_eq!((r.mean, r.std), (0.5, 0.5));
}

#[test]
fn unboxed_answers_go_to_the_verifier() {
    let insts = instances();
    let run = McqRun {
        seed: 0,
        responses: vec!["I think it is light itself.".into(); insts.len()],
    };
    let yes = constant_gateway("Yes");
    let r = mcq_accuracy(&insts, std::slice::from_ref(&run), Some(&yes), 1).unwrap();
    assert_eq!((r.mean, r.verified), (1.0, insts.len()));
    let r = mcq_accuracy(&insts, &[run], None, 1).unwrap();
    assert_eq!((r.mean, r.verified), (0.0, 0));
}

#[test]
fn rubric_guidance_separates_pairs() {
    let pairs = synthetic_pairs(200, 1);
    let g = keyword_gateway();
    let rar = alignment_accuracy(
        &pairs,
        &g,
        RewardMethod::RaRImplicit,
        TiePolicy::Incorrect,
        8,
    )
    .unwrap();
    let simple = alignment_accuracy(
        &pairs,
        &g,
        RewardMethod::SimpleLikert,
        TiePolicy::Incorrect,
        8,
    )
    .unwrap();
    assert_eq!(rar.accuracy, 1.0);
    assert_eq!(simple.accuracy, 0.0);
    assert_eq!(simple.n_ties, 200);
    let half =
        alignment_accuracy(&pairs, &g, RewardMethod::SimpleLikert, TiePolicy::Half, 8).unwrap();
    assert_eq!(half.accuracy, 0.5);
}

#[test]
fn swapping_pairs_mirrors_the_counts() {
    let pairs = synthetic_pairs(60, 9);
    let swapped: Vec<_> = pairs.iter().map(|p| p.swapped()).collect();
    let g = keyword_gateway();
    for method in [RewardMethod::RaRImplicit, RewardMethod::SimpleLikert] {
        let a = alignment_accuracy(&pairs, &g, method, TiePolicy::Incorrect, 4).unwrap();
        let b = alignment_accuracy(&swapped, &g, method, TiePolicy::Incorrect, 4).unwrap();
        assert_eq!(a.n_correct, b.n_incorrect);
        assert_eq!(a.n_incorrect, b.n_correct);
        assert_eq!(a.n_ties, b.n_ties);
        assert_eq!(
            a.n_correct + a.n_ties + a.n_incorrect + a.n_dropped,
            a.n_pairs
        );
        assert!((0.0..=1.0).contains(&a.accuracy));
    }
}

#[test]
fn explicit_methods_are_refused_by_the_bench() {
    let pairs = synthetic_pairs(2, 0);
    let err = alignment_accuracy(
        &pairs,
        &keyword_gateway(),
        RewardMethod::RaRExplicit,
        TiePolicy::Incorrect,
        1,
    );
    assert!(err.is_err());
}

#[test]
fn failed_generations_are_dropped_or_abort() {
    let items = vec![
        IdealItem {
            prompt_id: Some("a".into()),
            prompt: "p".into(),
            ideal_completion: "Rest and drink water.".into(),
        },
        IdealItem {
            prompt_id: Some("b".into()),
            prompt: "q".into(),
            ideal_completion: "Call a doctor.".into(),
        },
    ];
    let g = scripted_gateway(&["not the format"]);
    let (pairs, failed) = generate_pairs(&g, &items, 2, FailurePolicy::Drop).unwrap();
    assert!(pairs.is_empty());
    assert_eq!(failed.iter().map(|f| f.0).collect::<Vec<_>>(), vec![0, 1]);
    assert!(generate_pairs(&g, &items, 2, FailurePolicy::Abort).is_err());
}
