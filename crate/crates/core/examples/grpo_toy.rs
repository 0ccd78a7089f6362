//! Trains the toy softmax policy on the bundled keyword dataset with
//! explicit rubric rewards, implicit rubric rewards, and a constant judge,
//! then reports how often the final policy prefers the rubric-satisfying
//! response.
//!
//! cargo run --example grpo_toy

use std::sync::Arc;
use std::time::Instant;

use rubric_rewards::gateway::{BackendKind, MockKeyword, MockScripted};
use rubric_rewards::grpo::{run_training, toy_dataset, SimConfig};
use rubric_rewards::reward::judge_rubric;
use rubric_rewards::{Category, Gateway, JudgeBackend, RewardMethod};

fn main() {
    let data = toy_dataset();
    let keyword = || {
        Gateway::new(
            JudgeBackend::mock("mock:keyword", BackendKind::MockKeyword),
            Arc::new(MockKeyword::new()),
        )
    };

    // The response that satisfies every Essential criterion of its rubric.
    let judge = keyword();
    let best: Vec<usize> = data
        .iter()
        .map(|p| {
            let rubric = p.rubric.as_ref().unwrap();
            (0..p.pool.len())
                .find(|&i| {
                    let verdicts = judge_rubric(&judge, &p.prompt, &p.pool[i], rubric).unwrap();
                    verdicts
                        .iter()
                        .zip(&rubric.items)
                        .all(|(v, c)| v.satisfied || c.category != Category::Essential)
                })
                .unwrap()
        })
        .collect();

    let constant = || {
        Gateway::new(
            JudgeBackend::mock("mock:scripted", BackendKind::MockScripted),
            Arc::new(MockScripted::constant("{\"rating\": 5}")),
        )
    };

    for (label, method, gateway) in [
        ("explicit rubric", RewardMethod::RaRExplicit, keyword()),
        ("implicit rubric", RewardMethod::RaRImplicit, keyword()),
        ("constant rating", RewardMethod::SimpleLikert, constant()),
    ] {
        let config = SimConfig {
            method,
            seed: 7,
            init_logit_scale: 1.0,
            ..SimConfig::default()
        };
        let t = Instant::now();
        let run = run_training(&config, &data, &gateway).expect("training run");
        let hits = data
            .iter()
            .zip(&best)
            .filter(|(p, &b)| run.policy.argmax(&p.prompt_id).unwrap() == b)
            .count();
        let means = run.step_means();
        println!(
            "{label:>16}: {hits}/10 prompts prefer the best response, reward {:.3} -> {:.3}, {} judge calls, {:.2?}",
            means.first().unwrap(),
            means.last().unwrap(),
            gateway.backend_calls(),
            t.elapsed()
        );
    }
}
