#![allow(dead_code)]

pub mod cli;
pub mod fixtures;
pub mod golden;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use rubric_rewards::gateway::{BackendKind, MockKeyword, MockScripted};
use rubric_rewards::grpo::ToyPrompt;
use rubric_rewards::reward::judge_rubric;
use rubric_rewards::{Category, Criterion, Gateway, JudgeBackend, Rubric};
use serde::de::DeserializeOwned;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn fixture<T: DeserializeOwned>(name: &str) -> Vec<T> {
    rubric_rewards::io::read_jsonl(&fixture_path(name)).unwrap()
}

/// Category weights written out independently of the library table.
pub fn oracle_weight(category: Category) -> f64 {
    match category {
        Category::Essential => 1.0,
        Category::Important => 0.7,
        Category::Optional => 0.3,
        Category::Pitfall => 0.8,
    }
}

/// Weighted fraction of satisfied items, summed term by term.
pub fn brute_force(weights: &[f64], flags: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, f) in weights.iter().zip(flags) {
        den += w;
        if *f {
            num += w;
        }
    }
    num / den
}

pub fn random_category(rng: &mut impl Rng) -> Category {
    Category::ALL[rng.random_range(0..4)]
}

pub fn rubric_from(categories: &[Category]) -> Rubric {
    let items = categories
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            Criterion::new(format!("Item {i}"), format!("{} Check {i}.", c.prefix()), c).unwrap()
        })
        .collect();
    Rubric::new("p", items).unwrap()
}

pub fn rubric_with_weights(weights: &[f64]) -> Rubric {
    let items = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            Criterion::unprefixed(
                format!("Item {i}"),
                format!("Check {i}."),
                Category::Essential,
                w,
            )
            .unwrap()
        })
        .collect();
    Rubric::new("p", items).unwrap()
}

pub fn flags_of(mask: u32, k: usize) -> Vec<bool> {
    (0..k).map(|i| mask >> i & 1 == 1).collect()
}

pub fn keyword_gateway() -> Gateway {
    Gateway::new(
        JudgeBackend::mock("mock:keyword", BackendKind::MockKeyword),
        Arc::new(MockKeyword::new()),
    )
}

pub fn scripted_gateway(replies: &[&str]) -> Gateway {
    Gateway::new(
        JudgeBackend::mock("mock:scripted", BackendKind::MockScripted),
        Arc::new(MockScripted::new(
            replies.iter().map(|s| s.to_string()).collect(),
        )),
    )
    .with_backoff(Duration::ZERO)
}

pub fn constant_gateway(reply: &str) -> Gateway {
    Gateway::new(
        JudgeBackend::mock("mock:constant", BackendKind::MockScripted),
        Arc::new(MockScripted::constant(reply)),
    )
}

/// Index of the pool response that satisfies every Essential criterion,
/// found by checking each criterion with the keyword judge.
pub fn toy_best(data: &[ToyPrompt]) -> Vec<usize> {
    let judge = keyword_gateway();
    data.iter()
        .map(|p| {
            let rubric = p.rubric.as_ref().unwrap();
            let hits: Vec<usize> = (0..p.pool.len())
                .filter(|&i| {
                    judge_rubric(&judge, &p.prompt, &p.pool[i], rubric)
                        .unwrap()
                        .iter()
                        .zip(&rubric.items)
                        .all(|(v, c)| v.satisfied || c.category != Category::Essential)
                })
                .collect();
            assert_eq!(hits.len(), 1, "{}", p.prompt_id);
            hits[0]
        })
        .collect()
}
