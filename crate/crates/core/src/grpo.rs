//! A toy group-relative policy optimization loop.
//!
//! The policy is a softmax over a small pool of canned responses per prompt.
//! Each step samples `k` responses per prompt, scores them through the
//! reward engine, normalizes rewards within the group, and moves the logits
//! along the advantage-weighted score function.
//!
//! Defaults are sized for the toy problem (`k = 8`, `lr = 0.1`, 300 steps).
//! Large-model runs of the same recipe use 16 rollouts per prompt and a
//! learning rate of 5e-6; those values mean nothing for a tabular policy.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fanout::map_bounded;
use crate::gateway::{FailurePolicy, Gateway};
use crate::io::parse_jsonl;
use crate::reward::{score, MethodConfig, ScoreError, ScoringItem};
use crate::rubric::{LikertNorm, RewardMethod, Rubric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown prompt_id {0}")]
    UnknownPrompt(String),
    #[error("prompt {0} has an empty response pool")]
    EmptyPool(String),
    #[error("duplicate prompt_id {0}")]
    DuplicatePrompt(String),
    #[error("group size must be at least 2, got {0}")]
    GroupTooSmall(usize),
    #[error("learning rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// One training prompt with its candidate responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPrompt {
    pub prompt_id: String,
    pub prompt: String,
    pub pool: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<Rubric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

/// The bundled ten-prompt keyword dataset. In every pool exactly one
/// response satisfies all Essential criteria of its rubric.
pub fn toy_dataset() -> Vec<ToyPrompt> {
    parse_jsonl(
        include_str!("../data/toy_prompts.jsonl"),
        std::path::Path::new("toy_prompts.jsonl"),
    )
    .expect("bundled toy dataset parses")
}

/// Per-prompt logits over each response pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub logits: BTreeMap<String, Vec<f64>>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl ToyPolicy {
    /// All-zero logits, i.e. uniform sampling.
    pub fn uniform(prompts: &[ToyPrompt]) -> Result<Self, SimError> {
        Self::init(prompts, 0.0, 0)
    }

    /// Logits drawn i.i.d. from `N(0, scale²)`; `scale = 0` gives uniform.
    pub fn init(prompts: &[ToyPrompt], scale: f64, seed: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut logits = BTreeMap::new();
        for p in prompts {
            if p.pool.is_empty() {
                return Err(SimError::EmptyPool(p.prompt_id.clone()));
            }
            let row = (0..p.pool.len())
                .map(|_| {
                    if scale == 0.0 {
                        0.0
                    } else {
                        scale * rng.sample::<f64, _>(StandardNormal)
                    }
                })
                .collect();
            if logits.insert(p.prompt_id.clone(), row).is_some() {
                return Err(SimError::DuplicatePrompt(p.prompt_id.clone()));
            }
        }
        Ok(ToyPolicy { logits })
    }

    fn row(&self, prompt_id: &str) -> Result<&Vec<f64>, SimError> {
        self.logits
            .get(prompt_id)
            .ok_or_else(|| SimError::UnknownPrompt(prompt_id.to_string()))
    }

    pub fn probs(&self, prompt_id: &str) -> Result<Vec<f64>, SimError> {
        Ok(softmax(self.row(prompt_id)?))
    }

    /// Most likely response; the lowest index wins ties.
    pub fn argmax(&self, prompt_id: &str) -> Result<usize, SimError> {
        let row = self.row(prompt_id)?;
        Ok(row
            .iter()
            .enumerate()
            .fold(0, |best, (i, &l)| if l > row[best] { i } else { best }))
    }
}

/// Draws `k` independent response indices from the prompt's softmax.
pub fn sample_group(
    policy: &ToyPolicy,
    prompt_id: &str,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, SimError> {
    let probs = policy.probs(prompt_id)?;
    let dist =
        WeightedIndex::new(&probs).map_err(|_| SimError::EmptyPool(prompt_id.to_string()))?;
    Ok((0..k).map(|_| rng.sample(&dist)).collect())
}

/// Standard deviation convention for advantage normalization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    #[default]
    Population,
    Sample,
}

/// `(r - mean) / (std + epsilon)`, or all zeros when every reward is equal.
pub fn group_advantages(
    rewards: &[f64],
    epsilon: f64,
    std_kind: StdKind,
) -> Result<Vec<f64>, SimError> {
    let k = rewards.len();
    if k < 2 {
        return Err(SimError::GroupTooSmall(k));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; k]);
    }
    let mean = rewards.iter().sum::<f64>() / k as f64;
    let ss: f64 = rewards.iter().map(|r| (r - mean).powi(2)).sum();
    let denom = match std_kind {
        StdKind::Population => k as f64,
        StdKind::Sample => (k - 1) as f64,
    };
    let std = (ss / denom).sqrt();
    Ok(rewards
        .iter()
        .map(|r| (r - mean) / (std + epsilon))
        .collect())
}

/// One prompt's rollouts within a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingGroup {
    pub prompt_id: String,
    pub responses: Vec<usize>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// `Σ_n a_n · log softmax(θ)[i_n]`, the quantity the update ascends.
pub fn surrogate(logits: &[f64], responses: &[usize], advantages: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    responses
        .iter()
        .zip(advantages)
        .map(|(&i, a)| a * (logits[i] - lse))
        .sum()
}

/// Exact gradient of [`surrogate`]: `Σ_n a_n (1[j = i_n] − π_j)`.
pub fn surrogate_gradient(logits: &[f64], responses: &[usize], advantages: &[f64]) -> Vec<f64> {
    let p = softmax(logits);
    let total_adv: f64 = advantages.iter().sum();
    let mut grad: Vec<f64> = p.iter().map(|pj| -total_adv * pj).collect();
    for (&i, a) in responses.iter().zip(advantages) {
        grad[i] += a;
    }
    grad
}

/// Gradient ascent on every group's surrogate. All gradients are taken at
/// the incoming policy, then applied.
pub fn policy_update(
    policy: &mut ToyPolicy,
    groups: &[TrainingGroup],
    learning_rate: f64,
) -> Result<(), SimError> {
    let mut steps: Vec<(&str, Vec<f64>)> = Vec::with_capacity(groups.len());
    for g in groups {
        let grad = surrogate_gradient(policy.row(&g.prompt_id)?, &g.responses, &g.advantages);
        steps.push((&g.prompt_id, grad));
    }
    for (id, grad) in steps {
        let row = policy.logits.get_mut(id).expect("checked above");
        for (l, d) in row.iter_mut().zip(grad) {
            *l += learning_rate * d;
        }
    }
    Ok(())
}

fn default_k() -> usize {
    8
}
fn default_steps() -> usize {
    300
}
fn default_lr() -> f64 {
    0.1
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_method() -> RewardMethod {
    RewardMethod::RaRExplicit
}
fn default_in_flight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Prompts per step; 0 means every prompt.
    #[serde(default)]
    pub batch_prompts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub std: StdKind,
    /// Spread of the random initial logits; 0 starts uniform.
    #[serde(default)]
    pub init_logit_scale: f64,
    #[serde(default = "default_method")]
    pub method: RewardMethod,
    #[serde(default)]
    pub likert_norm: LikertNorm,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_failure")]
    pub failure_policy: FailurePolicy,
}

fn default_failure() -> FailurePolicy {
    FailurePolicy::Abort
}

impl Default for SimConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.k < 2 {
            return Err(SimError::GroupTooSmall(self.k));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SimError::BadLearningRate(self.learning_rate));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub prompt_id: String,
    pub mean_reward: f64,
    pub argmax_index: usize,
    pub method: RewardMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub log: Vec<LogEntry>,
    pub initial: ToyPolicy,
    pub policy: ToyPolicy,
    /// Groups dropped after a judge failure.
    pub dropped_groups: usize,
}

impl TrainingRun {
    /// Mean of the logged per-prompt rewards at each step.
    pub fn step_means(&self) -> Vec<f64> {
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for e in &self.log {
            let s = sums.entry(e.step).or_default();
            s.0 += e.mean_reward;
            s.1 += 1;
        }
        sums.values().map(|(s, n)| s / *n as f64).collect()
    }
}

/// Runs `config.steps` rounds of sample → score → normalize → update.
pub fn run_training(
    config: &SimConfig,
    prompts: &[ToyPrompt],
    gateway: &Gateway,
) -> Result<TrainingRun, SimError> {
    run_training_observed(config, prompts, gateway, |_, _| {})
}

/// [`run_training`] with a callback that sees every step's groups.
pub fn run_training_observed(
    config: &SimConfig,
    prompts: &[ToyPrompt],
    gateway: &Gateway,
    mut observe: impl FnMut(usize, &[TrainingGroup]),
) -> Result<TrainingRun, SimError> {
    config.validate()?;
    let initial = ToyPolicy::init(prompts, config.init_logit_scale, config.seed)?;
    let mut policy = initial.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let method = MethodConfig {
        method: config.method,
        likert_norm: config.likert_norm,
    };
    let mut memo: HashMap<(usize, usize), Result<f64, ScoreError>> = HashMap::new();
    let mut log = Vec::new();
    let mut dropped_groups = 0;

    for step in 0..config.steps {
        let batch: Vec<usize> = if config.batch_prompts == 0
            || config.batch_prompts >= prompts.len()
        {
            (0..prompts.len()).collect()
        } else {
            let mut b = sample_indices(&mut rng, prompts.len(), config.batch_prompts).into_vec();
            b.sort_unstable();
            b
        };
        let mut samples = Vec::with_capacity(batch.len());
        for &p in &batch {
            samples.push(sample_group(
                &policy,
                &prompts[p].prompt_id,
                config.k,
                &mut rng,
            )?);
        }

        let mut todo: Vec<(usize, usize)> = batch
            .iter()
            .zip(&samples)
            .flat_map(|(&p, s)| s.iter().map(move |&i| (p, i)))
            .filter(|key| !memo.contains_key(key))
            .collect();
        todo.sort_unstable();
        todo.dedup();
        let scored = map_bounded(&todo, config.max_in_flight, |_, &(p, i)| {
            let tp = &prompts[p];
            let item = ScoringItem {
                prompt_id: tp.prompt_id.clone(),
                response_id: Some(format!("{}#{i}", tp.prompt_id)),
                prompt: tp.prompt.clone(),
                response: tp.pool[i].clone(),
                reference: tp.reference.clone(),
                rubric: tp.rubric.clone(),
                ground_truth: tp.ground_truth.clone(),
            };
            score(&item, &method, gateway).map(|r| r.score)
        });
        memo.extend(todo.into_iter().zip(scored));

        let mut groups = Vec::with_capacity(batch.len());
        for (&p, responses) in batch.iter().zip(samples) {
            let rewards: Result<Vec<f64>, ScoreError> =
                responses.iter().map(|&i| memo[&(p, i)].clone()).collect();
            let rewards = match rewards {
                Ok(r) => r,
                Err(e) if config.failure_policy == FailurePolicy::Abort => return Err(e.into()),
                Err(_) => {
                    dropped_groups += 1;
                    continue;
                }
            };
            let advantages = group_advantages(&rewards, config.epsilon, config.std)?;
            groups.push(TrainingGroup {
                prompt_id: prompts[p].prompt_id.clone(),
                responses,
                rewards,
                advantages,
            });
        }
        policy_update(&mut policy, &groups, config.learning_rate)?;
        observe(step, &groups);
        for g in &groups {
            log.push(LogEntry {
                step,
                prompt_id: g.prompt_id.clone(),
                mean_reward: g.rewards.iter().sum::<f64>() / g.rewards.len() as f64,
                argmax_index: policy.argmax(&g.prompt_id)?,
                method: config.method,
            });
        }
    }
    Ok(TrainingRun {
        log,
        initial,
        policy,
        dropped_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(id: &str, n: usize) -> ToyPrompt {
        ToyPrompt {
            prompt_id: id.into(),
            prompt: "p".into(),
            pool: (0..n).map(|i| format!("r{i}")).collect(),
            rubric: None,
            reference: None,
            ground_truth: None,
        }
    }

    #[test]
    fn advantages_examples() {
        let a = group_advantages(&[1.0, 0.0, 0.0, 1.0], 0.0, StdKind::Population).unwrap();
        assert_eq!(a, vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(
            group_advantages(&[0.6, 0.6, 0.6], 1e-8, StdKind::Population).unwrap(),
            vec![0.0; 3]
        );
        assert!(matches!(
            group_advantages(&[1.0], 1e-8, StdKind::Population),
            Err(SimError::GroupTooSmall(1))
        ));
    }

    #[test]
    fn degenerate_pool_and_determinism() {
        let policy = ToyPolicy::uniform(&[pool("a", 1), pool("b", 4)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_group(&policy, "a", 8, &mut rng).unwrap(), vec![0; 8]);
        let draw = |s| sample_group(&policy, "b", 16, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        assert_eq!(draw(9), draw(9));
        assert!(matches!(
            sample_group(&policy, "zz", 2, &mut rng),
            Err(SimError::UnknownPrompt(_))
        ));
    }

    #[test]
    fn positive_advantage_raises_probability() {
        let mut policy = ToyPolicy::uniform(&[pool("a", 3)]).unwrap();
        let before = policy.probs("a").unwrap()[1];
        let g = TrainingGroup {
            prompt_id: "a".into(),
            responses: vec![1],
            rewards: vec![1.0],
            advantages: vec![1.0],
        };
        policy_update(&mut policy, &[g], 0.1).unwrap();
        assert!(policy.probs("a").unwrap()[1] > before);

        let snapshot = policy.clone();
        let zero = TrainingGroup {
            prompt_id: "a".into(),
            responses: vec![0, 2],
            rewards: vec![0.5, 0.5],
            advantages: vec![0.0, 0.0],
        };
        policy_update(&mut policy, &[zero], 0.1).unwrap();
        assert_eq!(policy, snapshot);
    }

    #[test]
    fn two_arm_bandit_converges() {
        let mut policy = ToyPolicy::uniform(&[pool("a", 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut reached = None;
        for step in 0..500 {
            let responses = sample_group(&policy, "a", 8, &mut rng).unwrap();
            let rewards: Vec<f64> = responses
                .iter()
                .map(|&i| if i == 0 { 1.0 } else { 0.0 })
                .collect();
            let advantages = group_advantages(&rewards, 1e-8, StdKind::Population).unwrap();
            let g = TrainingGroup {
                prompt_id: "a".into(),
                responses,
                rewards,
                advantages,
            };
            policy_update(&mut policy, &[g], 0.1).unwrap();
            if policy.probs("a").unwrap()[0] > 0.9 {
                reached = Some(step);
                break;
            }
        }
        assert!(reached.is_some());
    }

    #[test]
    fn toy_dataset_loads() {
        let data = toy_dataset();
        assert_eq!(data.len(), 10);
        assert!(data.iter().all(|p| p.rubric.is_some() && p.pool.len() >= 3));
    }

    #[test]
    fn default_config() {
        let c = SimConfig::default();
        assert_eq!(
            (c.k, c.steps, c.learning_rate, c.epsilon),
            (8, 300, 0.1, 1e-8)
        );
        assert_eq!(c.std, StdKind::Population);
    }
}
