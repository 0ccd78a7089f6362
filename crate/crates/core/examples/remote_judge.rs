//! Scores one item against a real OpenAI-compatible chat-completions
//! endpoint. Needs JUDGE_BASE_URL and JUDGE_API_KEY; JUDGE_MODEL picks the
//! model (default gpt-4o-mini). Responses are cached under
//! $RAR_CACHE_DIR when set.
//!
//! JUDGE_BASE_URL=https://api.openai.com/v1 JUDGE_API_KEY=... cargo run --example remote_judge

use std::sync::Arc;
use std::time::Duration;

use rubric_rewards::gateway::{RemoteChat, ResponseCache};
use rubric_rewards::reward::{score, MethodConfig, ScoringItem};
use rubric_rewards::{Category, Criterion, Gateway, JudgeBackend, RewardMethod, Rubric};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let (Ok(url), Ok(key)) = (
        std::env::var("JUDGE_BASE_URL"),
        std::env::var("JUDGE_API_KEY"),
    ) else {
        eprintln!("set JUDGE_BASE_URL and JUDGE_API_KEY to run this example");
        return Ok(());
    };
    let model = std::env::var("JUDGE_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into());

    let transport = RemoteChat::new(&url, &model, 0.0, key, Duration::from_secs(60));
    let mut gateway = Gateway::new(
        JudgeBackend::remote("remote", &url, &model),
        Arc::new(transport),
    )
    .with_max_in_flight(4);
    if let Ok(dir) = std::env::var("RAR_CACHE_DIR") {
        gateway = gateway.with_cache(ResponseCache::on_disk(dir)?);
    }

    let rubric = Rubric::new(
        "burn",
        vec![
            Criterion::new(
                "Cool water",
                "Essential Criteria: Advises cooling the burn under running water.",
                Category::Essential,
            )?,
            Criterion::new(
                "No ice",
                "Important Criteria: Warns against applying ice directly.",
                Category::Important,
            )?,
            Criterion::new(
                "Cover it",
                "Optional Criteria: Suggests a clean non-stick dressing.",
                Category::Optional,
            )?,
            Criterion::new(
                "No butter",
                "Pitfall Criteria: Does not recommend butter or oils.",
                Category::Pitfall,
            )?,
        ],
    )?;
    let item = ScoringItem::new("burn", "I just burned my hand on the stove. What should I do?", "Hold it under cool running water for 20 minutes, then cover it loosely. Skip ice and butter.")
        .with_rubric(rubric);

    for method in [
        RewardMethod::SimpleLikert,
        RewardMethod::RaRImplicit,
        RewardMethod::RaRExplicit,
    ] {
        let r = score(&item, &MethodConfig::new(method), &gateway)?;
        println!("{:<14} {:.3}", method.cli_name(), r.score);
        if let Some(vs) = &r.verdicts {
            for (v, c) in vs.iter().zip(&item.rubric.as_ref().unwrap().items) {
                println!(
                    "    {} {}",
                    if v.satisfied { "yes" } else { "no " },
                    c.title
                );
            }
        }
    }
    println!("{} backend calls", gateway.backend_calls());
    Ok(())
}
