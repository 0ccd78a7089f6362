//! Scores the bundled items under every reward method with the offline
//! keyword judge and prints a comparison table.
//!
//! cargo run --example score_methods

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rubric_rewards::gateway::{BackendKind, MockKeyword};
use rubric_rewards::io::read_jsonl;
use rubric_rewards::reward::{score_dataset, MethodConfig, ScoringItem};
use rubric_rewards::{FailurePolicy, Gateway, JudgeBackend, RewardMethod, Rubric};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let rubrics: BTreeMap<String, Rubric> = read_jsonl::<Rubric>(&data.join("rubrics.jsonl"))?
        .into_iter()
        .map(|r| (r.prompt_id.clone(), r))
        .collect();
    let items: Vec<ScoringItem> = read_jsonl::<ScoringItem>(&data.join("items.jsonl"))?
        .into_iter()
        .map(|mut it| {
            it.rubric = rubrics.get(&it.prompt_id).cloned();
            it
        })
        .collect();

    let judge = Gateway::new(
        JudgeBackend::mock("mock:keyword", BackendKind::MockKeyword),
        Arc::new(MockKeyword::new()),
    );

    print!("{:<18}", "method");
    for it in &items {
        print!("{:>14}", it.prompt_id);
    }
    println!("{:>8}", "calls");
    for method in RewardMethod::ALL {
        let (records, summary) = score_dataset(
            &items,
            &MethodConfig::new(method),
            &judge,
            4,
            FailurePolicy::Abort,
        )?;
        print!("{:<18}", method.cli_name());
        for r in &records {
            print!("{:>14.3}", r.score);
        }
        println!("{:>8}", summary.backend_calls);
    }
    Ok(())
}
