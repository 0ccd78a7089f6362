//! Rubric synthesis against the bundled tasks with the offline keyword
//! judge, plus what happens when the generator keeps emitting bad rubrics.
//!
//! cargo run --example synthesize_rubrics

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rubric_rewards::gateway::{BackendKind, MockKeyword, MockScripted};
use rubric_rewards::io::read_jsonl;
use rubric_rewards::synthesis::{synthesize, synthesize_all, SynthesisTask, DEFAULT_ATTEMPTS};
use rubric_rewards::templates::{render_rubric_list, RubricRendering};
use rubric_rewards::{Gateway, JudgeBackend};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let tasks: Vec<SynthesisTask> = read_jsonl(&data.join("tasks.jsonl"))?;

    let judge = Gateway::new(
        JudgeBackend::mock("mock:keyword", BackendKind::MockKeyword),
        Arc::new(MockKeyword::new()),
    );
    let (rubrics, report) = synthesize_all(&tasks, &judge, DEFAULT_ATTEMPTS, 4);
    println!(
        "{} of {} tasks produced a rubric\n",
        report.succeeded, report.total
    );
    for r in &rubrics {
        println!(
            "{} ({} criteria, total weight {:.1})",
            r.prompt_id,
            r.len(),
            r.total_weight()
        );
        println!("{}\n", render_rubric_list(r, RubricRendering::Categories));
    }

    // A generator that only ever returns three items fails validation on
    // every attempt; the raw text is kept for inspection.
    let short = r#"[{"title": "Calls for help", "description": "Essential Criteria: Calls emergency services.", "weight": 5},
                    {"title": "Aspirin", "description": "Important Criteria: Mentions aspirin.", "weight": 4},
                    {"title": "Rest", "description": "Optional Criteria: Advises rest.", "weight": 1}]"#;
    let stubborn = Gateway::new(
        JudgeBackend::mock("stubborn", BackendKind::MockScripted),
        Arc::new(MockScripted::constant(short)),
    )
    .with_backoff(Duration::ZERO);
    match synthesize(&tasks[0], &stubborn, DEFAULT_ATTEMPTS) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected after {} calls: {e}", stubborn.backend_calls()),
    }
    Ok(())
}
