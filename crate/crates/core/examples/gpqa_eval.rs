//! Multiple-choice grading: choice permutation per seed, boxed-answer
//! extraction, and the verifier fallback for responses with no box.
//!
//! cargo run --example gpqa_eval

use std::path::Path;
use std::sync::Arc;

use rubric_rewards::eval::{
    extract_boxed, mcq_accuracy, permute_choices, McqInstance, McqRun, MeanStd,
};
use rubric_rewards::gateway::{BackendKind, MockScripted};
use rubric_rewards::io::read_jsonl;
use rubric_rewards::{Gateway, JudgeBackend};
use serde::Deserialize;

#[derive(Deserialize)]
struct Line {
    id: String,
    run: usize,
    seed: u64,
    response: String,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let instances: Vec<McqInstance> = read_jsonl(&data.join("mcq.jsonl"))?;
    let lines: Vec<Line> = read_jsonl(&data.join("responses.jsonl"))?;

    let (shuffled, map) = permute_choices(&instances[0], 11);
    println!(
        "seed 11 view of {}:\n{}",
        instances[0].id,
        shuffled.render()
    );
    println!(
        "correct label moves {} -> {}\n",
        instances[0].correct_label,
        map.apply(instances[0].correct_label)
    );

    let mut runs: Vec<McqRun> = Vec::new();
    for l in &lines {
        if runs.len() <= l.run {
            runs.resize(
                l.run + 1,
                McqRun {
                    seed: l.seed,
                    responses: Vec::new(),
                },
            );
        }
        let pos = instances
            .iter()
            .position(|i| i.id == l.id)
            .expect("known instance");
        let run = &mut runs[l.run];
        run.responses
            .resize(instances.len().max(run.responses.len()), String::new());
        run.responses[pos] = l.response.clone();
        println!(
            "run {} {}: extracted {:?}",
            l.run,
            l.id,
            extract_boxed(&l.response)
        );
    }

    // The verifier is asked only about unboxed responses. This one
    // accepts everything.
    let lenient = Gateway::new(
        JudgeBackend::mock("lenient", BackendKind::MockScripted),
        Arc::new(MockScripted::constant("Yes")),
    );
    let with = mcq_accuracy(&instances, &runs, Some(&lenient), 4)?;
    let without = mcq_accuracy(&instances, &runs, None, 4)?;
    println!("\nper-run accuracy {:?}", with.per_run);
    println!(
        "with verifier    {} ({} verified)",
        MeanStd::of(&with.per_run),
        with.verified
    );
    println!("without verifier {}", MeanStd::of(&without.per_run));
    Ok(())
}
