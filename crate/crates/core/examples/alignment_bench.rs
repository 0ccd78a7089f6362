//! Judge-alignment accuracy on preference pairs: rubric-guided rating
//! versus a plain rating, on synthetic pairs and on pairs generated by
//! perturbing ideal completions.
//!
//! cargo run --example alignment_bench

use std::path::Path;
use std::sync::Arc;

use rubric_rewards::eval::{
    alignment_accuracy, generate_pairs, synthetic_pairs, IdealItem, TiePolicy,
};
use rubric_rewards::gateway::{BackendKind, MockKeyword};
use rubric_rewards::io::read_jsonl;
use rubric_rewards::{FailurePolicy, Gateway, JudgeBackend, RewardMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let judge = Gateway::new(
        JudgeBackend::mock("mock:keyword", BackendKind::MockKeyword),
        Arc::new(MockKeyword::new()),
    );

    let pairs = synthetic_pairs(200, 1);
    println!(
        "example pair:\n  chosen:   {}\n  rejected: {}\n",
        pairs[0].chosen, pairs[0].rejected
    );
    for method in [RewardMethod::RaRImplicit, RewardMethod::SimpleLikert] {
        for ties in [TiePolicy::Incorrect, TiePolicy::Half] {
            let r = alignment_accuracy(&pairs, &judge, method, ties, 8)?;
            println!(
                "{:<14} ties={:<9} accuracy {:.3}  (correct {}, ties {}, incorrect {})",
                method.cli_name(),
                format!("{ties:?}"),
                r.accuracy,
                r.n_correct,
                r.n_ties,
                r.n_incorrect
            );
        }
    }

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let ideal: Vec<IdealItem> = read_jsonl(&data.join("ideal.jsonl"))?;
    let (generated, failed) = generate_pairs(&judge, &ideal, 4, FailurePolicy::Drop)?;
    println!(
        "\n{} pairs generated, {} failed",
        generated.len(),
        failed.len()
    );
    for p in &generated {
        println!(
            "  removed {:?}, added {:?}",
            p.meta.chunks_removed, p.meta.chunks_added
        );
    }
    Ok(())
}
