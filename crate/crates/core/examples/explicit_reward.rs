//! Explicit aggregation by hand: build a rubric, record verdicts, and
//! turn them into a reward.
//!
//! cargo run --example explicit_reward

use rubric_rewards::reward::predefined_rubric;
use rubric_rewards::{
    category_weight, explicit_reward, normalize_likert, rlvr_reward, Category, Criterion,
    CriterionVerdict, Rubric,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rubric = Rubric::new(
        "chest-pain",
        vec![
            Criterion::new(
                "Calls emergency services",
                "Essential Criteria: Advises calling emergency services immediately.",
                Category::Essential,
            )?,
            Criterion::new(
                "Aspirin advice",
                "Important Criteria: Suggests chewing aspirin unless allergic.",
                Category::Important,
            )?,
            Criterion::new(
                "Explains warning signs",
                "Optional Criteria: Names other heart attack warning signs.",
                Category::Optional,
            )?,
            Criterion::new(
                "No self-transport",
                "Pitfall Criteria: Does not suggest driving to the hospital alone.",
                Category::Pitfall,
            )?,
        ],
    )?;

    println!("weights:");
    for c in &rubric.items {
        println!(
            "  {:<26} {:<9} {:.1}",
            c.title,
            c.category.as_str(),
            c.aggregation_weight
        );
    }
    println!("total weight {:.1}\n", rubric.total_weight());

    // Every subset of satisfied criteria, as a small table.
    for mask in 0u32..16 {
        let flags: Vec<bool> = (0..4).map(|i| mask >> i & 1 == 1).collect();
        let reward = explicit_reward(&rubric, &CriterionVerdict::from_flags(&flags))?;
        let marks: String = flags.iter().map(|&f| if f { 'x' } else { '.' }).collect();
        println!("  [{marks}] {reward:.4}");
    }

    // One unit-weight criterion is just a verifiable reward.
    let single = Rubric::new(
        "math",
        vec![Criterion::unprefixed(
            "Correct",
            "Final answer matches.",
            Category::Essential,
            1.0,
        )?],
    )?;
    for hit in [false, true] {
        let r = explicit_reward(&single, &[CriterionVerdict::new(0, hit)])?;
        assert_eq!(r, rlvr_reward(hit));
    }
    println!("\nsingle-criterion rubric == verifiable reward");

    println!(
        "\ngeneric rubric has {} criteria; Essential weight {}",
        predefined_rubric().len(),
        category_weight(Category::Essential)
    );
    println!(
        "Likert 1/7/10 -> {:.3}/{:.3}/{:.3}",
        normalize_likert(1)?,
        normalize_likert(7)?,
        normalize_likert(10)?
    );
    Ok(())
}
