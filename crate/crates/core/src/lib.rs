//! Rubric-based reward signals for on-policy RL.
//!
//! Prompt-specific checklist rubrics become scalar rewards either by
//! judging each criterion and taking a normalized weighted sum (explicit
//! aggregation) or by asking one judge for a holistic 1–10 rating with the
//! full rubric in view (implicit aggregation).
//!
//! Modules, bottom-up:
//!
//! * [`rubric`]: criteria, rubrics, verdicts and the aggregation math
//! * [`templates`], [`parse`], [`gateway`]: judge prompts, reply parsing,
//!   backends (remote chat-completions or offline mocks), cache and fan-out
//! * [`synthesis`]: rubric generation and validation
//! * [`reward`]: scoring (prompt, response) pairs under every reward method
//! * [`grpo`]: a toy-scale group-relative policy optimization loop
//! * [`eval`]: multiple-choice answer extraction, preference pairs and
//!   judge-alignment accuracy
//! * [`cli`]: the `rar` command-line front end
//!
//! Runnable walkthroughs live in this crate's `examples/` directory.

pub mod cli;
pub mod eval;
pub mod fanout;
pub mod gateway;
pub mod grpo;
pub mod io;
pub mod parse;
pub mod reward;
pub mod rubric;
pub mod synthesis;
pub mod templates;

pub use gateway::{FailurePolicy, Gateway, JudgeBackend, JudgeError, JudgeRequest, JudgmentResult};
pub use rubric::{
    category_weight, explicit_reward, normalize_likert, rlvr_reward, Category, Criterion,
    CriterionVerdict, RewardMethod, RewardRecord, Rubric,
};
