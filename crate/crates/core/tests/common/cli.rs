//! Helpers that drive the `rar` binary.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use super::data_path;

pub fn rar(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rar"));
    cmd.current_dir(dir)
        .args(args)
        .env_remove("JUDGE_API_KEY")
        .env_remove("JUDGE_BASE_URL")
        .env_remove("RAR_CACHE_DIR")
        .env_remove("RUST_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

pub fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = rar(dir, args, &[]);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

pub fn data(name: &str) -> String {
    data_path(name).to_string_lossy().into_owned()
}

pub fn lines<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Runs every subcommand into `dir` and returns the artifacts by name.
pub fn pipeline(dir: &Path, cache: &Path) -> (BTreeMap<String, Vec<u8>>, Vec<Value>) {
    let cache = cache.to_str().unwrap();
    let (tasks, items, rubrics, mcq, responses, ideal, pairs) = (
        data("tasks.jsonl"),
        data("items.jsonl"),
        data("rubrics.jsonl"),
        data("mcq.jsonl"),
        data("responses.jsonl"),
        data("ideal.jsonl"),
        data("pairs.jsonl"),
    );
    let g = ["--cache-dir", cache];
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "synthesize",
            "--input",
            &tasks,
            "--out",
            "rubrics.jsonl",
            "--report",
            "synth.json",
        ],
        vec![
            "score",
            "--method",
            "rar-explicit",
            "--input",
            &items,
            "--rubrics",
            &rubrics,
            "--out",
            "scores.jsonl",
        ],
        vec![
            "score",
            "--method",
            "simple-likert",
            "--input",
            &items,
            "--out",
            "likert.jsonl",
        ],
        vec![
            "sim-grpo",
            "--steps",
            "30",
            "--seed",
            "3",
            "--out",
            "train.jsonl",
            "--policy-out",
            "policy.json",
        ],
        vec![
            "eval-extract",
            "--mcq",
            &mcq,
            "--responses",
            &responses,
            "--out",
            "mcq.json",
        ],
        vec!["gen-pairs", "--input", &ideal, "--out", "pairs.jsonl"],
        vec![
            "bench-alignment",
            "--pairs",
            &pairs,
            "--rubrics",
            &rubrics,
            "--out",
            "bench.json",
        ],
        vec!["cache", "stats"],
    ];
    let mut summaries = Vec::new();
    for args in runs {
        let all: Vec<&str> = g.iter().copied().chain(args).collect();
        summaries.push(ok(dir, &all));
    }
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            files.insert(
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            );
        }
    }
    (files, summaries)
}
