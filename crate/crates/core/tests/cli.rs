//! Drives the `textmetric` binary as a subprocess.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SPEC: &str = "n_clusters = 3\nitems_per_cluster = 5\n";
const CONFIG: &str = "steps = 15\nd_model = 16\nff_dim = 32\nvocab_size = 128\n";

fn textmetric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textmetric")).args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Run {
    checkpoint: Vec<u8>,
    metrics: Vec<u8>,
    embeddings: Vec<u8>,
    rankings: Vec<u8>,
    eval_stdout: String,
}

fn pipeline(dir: &Path) -> Run {
    let spec = dir.join("spec.toml");
    let config = dir.join("train.toml");
    fs::write(&spec, SPEC).unwrap();
    fs::write(&config, CONFIG).unwrap();
    let data = dir.join("catalog.jsonl");
    let ann = dir.join("annotations.jsonl");
    let ckpt = dir.join("model.ckpt");
    let emb = dir.join("emb.jsonl");
    let ranks = dir.join("rankings.csv");

    let steps: [Vec<&str>; 4] = [
        vec!["synth", "--spec", arg(&spec), "--out-data", arg(&data), "--out-annotations", arg(&ann)],
        vec!["train", "--config", arg(&config), "--data", arg(&data), "--out", arg(&ckpt)],
        vec!["embed", "--checkpoint", arg(&ckpt), "--data", arg(&data), "--out", arg(&emb)],
        vec!["rank", "--embeddings", arg(&emb), "--all", "--out", arg(&ranks)],
    ];
    for s in &steps {
        let out = textmetric(s);
        assert!(out.status.success(), "{s:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let eval = textmetric(&["eval", "--rankings", arg(&ranks), "--annotations", arg(&ann)]);
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));

    Run {
        checkpoint: fs::read(&ckpt).unwrap(),
        metrics: fs::read(dir.join("model.ckpt.metrics.csv")).unwrap(),
        embeddings: fs::read(&emb).unwrap(),
        rankings: fs::read(&ranks).unwrap(),
        eval_stdout: String::from_utf8(eval.stdout).unwrap(),
    }
}

#[test]
fn pipeline_runs_and_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path());
    let second = pipeline(b.path());

    let lines: Vec<&str> = first.eval_stdout.lines().collect();
    assert_eq!(lines.len(), 2, "{}", first.eval_stdout);
    assert_eq!(lines[0], "mpr,mrr,hr10,hr100");
    assert_eq!(lines[1].split(',').count(), 4);

    let metrics = String::from_utf8(first.metrics.clone()).unwrap();
    assert!(metrics.starts_with("step,mlm,metric,total\n"));
    assert_eq!(metrics.lines().count(), 16);

    assert_eq!(first.checkpoint, second.checkpoint);
    assert_eq!(first.metrics, second.metrics);
    assert_eq!(first.embeddings, second.embeddings);
    assert_eq!(first.rankings, second.rankings);
    assert_eq!(first.eval_stdout, second.eval_stdout);
}

#[test]
fn single_source_ranking() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let emb = dir.path().join("emb.jsonl");
    let out = dir.path().join("one.csv");
    let catalog = fs::read_to_string(dir.path().join("catalog.jsonl")).unwrap();
    let first_id = catalog.lines().nth(1).unwrap().split('"').nth(3).unwrap().to_string();
    let run = textmetric(&["rank", "--embeddings", arg(&emb), "--source", &first_id, "--out", arg(&out)]);
    assert!(run.status.success());
    let text = fs::read_to_string(&out).unwrap();
    // header plus every other item
    assert_eq!(text.lines().count(), 15);
    assert!(text.lines().skip(1).all(|l| l.starts_with(&format!("{first_id},"))));

    let missing = textmetric(&["rank", "--embeddings", arg(&emb), "--source", "nope", "--out", arg(&out)]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");

    let unknown = textmetric(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&unknown.stderr).trim().lines().count(), 1);

    let missing = textmetric(&["train", "--data", "/nonexistent/catalog.jsonl", "--out", arg(&out)]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&missing.stderr).trim().lines().count(), 1);

    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "batch_sise = 4\n").unwrap();
    let data = dir.path().join("catalog.jsonl");
    fs::write(&data, "").unwrap();
    let bad = textmetric(&["train", "--config", arg(&bad_cfg), "--data", arg(&data), "--out", arg(&out)]);
    assert_eq!(bad.status.code(), Some(2));

    // an empty catalog parses but cannot be trained on
    let empty = textmetric(&["train", "--data", arg(&data), "--out", arg(&out)]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(!out.exists());

    let help = textmetric(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn eval_rejects_annotations_outside_the_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let ranks = dir.path().join("r.csv");
    fs::write(&ranks, "source_id,candidate_id,rank,score\na,b,1,0.1\nb,a,1,0.1\n").unwrap();
    let ann = dir.path().join("a.jsonl");
    fs::write(
        &ann,
        "{\"schema\":\"textmetric.annotations\",\"version\":1}\n{\"source_id\":\"a\",\"similar_ids\":[\"zzz\"]}\n",
    )
    .unwrap();
    let run = textmetric(&["eval", "--rankings", arg(&ranks), "--annotations", arg(&ann)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("zzz"));
}
