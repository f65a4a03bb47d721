use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use proptest::prelude::*;
use spamlens_cli::manifest::{hash_path, sha256_bytes};
use spamlens_cli::{
    cmd_eval_report, cmd_ingest, cmd_predict, cmd_train, holdout_split, CliConfig, CliError, EvalArgs, IngestArgs,
    PredictArgs, PredictionRecord, SyntheticKind, TrainArgs,
};
use spamlens_core::corpus::Label;
use spamlens_service::Snapshot;
use tempfile::TempDir;

const LR: &str = "[model]\nkind = \"logistic_regression\"\n";

fn ingest_args(out: PathBuf) -> IngestArgs {
    IngestArgs {
        opspam: None,
        records: None,
        synthetic: Some(SyntheticKind::Opspam),
        size: Some(60),
        max_words: None,
        balance: false,
        out,
        manifest: None,
    }
}

fn corpus_in(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    cmd_ingest(&ingest_args(path.clone()), Some(5), &CliConfig::default()).unwrap();
    path
}

fn recipe_in(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn train_args(dir: &Path, corpus: PathBuf, recipe: PathBuf, name: &str) -> TrainArgs {
    TrainArgs { corpus, recipe, out_dir: dir.join("models"), name: name.into(), holdout: None, manifest: None }
}

fn eval_args(corpus: PathBuf, recipe: PathBuf, report: PathBuf) -> EvalArgs {
    EvalArgs { corpus, recipe, kfold: Some(3), bootstrap: None, report, manifest: None }
}

#[test]
fn ingest_is_reproducible_and_manifested() {
    let dir = TempDir::new().unwrap();
    let src = corpus_in(dir.path());
    let run = |name: &str| {
        let mut a = ingest_args(dir.path().join(name));
        a.synthetic = None;
        a.size = None;
        a.records = Some(src.clone());
        a.max_words = Some(150);
        a.balance = true;
        cmd_ingest(&a, Some(7), &CliConfig::default()).unwrap()
    };
    let a = run("a.jsonl");
    let b = run("b.jsonl");
    let (fa, fb) = (fs::read(dir.path().join("a.jsonl")).unwrap(), fs::read(dir.path().join("b.jsonl")).unwrap());
    assert_eq!(fa, fb);
    let m = a.manifest.unwrap();
    assert_eq!(m.artifacts[0].sha256, sha256_bytes(&fa));
    assert_eq!(m.inputs[0].sha256, hash_path(&src).unwrap().sha256);
    assert_eq!(b.manifest.unwrap().artifacts[0].sha256, m.artifacts[0].sha256);
    assert!(dir.path().join("a.jsonl.manifest.json").exists());
    let corpus = spamlens_cli::read_corpus(&dir.path().join("a.jsonl")).unwrap();
    assert_eq!(corpus.count(Label::Deceptive), corpus.count(Label::Genuine));
    assert!(corpus.len() < 120);
}

#[test]
fn training_is_deterministic_and_servable() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus_in(dir.path());
    let recipe = recipe_in(dir.path(), "lr.toml", LR);
    let a = cmd_train(&train_args(dir.path(), corpus.clone(), recipe.clone(), "a"), Some(1), &CliConfig::default()).unwrap();
    let b = cmd_train(&train_args(dir.path(), corpus, recipe, "b"), Some(1), &CliConfig::default()).unwrap();
    let (ma, mb) = (a.manifest.unwrap(), b.manifest.unwrap());
    assert_eq!(ma.artifacts.len(), 3);
    // model and pipeline files are identical; meta differs only by name
    assert_eq!(ma.artifacts[0].sha256, mb.artifacts[0].sha256);
    assert_eq!(ma.artifacts[1].sha256, mb.artifacts[1].sha256);
    let snap = Snapshot::load_dir(&dir.path().join("models"), None).unwrap();
    assert_eq!(snap.names(), ["a", "b"]);
}

#[test]
fn holdout_training_reports_accuracy() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus_in(dir.path());
    let recipe = recipe_in(dir.path(), "lr.json", r#"{"model": {"kind": "logistic_regression"}}"#);
    let mut args = train_args(dir.path(), corpus, recipe, "held");
    args.holdout = Some(0.25);
    let out = cmd_train(&args, None, &CliConfig::default()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("models/held.holdout.json")).unwrap()).unwrap();
    assert_eq!(report["n_test"], 30);
    assert_eq!(report["n_train"], 90);
    assert_eq!(out.manifest.unwrap().artifacts.len(), 4);
    let meta = fs::read_to_string(dir.path().join("models/held.meta.json")).unwrap();
    assert!(meta.contains("held.holdout.json"));
}

#[test]
fn recipe_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus_in(dir.path());
    let bad = recipe_in(dir.path(), "bad.toml", &format!("{LR}[train]\nlearning_rate = -0.1\n"));
    let err = cmd_train(&train_args(dir.path(), corpus.clone(), bad, "x"), None, &CliConfig::default()).unwrap_err();
    assert!(matches!(err, CliError::Invalid(_)));
    assert!(err.to_string().contains("learning_rate"), "{err}");
    assert_eq!(err.exit_code(), 4);

    let typo = recipe_in(dir.path(), "typo.toml", &format!("{LR}[train]\nlearnig_rate = 0.1\n"));
    let err = cmd_train(&train_args(dir.path(), corpus, typo, "x"), None, &CliConfig::default()).unwrap_err();
    assert!(err.to_string().contains("learnig_rate"), "{err}");
}

#[test]
fn eval_reports_are_hash_equal_across_runs() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus_in(dir.path());
    let recipe = recipe_in(dir.path(), "lr.toml", LR);
    let (ra, oa) = cmd_eval_report(&eval_args(corpus.clone(), recipe.clone(), dir.path().join("a.json")), Some(9), &CliConfig::default()).unwrap();
    let (_, ob) = cmd_eval_report(&eval_args(corpus.clone(), recipe.clone(), dir.path().join("b.json")), Some(9), &CliConfig::default()).unwrap();
    assert_eq!(ra.splits.len(), 3);
    let ha = &oa.manifest.unwrap().artifacts[0].sha256;
    assert_eq!(ha, &ob.manifest.unwrap().artifacts[0].sha256);
    let seq = CliConfig { exec: spamlens_core::ExecMode::Sequential, ..Default::default() };
    let (_, oc) = cmd_eval_report(&eval_args(corpus, recipe, dir.path().join("c.json")), Some(9), &seq).unwrap();
    assert_eq!(ha, &oc.manifest.unwrap().artifacts[0].sha256);
}

#[test]
fn bootstrap_eval_has_one_row_per_repeat() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus_in(dir.path());
    let recipe = recipe_in(dir.path(), "lr.toml", LR);
    let mut args = eval_args(corpus, recipe, dir.path().join("r.json"));
    args.kfold = None;
    args.bootstrap = Some(4);
    let (report, out) = cmd_eval_report(&args, None, &CliConfig::default()).unwrap();
    assert_eq!(report.per_split_accuracy.len(), 4);
    assert_eq!(out.summary.lines().filter(|l| l.starts_with("bootstrap")).count(), 4, "{}", out.summary);
}

#[test]
fn predict_scores_every_record() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus_in(dir.path());
    let recipe = recipe_in(dir.path(), "lr.toml", LR);
    cmd_train(&train_args(dir.path(), corpus.clone(), recipe, "lr"), None, &CliConfig::default()).unwrap();
    let out = dir.path().join("pred.jsonl");
    let args = PredictArgs { model_dir: dir.path().join("models"), name: None, text: None, input: Some(corpus.clone()), out: Some(out.clone()) };
    cmd_predict(&args, &CliConfig::default()).unwrap();
    let recs: Vec<PredictionRecord> =
        fs::read_to_string(&out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 120);
    let gold = spamlens_cli::read_corpus(&corpus).unwrap();
    let correct = recs.iter().zip(gold.reviews()).filter(|(r, g)| r.id == g.id && r.label == g.label).count();
    assert!(correct >= 100, "{correct} of 120 on training data");

    let args = PredictArgs { model_dir: dir.path().join("models"), name: Some("lr".into()), text: Some("lovely".into()), input: None, out: None };
    let line = cmd_predict(&args, &CliConfig::default()).unwrap().summary;
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert!(v["contributions"].is_array() && v["margin"].is_number());
}

#[test]
fn binary_emits_error_records_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let corpus = corpus_in(dir.path());
    let recipe = recipe_in(dir.path(), "lr.toml", LR);
    let bin = env!("CARGO_BIN_EXE_spamlens");
    let report = dir.path().join("r.json");
    let out = Process::new(bin)
        .args(["eval", "--kfold", "1", "--corpus"])
        .arg(&corpus)
        .arg("--recipe")
        .arg(&recipe)
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let rec: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(rec["error"]["command"], "eval");
    assert!(rec["error"]["message"].as_str().unwrap().contains("--kfold"));

    let out = Process::new(bin).args(["eval", "--kfold", "2", "--bootstrap", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = Process::new(bin).args(["predict", "--model-dir"]).arg(dir.path().join("nothing")).args(["--text", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(5));

    let cfg = recipe_in(dir.path(), "cfg.toml", "exec = \"sideways\"\n");
    let out = Process::new(bin).arg("--config").arg(&cfg).args(["ingest", "--synthetic", "opspam", "--out"]).arg(dir.path().join("x.jsonl")).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    let ok = Process::new(bin)
        .args(["--seed", "3", "--config"])
        .arg(recipe_in(dir.path(), "seq.toml", "exec = \"sequential\"\n"))
        .args(["ingest", "--synthetic", "yelp", "--size", "40", "--out"])
        .arg(dir.path().join("y.jsonl"))
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
}

proptest! {
    #[test]
    fn holdout_partitions_each_class(n_dec in 2usize..40, n_gen in 2usize..40, frac in 0.05f64..0.5, seed in any::<u64>()) {
        let labels: Vec<Label> = (0..n_dec).map(|_| Label::Deceptive).chain((0..n_gen).map(|_| Label::Genuine)).collect();
        let (train, test) = holdout_split(&labels, frac, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        let dec_test = test.iter().filter(|&&i| labels[i] == Label::Deceptive).count();
        prop_assert_eq!(dec_test, (frac * n_dec as f64).ceil() as usize);
        prop_assert_eq!(holdout_split(&labels, frac, seed).unwrap(), (train, test));
    }
}

#[test]
fn shipped_recipes_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        spamlens_cli::load_recipe(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}
