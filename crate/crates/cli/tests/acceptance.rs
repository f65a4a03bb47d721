//! Acceptance checks. Prints one status line per criterion and exits non-zero
//! if any criterion fails. Criteria whose data is unavailable print BLOCKED.
//!
//! The hotel-corpus criteria read the corpus from `OPSPAM_DIR`. Without it a
//! synthetic corpus of the same size exercises the same path, and its numbers
//! are printed for information only.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use spamlens_cli::{cmd_eval_report, cmd_ingest, CliConfig, EvalArgs, IngestArgs, SyntheticKind};
use spamlens_core::artifact::{BundleMeta, ModelBundle};
use spamlens_core::corpus::{bootstrap_splits, stratified_kfold, tokenize, Corpus, Label, Review};
use spamlens_core::eval::{fit_recipe, ModelRecipe, RunOptions};
use spamlens_core::features::{tfidf_vector, PipelineConfig, Vocabulary};
use spamlens_core::models::{random_trial, ModelKind, ModelSpec};
use spamlens_core::{synth, ExecMode};
use spamlens_service::analysis::{analyze_business, BadgeKind, BadgeThresholds};
use tempfile::TempDir;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Blocked,
    NotApplicable,
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, status: Status, id: &str, detail: impl AsRef<str>) {
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Blocked => "BLOCKED",
            Status::NotApplicable => "N/A",
        };
        if status == Status::Fail {
            self.failed += 1;
        }
        println!("{tag:<8} {id:<30} {}", detail.as_ref());
    }

    fn check(&mut self, ok: bool, id: &str, detail: impl AsRef<str>) {
        self.line(if ok { Status::Pass } else { Status::Fail }, id, detail);
    }
}

fn sequential() -> CliConfig {
    CliConfig { exec: ExecMode::Sequential, ..Default::default() }
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn ingest(dir: &Path, name: &str, opspam: Option<PathBuf>, synthetic: Option<(SyntheticKind, usize)>) -> PathBuf {
    let out = dir.join(name);
    let args = IngestArgs {
        opspam,
        records: None,
        synthetic: synthetic.map(|s| s.0),
        size: synthetic.map(|s| s.1),
        max_words: None,
        balance: false,
        out: out.clone(),
        manifest: None,
    };
    cmd_ingest(&args, Some(1), &sequential()).unwrap();
    out
}

/// Mean accuracy over `seeds`, sequential, with total wall-clock.
fn eval_mean(dir: &Path, corpus: &Path, recipe: &Path, kfold: Option<usize>, bootstrap: Option<usize>, seeds: &[u64]) -> (f64, Duration) {
    let start = Instant::now();
    let mut sum = 0.0;
    for &seed in seeds {
        let args = EvalArgs {
            corpus: corpus.to_owned(),
            recipe: recipe.to_owned(),
            kfold,
            bootstrap,
            report: dir.join(format!("report-{seed}.json")),
            manifest: None,
        };
        let (report, _) = cmd_eval_report(&args, Some(seed), &sequential()).unwrap();
        sum += report.mean_accuracy;
    }
    (sum / seeds.len() as f64, start.elapsed())
}

const LR: &str = "[model]\nkind = \"logistic_regression\"\n";
const SVM: &str = "[model]\nkind = \"linear_svm\"\n";
const FFNN: &str = "[model]\nkind = \"ffnn\"\nhidden = [32, 16]\n\n[features]\nrepresentation = \"counts\"\n";

fn hotel_corpus(r: &mut Report, dir: &Path) {
    let lr = write(dir, "lr.toml", LR);
    let svm = write(dir, "svm.toml", SVM);
    let ffnn = write(dir, "ffnn.toml", FFNN);
    let real = std::env::var_os("OPSPAM_DIR").map(PathBuf::from);
    let corpus = match &real {
        Some(d) => ingest(dir, "opspam.jsonl", Some(d.clone()), None),
        None => ingest(dir, "opspam-proxy.jsonl", None, Some((SyntheticKind::Opspam, 800))),
    };
    let runs = [
        ("opspam-lr-5fold-3seeds", &lr, Some(5), None, &[1u64, 2, 3][..], Some(300)),
        ("opspam-svm-bootstrap10", &svm, None, Some(10), &[1][..], None),
        ("opspam-ffnn-32-16-bow-5fold", &ffnn, Some(5), None, &[1][..], Some(1200)),
    ];
    for (id, recipe, kfold, bootstrap, seeds, budget_secs) in runs {
        let (acc, took) = eval_mean(dir, &corpus, recipe, kfold, bootstrap, seeds);
        let budget = budget_secs.map_or(String::new(), |b| format!(" (budget {b}s)"));
        let detail = format!("mean accuracy {acc:.4} (need >= 0.82), {:.1}s single-threaded{budget}", took.as_secs_f64());
        if real.is_some() {
            let in_time = budget_secs.is_none_or(|b| took.as_secs() < b);
            r.check(acc >= 0.82 && in_time, id, detail);
        } else {
            r.line(Status::Blocked, id, format!("OPSPAM_DIR not set; synthetic stand-in only: {detail}"));
        }
    }
}

fn synthetic_user_features(r: &mut Report, dir: &Path) {
    let corpus = ingest(dir, "yelp.jsonl", None, Some((SyntheticKind::Yelp, 2000)));
    let bow = write(dir, "bow.toml", &format!("{LR}\n[features]\nrepresentation = \"counts\"\n"));
    let both = write(dir, "bow-user.toml", &format!("{LR}\n[features]\nrepresentation = \"counts\"\nuser_features = true\n"));
    let (a, _) = eval_mean(dir, &corpus, &bow, Some(10), None, &[1]);
    let (b, took) = eval_mean(dir, &corpus, &both, Some(10), None, &[1]);
    let gain = (b - a) * 100.0;
    r.check(
        gain >= 5.0,
        "synthetic-yelp-user-features",
        format!("LR 10-fold BoW {a:.4}, BoW+reviewer {b:.4}, gain {gain:+.1} points (need >= +5), {:.1}s", took.as_secs_f64()),
    );
}

fn gradient_suite(r: &mut Report) {
    let start = Instant::now();
    let mut worst: Vec<(ModelKind, f64)> = Vec::new();
    let mut errors = Vec::new();
    for kind in [ModelKind::Ffnn, ModelKind::CnnBow, ModelKind::CnnEmbedding, ModelKind::Lstm] {
        let mut max = 0.0f64;
        for seed in 0..10 {
            match random_trial(kind, seed) {
                Ok(g) => max = max.max(g.max_rel_error),
                Err(e) => errors.push(format!("{kind:?}/{seed}: {e}")),
            }
        }
        worst.push((kind, max));
    }
    let took = start.elapsed();
    let ok = errors.is_empty() && worst.iter().all(|w| w.1 < 1e-4) && took < Duration::from_secs(60);
    let detail: Vec<String> = worst.iter().map(|(k, e)| format!("{k:?} {e:.1e}")).collect();
    r.check(ok, "gradient-suite-10x4", format!("max rel error {} (need < 1e-4), {:.1}s {}", detail.join(", "), took.as_secs_f64(), errors.join("; ")));
}

fn protocol_properties(r: &mut Report) {
    let labels: Vec<Label> = (0..1600).map(|i| if i < 800 { Label::Deceptive } else { Label::Genuine }).collect();
    let folds = stratified_kfold(&labels, 5, 11).unwrap();
    let folds_ok = folds.len() == 5
        && folds.iter().all(|s| {
            let dec = s.test_idx.iter().filter(|&&i| labels[i] == Label::Deceptive).count();
            dec == 160 && s.test_idx.len() - dec == 160
        });
    let boots = bootstrap_splits(&labels, 10, 11).unwrap();
    let train_ok = boots.len() == 10 && boots.iter().all(|s| s.train_idx.len() == 1600);
    let oob = boots.iter().map(|s| s.test_idx.len() as f64 / 1600.0).sum::<f64>() / 10.0;
    let distinct = boots
        .iter()
        .map(|s| s.train_idx.iter().collect::<std::collections::HashSet<_>>().len() as f64 / 1600.0)
        .sum::<f64>()
        / 10.0;
    let e = (-1.0f64).exp();
    let ok = folds_ok && train_ok && (distinct - (1.0 - e)).abs() < 0.05 && (oob - e).abs() < 0.05;
    r.check(
        ok,
        "protocol-properties",
        format!(
            "5-fold test folds 160+160: {folds_ok}; bootstrap train size 1600: {train_ok}; \
             distinct in-bag {distinct:.4} vs 1-1/e {:.4}; out-of-bag {oob:.4} vs 1/e {e:.4}",
            1.0 - e
        ),
    );
}

fn tfidf_oracle(r: &mut Report) {
    let docs: Vec<Review> = ["a b", "b c", "c c d"].iter().enumerate().map(|(i, t)| Review::new(i.to_string(), *t)).collect();
    let vocab = Vocabulary::build(&Corpus::new(docs).unwrap(), None).unwrap();
    // idf = ln(4/(1+df)) + 1, weights = tf*idf / L2 norm, worked by hand
    let table: [(&str, [f64; 4]); 4] = [
        ("a b b", [0.5493512310263033, 0.8355915419449177, 0.0, 0.0]),
        ("c c d", [0.0, 0.0, 0.8355915419449177, 0.5493512310263033]),
        ("a d", [std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0, std::f64::consts::FRAC_1_SQRT_2]),
        ("b c", [0.0, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2, 0.0]),
    ];
    let mut worst = 0.0f64;
    for (doc, expected) in table {
        let got = tfidf_vector(&tokenize(doc), &vocab).to_dense();
        for (g, e) in got.iter().zip(expected) {
            worst = worst.max((g - e).abs());
        }
    }
    r.check(worst <= 1e-9, "tfidf-oracle", format!("max abs deviation {worst:.1e} over 4 hand-computed vectors (need <= 1e-9)"));
}

fn eval_determinism(r: &mut Report, dir: &Path) {
    let corpus = ingest(dir, "det.jsonl", None, Some((SyntheticKind::Opspam, 100)));
    let ffnn = write(dir, "det-ffnn.toml", "[model]\nkind = \"ffnn\"\nhidden = [8, 4]\n\n[features]\nrepresentation = \"counts\"\n");
    let lr = write(dir, "det-lr.toml", LR);
    let mut same = true;
    let mut digest = String::new();
    for recipe in [&lr, &ffnn] {
        let hashes: Vec<String> = ["a", "b"]
            .iter()
            .map(|tag| {
                let args = EvalArgs {
                    corpus: corpus.clone(),
                    recipe: recipe.clone(),
                    kfold: Some(3),
                    bootstrap: None,
                    report: dir.join(format!("det-{tag}.json")),
                    manifest: None,
                };
                let (_, out) = cmd_eval_report(&args, Some(42), &CliConfig::default()).unwrap();
                out.manifest.unwrap().artifacts[0].sha256.clone()
            })
            .collect();
        same &= hashes[0] == hashes[1];
        digest = hashes[0][..12].to_owned();
    }
    r.check(same, "eval-determinism", format!("two runs per recipe (LR, FFNN) give hash-equal reports: {same} (last {digest}...)"));
}

fn service_contract(r: &mut Report) {
    let train = synth::yelp_style(300, 2);
    let recipe = ModelRecipe::new(ModelSpec::LogisticRegression, PipelineConfig { user_features: true, ..Default::default() });
    let (pipeline, model) = fit_recipe(train.reviews(), &recipe, 1, &RunOptions::default()).unwrap();
    let meta = BundleMeta { name: "lr".into(), kind: Some(model.kind()), trained_on: None, accuracy_report_ref: None, corpus_sha256: None };
    let bundle = ModelBundle { meta, model, pipeline };
    let thresholds = BadgeThresholds::default();

    let mut sums_ok = 0;
    for seed in 0..50u64 {
        let n = 1 + (seed as usize * 37) % 120;
        let business = synth::yelp_style(n.max(2), 1000 + seed).into_reviews();
        let a = analyze_business("b", &business, &bundle, &thresholds, ExecMode::Parallel).unwrap();
        if a.buckets.iter().sum::<usize>() == business.len() && a.n_reviews == business.len() {
            sums_ok += 1;
        }
    }

    let day = NaiveDate::from_ymd_opt(2022, 6, 1);
    let mk = |id: String, who: &str, date, text: String| {
        let mut rv = Review::new(id, text);
        rv.reviewer_id = Some(who.into());
        rv.date = date;
        rv.rating = Some(4);
        rv
    };
    let mut fixture = Vec::new();
    for i in 0..2 {
        fixture.push(mk(format!("two{i}"), "two-a-day", day, "fine".into()));
    }
    for i in 0..3 {
        fixture.push(mk(format!("three{i}"), "three-a-day", day, "fine".into()));
    }
    fixture.push(mk("l1000".into(), "len-1000", day, "x".repeat(1000)));
    fixture.push(mk("l1001".into(), "len-1001", day, "y".repeat(1001)));
    let a = analyze_business("fixture", &fixture, &bundle, &thresholds, ExecMode::Sequential).unwrap();
    let mut fired: Vec<(String, BadgeKind)> = a.badges.iter().map(|b| (b.reviewer_id.clone(), b.kind)).collect();
    fired.sort();
    let expected = vec![("len-1001".to_owned(), BadgeKind::LongAvgReview), ("three-a-day".to_owned(), BadgeKind::HighDailyVolume)];
    let badges_ok = fired == expected;
    r.check(
        sums_ok == 50 && badges_ok,
        "service-buckets-and-badges",
        format!("bucket sums equal review counts in {sums_ok}/50 analyses; boundary badges {fired:?}"),
    );
}

fn main() {
    let dir = TempDir::new().unwrap();
    let mut r = Report { failed: 0 };
    println!("acceptance criteria");
    hotel_corpus(&mut r, dir.path());
    synthetic_user_features(&mut r, dir.path());
    r.line(Status::NotApplicable, "transformer-baseline", "out of scope; no criterion");
    gradient_suite(&mut r);
    protocol_properties(&mut r);
    tfidf_oracle(&mut r);
    eval_determinism(&mut r, dir.path());
    service_contract(&mut r);
    if r.failed > 0 {
        println!("{} criterion/criteria failed", r.failed);
        std::process::exit(1);
    }
}
