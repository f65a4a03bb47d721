use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::NaiveDate;
use http_body_util::BodyExt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use spamlens_core::artifact::{BundleMeta, ModelBundle};
use spamlens_core::corpus::Review;
use spamlens_core::eval::{fit_recipe, ModelRecipe, RunOptions};
use spamlens_core::features::{build_reviewer_profiles, PipelineConfig, Representation};
use spamlens_core::models::ModelSpec;
use spamlens_core::synth;
use spamlens_core::ExecMode;
use spamlens_service::analysis::{analyze_business, BadgeThresholds, ReviewerStats};
use spamlens_service::provider::LocalFileProvider;
use spamlens_service::{router, AppState, Registry, Snapshot};
use tempfile::TempDir;
use tower::ServiceExt;

struct Fixture {
    _dir: TempDir,
    models: std::path::PathBuf,
    businesses: std::path::PathBuf,
}

fn bundle(name: &str, spec: ModelSpec, features: PipelineConfig) -> ModelBundle {
    let corpus = synth::yelp_style(240, 3);
    let recipe = ModelRecipe::new(spec, features);
    let (pipeline, model) = fit_recipe(corpus.reviews(), &recipe, 7, &RunOptions::default()).unwrap();
    let meta = BundleMeta {
        name: name.into(),
        kind: Some(model.kind()),
        trained_on: Some("synthetic".into()),
        accuracy_report_ref: None,
        corpus_sha256: None,
    };
    ModelBundle { meta, model, pipeline }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let models = dir.path().join("models");
        let businesses = dir.path().join("businesses");
        std::fs::create_dir_all(&models).unwrap();
        std::fs::create_dir_all(&businesses).unwrap();
        bundle("lr", ModelSpec::LogisticRegression, PipelineConfig { user_features: true, ..Default::default() })
            .save(&models)
            .unwrap();
        bundle(
            "ffnn",
            ModelSpec::Ffnn { hidden: [8, 4], dropout: 0.0 },
            PipelineConfig { representation: Representation::Counts, ..Default::default() },
        )
        .save(&models)
        .unwrap();
        let mut file = std::fs::File::create(businesses.join("hotel-1.jsonl")).unwrap();
        let corpus = synth::yelp_style(30, 11);
        spamlens_core::corpus::write_records(&corpus, &mut file).unwrap();
        Fixture { _dir: dir, models, businesses }
    })
}

fn state_for(models: &Path, default: Option<&str>) -> AppState {
    let snap = Snapshot::load_dir(models, default.map(str::to_owned)).unwrap();
    AppState::new(
        Arc::new(Registry::new(snap)),
        Arc::new(LocalFileProvider::new(fixture().businesses.clone())),
        BadgeThresholds::default(),
    )
}

fn state() -> AppState {
    state_for(&fixture().models, Some("lr"))
}

async fn call(state: AppState, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
    let resp = router(state).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn post(uri: &str, body: Value) -> (StatusCode, Value) {
    call(state(), "POST", uri, Some(body.to_string())).await
}

fn review(id: &str, reviewer: &str, date: Option<NaiveDate>, rating: u8, text: &str) -> Value {
    json!({"id": id, "reviewer_id": reviewer, "date": date, "rating": rating, "text": text})
}

#[tokio::test]
async fn health_and_model_listing() {
    let (s, v) = call(state(), "GET", "/healthz", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["models"], 2);

    let (s, v) = call(state(), "GET", "/api/v1/models", None).await;
    assert_eq!(s, StatusCode::OK);
    let list = v.as_array().unwrap();
    let names: Vec<&str> = list.iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["ffnn", "lr"]);
    assert_eq!(list[1]["default"], true);
    assert_eq!(list[0]["default"], false);
    assert_eq!(list[1]["kind"], "logistic_regression");
    assert_eq!(list[0]["schema_id"].as_str().unwrap().len(), 64);
}

#[tokio::test]
async fn linear_score_explains_its_margin() {
    let (s, v) = post("/api/v1/score", json!({"text": "great great stay, amazing staff and a lovely room"})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let p = v["p_deceptive"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(v["label"], if p >= 0.5 { "deceptive" } else { "genuine" });
    assert_eq!(v["model"], "lr");
    assert_eq!(v["reviewer_features_defaulted"], true);
    let contributions = v["contributions"].as_array().unwrap();
    assert!(!contributions.is_empty());
    let sum: f64 = contributions.iter().map(|c| c["contribution"].as_f64().unwrap()).sum();
    let (bias, margin) = (v["bias"].as_f64().unwrap(), v["margin"].as_f64().unwrap());
    assert!((sum + bias - margin).abs() < 1e-9);
    let mags: Vec<f64> = contributions.iter().map(|c| c["contribution"].as_f64().unwrap().abs()).collect();
    assert!(mags.windows(2).all(|w| w[0] >= w[1]));
}

#[tokio::test]
async fn reviewer_stats_change_the_score() {
    let text = "the room was fine and the staff were helpful";
    let heavy = json!({"max_reviews_one_day": 6.0, "avg_review_length_chars": 80.0, "rating_stddev": 0.0,
                       "pct_positive": 1.0, "pct_negative": 0.0});
    let light = json!({"max_reviews_one_day": 1.0, "avg_review_length_chars": 900.0, "rating_stddev": 1.2,
                       "pct_positive": 0.5, "pct_negative": 0.3});
    let (_, a) = post("/api/v1/score", json!({"text": text, "reviewer": heavy})).await;
    let (_, b) = post("/api/v1/score", json!({"text": text, "reviewer": light})).await;
    assert_eq!(a["reviewer_features_defaulted"], false);
    assert!(a["p_deceptive"].as_f64().unwrap() > b["p_deceptive"].as_f64().unwrap());
    assert!(a["contributions"].as_array().unwrap().iter().any(|c| c["term"].as_str().unwrap().starts_with("reviewer:")));
}

#[tokio::test]
async fn neural_score_has_no_contributions() {
    let (s, v) = post("/api/v1/score", json!({"text": "nice place", "model": "ffnn"})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["contributions"], json!([]));
    assert!(v["bias"].is_null() && v["margin"].is_null());
    assert_eq!(v["reviewer_features_defaulted"], false);
}

#[tokio::test]
async fn request_errors_are_json() {
    let (s, v) = post("/api/v1/score", json!({"text": "   "})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_request");
    assert!(v["error"]["message"].as_str().unwrap().contains("text"));

    let (s, v) = post("/api/v1/score", json!({"text": "ok", "model": "bert"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "unknown_model");
    let msg = v["error"]["message"].as_str().unwrap();
    assert!(msg.contains("bert") && msg.contains("ffnn") && msg.contains("lr"), "{msg}");

    let (s, v) = call(state(), "POST", "/api/v1/score", Some("{not json".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_request");

    let (s, _) = post("/api/v1/score", json!({"text": "x", "unexpected": 1})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let stats = json!({"max_reviews_one_day": -1.0, "avg_review_length_chars": 1.0, "rating_stddev": 0.0,
                       "pct_positive": 0.0, "pct_negative": 0.0});
    let (s, _) = post("/api/v1/score", json!({"text": "x", "reviewer": stats})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn inline_business_analysis() {
    let d = |m, day| NaiveDate::from_ymd_opt(2021, m, day);
    let long = "a very detailed account of the stay ".repeat(30);
    let reviews = json!([
        review("a1", "burst", d(3, 2), 5, "best hotel ever amazing"),
        review("a2", "burst", d(3, 2), 5, "amazing amazing stay"),
        review("a3", "burst", d(3, 2), 5, "perfect perfect perfect"),
        review("b1", "writer", d(3, 20), 2, &long),
        review("b2", "writer", d(5, 1), 4, &long),
        json!({"id": "c1", "text": "no date here", "rating": 3}),
    ]);
    let (s, v) = post("/api/v1/business/analyze", json!({"business_id": "inline", "reviews": reviews})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["n_reviews"], 6);
    let buckets: Vec<u64> = v["buckets"].as_array().unwrap().iter().map(|b| b.as_u64().unwrap()).collect();
    assert_eq!(buckets.len(), 10);
    assert_eq!(buckets.iter().sum::<u64>(), 6);
    let badges: Vec<(String, String)> = v["badges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| (b["reviewer_id"].as_str().unwrap().to_owned(), b["kind"].as_str().unwrap().to_owned()))
        .collect();
    assert!(badges.contains(&("burst".into(), "high_daily_volume".into())));
    assert!(badges.contains(&("writer".into(), "long_avg_review".into())));
    assert!(!badges.iter().any(|(r, k)| r == "writer" && k == "high_daily_volume"));
    let ts = v["timeseries"].as_array().unwrap();
    let months: Vec<(&str, u64)> =
        ts.iter().map(|p| (p["period_start"].as_str().unwrap(), p["review_count"].as_u64().unwrap())).collect();
    assert_eq!(months, [("2021-03-01", 4), ("2021-05-01", 1)]);
    assert_eq!(v["undated_reviews"], 1);
    let c1 = v["reviews"].as_array().unwrap().iter().find(|r| r["id"] == "c1").unwrap();
    assert_eq!(c1["reviewer_features_defaulted"], true);
}

#[tokio::test]
async fn analysis_agrees_with_single_scoring() {
    let reviews = synth::yelp_style(40, 5).into_reviews();
    let profiles = build_reviewer_profiles(&reviews);
    let body: Vec<Value> = reviews
        .iter()
        .map(|r| json!({"id": r.id, "text": r.text, "rating": r.rating, "date": r.date, "reviewer_id": r.reviewer_id}))
        .collect();
    let (s, v) = post("/api/v1/business/analyze", json!({"business_id": "b", "reviews": body})).await;
    assert_eq!(s, StatusCode::OK);
    for (r, scored) in reviews.iter().zip(v["reviews"].as_array().unwrap()).take(8) {
        let stats = ReviewerStats::from(&profiles[r.reviewer_id.as_ref().unwrap()]);
        let (_, single) = post("/api/v1/score", json!({"text": r.text, "reviewer": stats})).await;
        let (a, b) = (single["p_deceptive"].as_f64().unwrap(), scored["p_deceptive"].as_f64().unwrap());
        assert!((a - b).abs() < 1e-12, "{} {a} vs {b}", r.id);
    }
}

#[tokio::test]
async fn provider_backed_analysis() {
    let (s, v) = post("/api/v1/business/analyze", json!({"business_id": "hotel-1"})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["n_reviews"], 30);
    assert_eq!(v["buckets"].as_array().unwrap().iter().map(|b| b.as_u64().unwrap()).sum::<u64>(), 30);

    let (s, v) = post("/api/v1/business/analyze", json!({"business_id": "nowhere"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "business_not_found");

    let (s, _) = post("/api/v1/business/analyze", json!({"business_id": "../etc/passwd"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn empty_business_and_bad_inline_reviews() {
    let (s, v) = post("/api/v1/business/analyze", json!({"business_id": "quiet", "reviews": []})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["n_reviews"], 0);
    assert_eq!(v["buckets"], json!([0usize; 10].to_vec()));
    assert_eq!(v["badges"], json!([]));
    assert_eq!(v["timeseries"], json!([]));

    let dup = json!([{"id": "x", "text": "a"}, {"id": "x", "text": "b"}]);
    let (s, _) = post("/api/v1/business/analyze", json!({"business_id": "b", "reviews": dup})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let bad = json!([{"id": "x", "text": "a", "rating": 9}]);
    let (s, _) = post("/api/v1/business/analyze", json!({"business_id": "b", "reviews": bad})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[test]
fn registry_swap_keeps_old_snapshot_alive() {
    let registry = Registry::new(Snapshot::load_dir(&fixture().models, None).unwrap());
    let held = registry.snapshot();
    assert_eq!(held.default_name(), Some("ffnn"));
    let old = registry.replace(Snapshot::default());
    assert!(Arc::ptr_eq(&old, &held));
    assert_eq!(held.names().len(), 2);
    assert!(registry.snapshot().names().is_empty());
    assert!(registry.snapshot().get(None).is_err());
    assert!(Snapshot::load_dir(&fixture().models, Some("missing".into())).is_err());
}

fn random_reviews(seed: u64, n: usize) -> Vec<Review> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let words = ["room", "great", "dirty", "staff", "amazing", "noise", "bed", "perfect", "rude", "view"];
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..30);
            let text: Vec<&str> = (0..len).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let mut r = Review::new(format!("r{i}"), text.join(" "));
            r.reviewer_id = rng.gen_bool(0.8).then(|| format!("u{}", rng.gen_range(0..6)));
            r.rating = rng.gen_bool(0.9).then(|| rng.gen_range(1..=5));
            r.date = rng.gen_bool(0.9).then(|| NaiveDate::from_ymd_opt(2020, rng.gen_range(1..=12), rng.gen_range(1..=28)).unwrap());
            r
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn buckets_partition_every_analysis(seed in any::<u64>(), n in 0usize..60) {
        let snap = Snapshot::load_dir(&fixture().models, Some("lr".into())).unwrap();
        let bundle = snap.get(None).unwrap();
        let reviews = random_reviews(seed, n);
        let a = analyze_business("p", &reviews, &bundle, &BadgeThresholds::default(), ExecMode::Sequential).unwrap();
        prop_assert_eq!(a.buckets.iter().sum::<usize>(), n);
        prop_assert_eq!(a.reviews.len(), n);
        let dated: usize = a.timeseries.iter().map(|p| p.review_count).sum();
        prop_assert_eq!(dated + a.undated_reviews, n);
        for r in &a.reviews {
            prop_assert!((0.0..=1.0).contains(&r.p_deceptive));
        }
    }
}
