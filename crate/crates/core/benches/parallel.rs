use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spamlens_core::corpus::Review;
use spamlens_core::eval::{fit_recipe, run_protocol, ModelRecipe, Protocol, RunOptions};
use spamlens_core::features::{build_reviewer_profiles, FittedPipeline, InputLayout, PipelineConfig, Representation};
use spamlens_core::models::ModelSpec;
use spamlens_core::{synth, ExecMode};

const MODES: [ExecMode; 2] = [ExecMode::Sequential, ExecMode::Parallel];

fn vectorize(c: &mut Criterion) {
    let corpus = synth::opspam_style(800, 1);
    let reviews = corpus.reviews();
    let pipe = FittedPipeline::fit(&PipelineConfig::default(), InputLayout::Sparse, reviews, None).unwrap();
    let profiles = build_reviewer_profiles(reviews);
    let mut group = c.benchmark_group("tfidf_transform_1600");
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| black_box(pipe.transform(reviews, &profiles, mode)))
        });
    }
    group.finish();
}

fn kfold(c: &mut Criterion) {
    let corpus = synth::opspam_style(400, 2);
    let recipe = ModelRecipe::new(ModelSpec::LogisticRegression, PipelineConfig::default());
    let mut group = c.benchmark_group("lr_5fold_800");
    group.sample_size(10);
    for mode in MODES {
        let opts = RunOptions { mode, embeddings: None };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &opts, |b, opts| {
            b.iter(|| black_box(run_protocol(&corpus, &recipe, &Protocol::kfold(5, 0), opts).unwrap()))
        });
    }
    group.finish();
}

fn predict(c: &mut Criterion) {
    let corpus = synth::opspam_style(400, 3);
    let train: Vec<Review> = corpus.reviews().to_vec();
    let mut recipe = ModelRecipe::new(
        ModelSpec::Ffnn { hidden: [32, 16], dropout: 0.25 },
        PipelineConfig { representation: Representation::Counts, ..Default::default() },
    );
    recipe.train.max_epochs = Some(2);
    let (pipe, model) = fit_recipe(&train, &recipe, 0, &RunOptions::default()).unwrap();
    let xs = pipe.transform(&train, &Default::default(), ExecMode::Parallel);
    let mut group = c.benchmark_group("ffnn_predict_800");
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| black_box(model.predict_batch(&xs, mode).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, vectorize, kfold, predict);
criterion_main!(benches);
