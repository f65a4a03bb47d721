//! Review scoring and business-level analysis: confidence buckets, reviewer
//! badges and monthly time series.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use spamlens_core::artifact::ModelBundle;
use spamlens_core::corpus::{Label, Review};
use spamlens_core::features::{build_reviewer_profiles, ReviewerProfile};
use spamlens_core::models::{Contribution, ModelError, TrainedModel};
use spamlens_core::ExecMode;
use thiserror::Error;

pub const N_BUCKETS: usize = 10;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Badge thresholds; a badge fires when its statistic is strictly greater.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BadgeThresholds {
    pub max_reviews_one_day: f64,
    pub avg_review_length_chars: f64,
    pub rating_stddev: f64,
}

impl Default for BadgeThresholds {
    fn default() -> Self {
        BadgeThresholds { max_reviews_one_day: 2.0, avg_review_length_chars: 1000.0, rating_stddev: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadgeKind {
    HighDailyVolume,
    LongAvgReview,
    HighRatingDeviation,
}

impl BadgeKind {
    /// Which class the badge points towards.
    pub fn indicates(self) -> Label {
        match self {
            BadgeKind::HighDailyVolume => Label::Deceptive,
            BadgeKind::LongAvgReview | BadgeKind::HighRatingDeviation => Label::Genuine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Badge {
    pub reviewer_id: String,
    pub kind: BadgeKind,
    pub indicates: Label,
    pub value: f64,
}

pub fn assign_badges<'a>(profiles: impl IntoIterator<Item = &'a ReviewerProfile>, t: &BadgeThresholds) -> Vec<Badge> {
    let mut out = Vec::new();
    for p in profiles {
        let checks = [
            (BadgeKind::HighDailyVolume, p.max_reviews_one_day as f64, t.max_reviews_one_day),
            (BadgeKind::LongAvgReview, p.avg_review_length_chars, t.avg_review_length_chars),
            (BadgeKind::HighRatingDeviation, p.rating_stddev, t.rating_stddev),
        ];
        for (kind, value, threshold) in checks {
            if value > threshold {
                out.push(Badge { reviewer_id: p.reviewer_id.clone(), kind, indicates: kind.indicates(), value });
            }
        }
    }
    out
}

/// Bucket `i` covers `[i/10, (i+1)/10)`; the last bucket also takes 1.0.
pub fn bucket_index(p: f64) -> usize {
    ((p * N_BUCKETS as f64).floor().max(0.0) as usize).min(N_BUCKETS - 1)
}

pub fn bucket_counts(ps: impl IntoIterator<Item = f64>) -> [usize; N_BUCKETS] {
    let mut b = [0; N_BUCKETS];
    for p in ps {
        b[bucket_index(p)] += 1;
    }
    b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub period_start: NaiveDate,
    pub review_count: usize,
    /// `None` when no review in the month carries a rating.
    pub mean_rating: Option<f64>,
}

/// Calendar-month review counts and mean ratings over dated reviews.
pub fn monthly_timeseries(reviews: &[Review]) -> Vec<Period> {
    let mut months: BTreeMap<NaiveDate, (usize, u32, usize)> = BTreeMap::new();
    for r in reviews {
        let Some(d) = r.date else { continue };
        let start = d.with_day(1).expect("day 1 exists");
        let e = months.entry(start).or_default();
        e.0 += 1;
        if let Some(rating) = r.rating {
            e.1 += u32::from(rating);
            e.2 += 1;
        }
    }
    months
        .into_iter()
        .map(|(period_start, (n, sum, rated))| Period {
            period_start,
            review_count: n,
            mean_rating: (rated > 0).then(|| f64::from(sum) / rated as f64),
        })
        .collect()
}

/// Raw reviewer statistics supplied with a scoring request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewerStats {
    pub max_reviews_one_day: f64,
    pub avg_review_length_chars: f64,
    pub rating_stddev: f64,
    pub pct_positive: f64,
    pub pct_negative: f64,
}

impl ReviewerStats {
    pub fn to_array(self) -> [f64; 5] {
        [self.max_reviews_one_day, self.avg_review_length_chars, self.rating_stddev, self.pct_positive, self.pct_negative]
    }
}

impl From<&ReviewerProfile> for ReviewerStats {
    fn from(p: &ReviewerProfile) -> Self {
        let [a, b, c, d, e] = p.feature_vector();
        ReviewerStats { max_reviews_one_day: a, avg_review_length_chars: b, rating_stddev: c, pct_positive: d, pct_negative: e }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub p_deceptive: f64,
    pub label: Label,
    /// Ranked term contributions; empty for neural models.
    pub contributions: Vec<Contribution>,
    /// Linear models only: bias and pre-sigmoid margin, which equals the
    /// contributions' sum plus the bias.
    pub bias: Option<f64>,
    pub margin: Option<f64>,
    pub model: String,
    pub reviewer_features_defaulted: bool,
}

pub fn score_review(bundle: &ModelBundle, text: &str, reviewer: Option<&ReviewerStats>) -> Result<ScoreOutcome, AnalysisError> {
    if text.trim().is_empty() {
        return Err(AnalysisError::Invalid("text: must not be empty".into()));
    }
    if let Some(s) = reviewer {
        if s.to_array().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AnalysisError::Invalid("reviewer: statistics must be finite and non-negative".into()));
        }
    }
    let (x, defaulted) = bundle.pipeline.transform_text(text, reviewer.map(|s| s.to_array()));
    let prediction = bundle.model.predict(&x, bundle.pipeline.vocabulary())?;
    let (bias, margin) = match &bundle.model.body {
        TrainedModel::Linear(m) => {
            let joined = x.joined_sparse().ok_or_else(|| AnalysisError::Invalid("linear model without sparse input".into()))?;
            (Some(m.bias), Some(m.margin(&joined)))
        }
        _ => (None, None),
    };
    Ok(ScoreOutcome {
        p_deceptive: prediction.p_deceptive,
        label: prediction.label,
        contributions: prediction.contributions.unwrap_or_default(),
        bias,
        margin,
        model: bundle.meta.name.clone(),
        reviewer_features_defaulted: defaulted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredReview {
    pub id: String,
    pub reviewer_id: Option<String>,
    pub date: Option<NaiveDate>,
    pub rating: Option<u8>,
    pub p_deceptive: f64,
    pub label: Label,
    pub reviewer_features_defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusinessAnalysis {
    pub business_id: String,
    pub model: String,
    pub n_reviews: usize,
    pub buckets: [usize; N_BUCKETS],
    pub badges: Vec<Badge>,
    pub timeseries: Vec<Period>,
    pub undated_reviews: usize,
    pub reviews: Vec<ScoredReview>,
}

/// Score a business's reviews. Reviewer profiles come from these reviews
/// only.
pub fn analyze_business(
    business_id: &str,
    reviews: &[Review],
    bundle: &ModelBundle,
    thresholds: &BadgeThresholds,
    mode: ExecMode,
) -> Result<BusinessAnalysis, AnalysisError> {
    let profiles = build_reviewer_profiles(reviews);
    let xs = bundle.pipeline.transform(reviews, &profiles, mode);
    let ps = bundle.model.predict_batch(&xs, mode)?;
    let uses_user = bundle.pipeline.uses_user_features();
    let scored: Vec<ScoredReview> = reviews
        .iter()
        .zip(&ps)
        .map(|(r, &p)| ScoredReview {
            id: r.id.clone(),
            reviewer_id: r.reviewer_id.clone(),
            date: r.date,
            rating: r.rating,
            p_deceptive: p,
            label: Label::from_probability(p),
            reviewer_features_defaulted: uses_user && r.reviewer_id.as_ref().is_none_or(|id| !profiles.contains_key(id)),
        })
        .collect();
    Ok(BusinessAnalysis {
        business_id: business_id.to_owned(),
        model: bundle.meta.name.clone(),
        n_reviews: reviews.len(),
        buckets: bucket_counts(ps.iter().copied()),
        badges: assign_badges(profiles.values(), thresholds),
        timeseries: monthly_timeseries(reviews),
        undated_reviews: reviews.iter().filter(|r| r.date.is_none()).count(),
        reviews: scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(max_day: usize, avg_len: f64, sd: f64) -> ReviewerProfile {
        ReviewerProfile {
            reviewer_id: "u".into(),
            n_reviews: 3,
            max_reviews_one_day: max_day,
            avg_review_length_chars: avg_len,
            rating_stddev: sd,
            pct_positive: 0.0,
            pct_negative: 0.0,
        }
    }

    fn kinds(p: &ReviewerProfile) -> Vec<BadgeKind> {
        assign_badges([p], &BadgeThresholds::default()).into_iter().map(|b| b.kind).collect()
    }

    #[test]
    fn badge_boundaries() {
        assert_eq!(kinds(&profile(3, 10.0, 0.0)), vec![BadgeKind::HighDailyVolume]);
        assert!(kinds(&profile(2, 10.0, 0.0)).is_empty());
        assert_eq!(kinds(&profile(1, 1001.0, 0.0)), vec![BadgeKind::LongAvgReview]);
        assert!(kinds(&profile(1, 1000.0, 0.0)).is_empty());
        assert!(kinds(&profile(1, 10.0, 1.5)).is_empty());
        assert_eq!(kinds(&profile(1, 10.0, 1.51)), vec![BadgeKind::HighRatingDeviation]);
        let b = assign_badges([&profile(4, 1200.0, 2.0)], &BadgeThresholds::default());
        assert_eq!(b.len(), 3);
        assert_eq!(b[0].indicates, Label::Deceptive);
        assert_eq!(b[0].value, 4.0);
        assert_eq!(b[1].indicates, Label::Genuine);
        let custom = BadgeThresholds { rating_stddev: 2.5, ..Default::default() };
        assert!(assign_badges([&profile(1, 10.0, 2.0)], &custom).is_empty());
    }

    #[test]
    fn one_per_bucket() {
        let ps = (0..10).map(|i| 0.05 + 0.1 * i as f64);
        assert_eq!(bucket_counts(ps), [1; 10]);
        assert_eq!(bucket_index(1.0), 9);
        assert_eq!(bucket_index(0.0), 0);
        assert_eq!(bucket_index(0.1), 1);
        assert_eq!(bucket_index(0.9), 9);
        assert_eq!(bucket_index(0.8999999), 8);
    }

    #[test]
    fn three_month_series() {
        let d = |m, day| NaiveDate::from_ymd_opt(2019, m, day);
        let mk = |i: usize, date, rating| {
            let mut r = Review::new(format!("r{i}"), "x");
            r.date = date;
            r.rating = rating;
            r
        };
        let reviews = vec![
            mk(0, d(1, 5), Some(5)),
            mk(1, d(1, 30), Some(2)),
            mk(2, d(3, 1), Some(4)),
            mk(3, d(2, 14), Some(1)),
            mk(4, d(2, 28), Some(3)),
            mk(5, d(2, 1), None),
            mk(6, None, Some(5)),
        ];
        let ts = monthly_timeseries(&reviews);
        let got: Vec<(u32, usize, Option<f64>)> = ts.iter().map(|p| (p.period_start.month(), p.review_count, p.mean_rating)).collect();
        assert_eq!(got, vec![(1, 2, Some(3.5)), (2, 3, Some(2.0)), (3, 1, Some(4.0))]);
        assert!(ts.iter().all(|p| p.period_start.day() == 1));
    }
}
