use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Review;

pub const REVIEWER_FEATURE_NAMES: [&str; 5] = [
    "max_reviews_one_day",
    "avg_review_length_chars",
    "rating_stddev",
    "pct_positive",
    "pct_negative",
];

/// Behavioural statistics of one reviewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerProfile {
    pub reviewer_id: String,
    pub n_reviews: usize,
    pub max_reviews_one_day: usize,
    pub avg_review_length_chars: f64,
    pub rating_stddev: f64,
    pub pct_positive: f64,
    pub pct_negative: f64,
}

impl ReviewerProfile {
    /// Profile of a reviewer from their reviews.
    ///
    /// Undated reviews do not count toward the daily maximum, which is never
    /// below one. Rating statistics use only rated reviews: population
    /// standard deviation (0 below two ratings), positive means 4 or 5 stars,
    /// negative means 1 or 2.
    pub fn from_reviews<'a>(reviewer_id: &str, reviews: impl IntoIterator<Item = &'a Review>) -> Self {
        let mut n = 0usize;
        let mut chars = 0usize;
        let mut per_day: HashMap<chrono::NaiveDate, usize> = HashMap::new();
        let mut ratings = Vec::new();
        for r in reviews {
            n += 1;
            chars += r.text.chars().count();
            if let Some(d) = r.date {
                *per_day.entry(d).or_insert(0) += 1;
            }
            if let Some(s) = r.rating {
                ratings.push(f64::from(s));
            }
        }
        let (stddev, pos, neg) = if ratings.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let m = ratings.len() as f64;
            let mean = ratings.iter().sum::<f64>() / m;
            let var = ratings.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m;
            let stddev = if ratings.len() < 2 { 0.0 } else { var.sqrt() };
            let pos = ratings.iter().filter(|&&r| r >= 4.0).count() as f64 / m;
            let neg = ratings.iter().filter(|&&r| r <= 2.0).count() as f64 / m;
            (stddev, pos, neg)
        };
        ReviewerProfile {
            reviewer_id: reviewer_id.to_owned(),
            n_reviews: n,
            max_reviews_one_day: per_day.values().copied().max().unwrap_or(1).max(1),
            avg_review_length_chars: if n == 0 { 0.0 } else { chars as f64 / n as f64 },
            rating_stddev: stddev,
            pct_positive: pos,
            pct_negative: neg,
        }
    }

    /// `[max_reviews_one_day, avg_review_length_chars, rating_stddev, pct_positive, pct_negative]`
    pub fn feature_vector(&self) -> [f64; 5] {
        [
            self.max_reviews_one_day as f64,
            self.avg_review_length_chars,
            self.rating_stddev,
            self.pct_positive,
            self.pct_negative,
        ]
    }
}

/// Group reviews by reviewer id and profile each reviewer. Reviews without a
/// reviewer id are ignored.
pub fn build_reviewer_profiles<'a>(reviews: impl IntoIterator<Item = &'a Review>) -> BTreeMap<String, ReviewerProfile> {
    let mut grouped: BTreeMap<&str, Vec<&Review>> = BTreeMap::new();
    for r in reviews {
        if let Some(id) = r.reviewer_id.as_deref() {
            grouped.entry(id).or_default().push(r);
        }
    }
    grouped
        .into_iter()
        .map(|(id, rs)| (id.to_owned(), ReviewerProfile::from_reviews(id, rs)))
        .collect()
}
