//! Synthetic labelled corpora for tests, benchmarks and demos.
//!
//! Two generators: a hotel-review corpus shaped like the OpSpam layout
//! (balanced, text only, a few thousand distinct terms) and a Yelp-style
//! corpus with reviewer ids, ratings and dates where deceptive reviewers post
//! in same-day bursts and write shorter reviews.

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Label, Review, Source};

const COMMON: &[&str] = &[
    "the", "and", "was", "we", "a", "to", "of", "in", "hotel", "room", "it", "for", "stay", "staff", "very", "is",
    "with", "our", "on", "at", "were", "this", "had", "that", "service", "bed", "breakfast", "night", "they", "good",
    "but", "there", "would", "desk", "check", "clean", "place", "food", "time", "nice", "great", "friendly", "also",
    "again", "just", "really", "back", "one", "some", "from", "after", "before", "day", "lobby", "view", "area",
];

const DECEPTIVE_CUES: &[&str] = &[
    "amazing", "luxury", "husband", "vacation", "experience", "perfect", "definitely", "recommend", "family",
    "wonderful", "chicago", "business", "trip", "excellent", "elegant", "relaxing",
];

const GENUINE_CUES: &[&str] = &[
    "location", "floor", "bathroom", "street", "small", "price", "walk", "minutes", "parking", "elevator",
    "shower", "noise", "window", "rate", "block", "towels",
];

fn filler_word(rng: &mut ChaCha8Rng, tail: usize) -> String {
    // Zipf-like tail: low indices much more frequent
    let r: f64 = rng.gen();
    let i = ((tail as f64).powf(r) - 1.0) as usize;
    format!("w{i}")
}

fn sentence_text(words: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut start = true;
    for (i, w) in words.iter().enumerate() {
        if start {
            let mut c = w.chars();
            if let Some(f) = c.next() {
                out.extend(f.to_uppercase());
                out.push_str(c.as_str());
            }
            start = false;
        } else {
            out.push_str(w);
        }
        let last = i + 1 == words.len();
        if last || rng.gen_bool(0.08) {
            out.push('.');
            start = true;
        }
        if !last {
            out.push(' ');
        }
    }
    out
}

fn review_words(rng: &mut ChaCha8Rng, len: usize, cues: &[&str], cue_rate: f64, tail: usize) -> Vec<String> {
    (0..len)
        .map(|_| {
            let r: f64 = rng.gen();
            if r < cue_rate {
                cues.choose(rng).expect("cues").to_string()
            } else if r < 0.75 {
                COMMON.choose(rng).expect("common").to_string()
            } else {
                filler_word(rng, tail)
            }
        })
        .collect()
}

/// Balanced hotel-review corpus of `2 * per_class` reviews without reviewer
/// metadata. Class signal lives in cue-word rates, tuned so linear models
/// land in the mid-80s accuracy range.
pub fn opspam_style(per_class: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reviews = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let deceptive = i % 2 == 0;
        let len = rng.gen_range(60..260);
        let (cues, other) = if deceptive { (DECEPTIVE_CUES, GENUINE_CUES) } else { (GENUINE_CUES, DECEPTIVE_CUES) };
        let mut words = review_words(&mut rng, len, cues, 0.033, 6000);
        for w in words.iter_mut() {
            if rng.gen_bool(0.012) {
                *w = other.choose(&mut rng).expect("cues").to_string();
            }
        }
        let text = sentence_text(&words, &mut rng);
        let label = if deceptive { Label::Deceptive } else { Label::Genuine };
        let mut r = Review::new(format!("h{i:05}"), text).with_label(label);
        r.source = Source::OpSpam;
        reviews.push(r);
    }
    Corpus::new(reviews).expect("generated reviews are valid")
}

/// Balanced Yelp-style corpus of `n` reviews (rounded down to even).
///
/// Deceptive reviewers post three to six reviews on a single day, write
/// short texts and give extreme ratings; genuine reviewers post at most two a
/// day, write longer texts and spread their ratings. Texts carry only a weak
/// class signal.
pub fn yelp_style(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_class = n / 2;
    let start = NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date");
    let mut reviews = Vec::with_capacity(2 * per_class);
    for deceptive in [true, false] {
        let mut made = 0;
        let mut reviewer = 0;
        while made < per_class {
            let id = format!("{}{reviewer:04}", if deceptive { "d" } else { "g" });
            reviewer += 1;
            let count = if deceptive { rng.gen_range(3..=6) } else { rng.gen_range(1..=6) };
            let mut day = rng.gen_range(0..700u64);
            for k in 0..count.min(per_class - made) {
                if !deceptive && k > 0 && k % 2 == 0 {
                    day += rng.gen_range(1..40u64);
                }
                let (len, rating) = if deceptive {
                    (rng.gen_range(15..70), if rng.gen_bool(0.8) { 5 } else { 1 })
                } else {
                    (rng.gen_range(40..220), rng.gen_range(1..=5))
                };
                let cues = if deceptive { DECEPTIVE_CUES } else { GENUINE_CUES };
                let words = review_words(&mut rng, len, cues, 0.004, 3000);
                let label = if deceptive { Label::Deceptive } else { Label::Genuine };
                let mut r = Review::new(format!("y{}{made:05}", if deceptive { "d" } else { "g" }), sentence_text(&words, &mut rng))
                    .with_label(label);
                r.reviewer_id = Some(id.clone());
                r.rating = Some(rating);
                r.date = start.checked_add_days(Days::new(day));
                r.source = Source::YelpStyle;
                reviews.push(r);
                made += 1;
            }
        }
    }
    reviews.shuffle(&mut rng);
    Corpus::new(reviews).expect("generated reviews are valid")
}
