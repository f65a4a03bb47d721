use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::{FeatureError, Result};

pub const UNKNOWN_TAG: &str = "UNK";

/// Term to part-of-speech tag lookup table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagLexicon {
    tags: HashMap<String, String>,
}

impl TagLexicon {
    pub fn from_pairs<I, S, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        TagLexicon { tags: pairs.into_iter().map(|(s, t)| (s.into(), t.into())).collect() }
    }

    /// Parse `term<TAB>TAG` lines. Blank lines are skipped.
    pub fn parse(src: &str) -> Result<Self> {
        let mut tags = HashMap::new();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (term, tag) = line
                .split_once('\t')
                .filter(|(t, g)| !t.is_empty() && !g.trim().is_empty())
                .ok_or_else(|| FeatureError::Malformed { line: i + 1, message: "expected `term<TAB>TAG`".into() })?;
            tags.insert(term.to_lowercase(), tag.trim().to_owned());
        }
        Ok(TagLexicon { tags })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn tag(&self, term: &str) -> &str {
        self.tags.get(term).map_or(UNKNOWN_TAG, String::as_str)
    }
}

/// Fraction of tokens carrying each tag; unknown tokens count as `UNK`.
pub fn pos_percentages<S: AsRef<str>>(tokens: &[S], lexicon: &TagLexicon) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(lexicon.tag(t.as_ref()).to_owned()).or_insert(0.0) += 1.0;
    }
    let n = tokens.len() as f64;
    counts.values_mut().for_each(|c| *c /= n);
    counts
}

/// Disjoint positive and negative word lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

impl SentimentLexicon {
    pub fn new(positive: HashSet<String>, negative: HashSet<String>) -> Result<Self> {
        let mut overlap: Vec<String> = positive.intersection(&negative).cloned().collect();
        if !overlap.is_empty() {
            overlap.sort();
            return Err(FeatureError::LexiconConflict(overlap));
        }
        Ok(SentimentLexicon { positive, negative })
    }

    /// Load one-term-per-line positive and negative lists.
    pub fn load(positive: &Path, negative: &Path) -> Result<Self> {
        let read = |p: &Path| -> Result<HashSet<String>> {
            Ok(fs::read_to_string(p)?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with(';'))
                .collect())
        };
        Self::new(read(positive)?, read(negative)?)
    }

    pub fn percentages<S: AsRef<str>>(&self, tokens: &[S]) -> (f64, f64) {
        if tokens.is_empty() {
            return (0.0, 0.0);
        }
        let n = tokens.len() as f64;
        let pos = tokens.iter().filter(|t| self.positive.contains(t.as_ref())).count() as f64;
        let neg = tokens.iter().filter(|t| self.negative.contains(t.as_ref())).count() as f64;
        (pos / n, neg / n)
    }
}

/// Fractions of tokens found in the positive and negative lists.
pub fn sentiment_percentages<S: AsRef<str>>(
    tokens: &[S],
    positive: &HashSet<String>,
    negative: &HashSet<String>,
) -> Result<(f64, f64)> {
    Ok(SentimentLexicon::new(positive.clone(), negative.clone())?.percentages(tokens))
}
