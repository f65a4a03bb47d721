use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{FeatureError, Result};
use crate::corpus::{tokenize, Corpus};

/// Term index with document frequencies and smoothed IDF weights.
///
/// Indices follow lexicographic term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    /// Derived from `doc_freq`; recomputed on load so saved files stay exact.
    #[serde(skip)]
    idf: Vec<f64>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// `ln((1 + n_docs) / (1 + df)) + 1`
pub fn smoothed_idf(n_docs: usize, doc_freq: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

impl Vocabulary {
    pub fn build(corpus: &Corpus, max_terms: Option<usize>) -> Result<Self> {
        let docs: Vec<Vec<String>> = corpus.reviews().iter().map(|r| tokenize(&r.text)).collect();
        Self::from_documents(&docs, max_terms)
    }

    /// Fit on pre-tokenized documents. With `max_terms`, only the most
    /// frequent terms by total count are kept, ties broken lexicographically.
    pub fn from_documents<S: AsRef<str>>(docs: &[Vec<S>], max_terms: Option<usize>) -> Result<Self> {
        let mut total: HashMap<&str, usize> = HashMap::new();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            let mut seen = HashSet::new();
            for t in doc {
                let t = t.as_ref();
                *total.entry(t).or_insert(0) += 1;
                if seen.insert(t) {
                    *df.entry(t).or_insert(0) += 1;
                }
            }
        }
        if total.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        let mut kept: Vec<&str> = total.keys().copied().collect();
        if let Some(limit) = max_terms {
            kept.sort_unstable_by(|a, b| total[b].cmp(&total[a]).then_with(|| a.cmp(b)));
            kept.truncate(limit);
        }
        kept.sort_unstable();
        let n_docs = docs.len();
        let doc_freq: Vec<usize> = kept.iter().map(|t| df[t]).collect();
        Ok(Vocabulary {
            idf: doc_freq.iter().map(|&d| smoothed_idf(n_docs, d)).collect(),
            terms: kept.into_iter().map(str::to_owned).collect(),
            doc_freq,
            n_docs,
            index: HashMap::new(),
        }
        .indexed())
    }

    fn indexed(mut self) -> Self {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        self
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(mut self) -> Self {
        self.idf = self.doc_freq.iter().map(|&df| smoothed_idf(self.n_docs, df)).collect();
        self.indexed()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i])
    }

    fn counts<S: AsRef<str>>(&self, tokens: &[S]) -> BTreeMap<usize, f64> {
        let mut counts = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.index_of(t.as_ref()) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        counts
    }
}

/// Sparse vector with strictly increasing indices below `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl TermVector {
    pub fn zeros(dim: usize) -> Self {
        TermVector { dim, entries: Vec::new() }
    }

    /// Entries must be sorted by index with no duplicates.
    pub fn from_sorted(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.last().is_none_or(|e| e.0 < dim));
        TermVector { dim, entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
        TermVector { dim: values.len(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            v[i] = w;
        }
        v
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TermVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, w)| (i, w * factor)).collect(),
        }
    }

    /// Append dense values after the last dimension. Zeros stay implicit.
    pub fn extended(&self, tail: &[f64]) -> Self {
        let mut entries = self.entries.clone();
        entries.extend(tail.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (self.dim + j, v)));
        TermVector { dim: self.dim + tail.len(), entries }
    }
}

/// Raw-count TF times smoothed IDF, L2-normalized. Out-of-vocabulary tokens
/// are ignored; a document with no known tokens maps to the zero vector.
pub fn tfidf_vector<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TermVector {
    let weighted: Vec<(usize, f64)> = vocab.counts(tokens).into_iter().map(|(i, tf)| (i, tf * vocab.idf[i])).collect();
    let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm == 0.0 {
        return TermVector::zeros(vocab.len());
    }
    TermVector::from_sorted(vocab.len(), weighted.into_iter().map(|(i, w)| (i, w / norm)).collect())
}

/// Raw term counts.
pub fn bow_counts<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TermVector {
    TermVector::from_sorted(vocab.len(), vocab.counts(tokens).into_iter().collect())
}
