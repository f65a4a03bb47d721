use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{FeatureError, Result};
use crate::tensor::Matrix;

/// Fixed-dimension word vectors loaded from a text file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, vectors: HashMap::new(), duplicates: 0 }
    }

    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(FeatureError::DimensionMismatch { line: None, expected: self.dim, found: vector.len() });
        }
        if self.vectors.insert(term.into(), vector).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    /// Parse the text embedding format: an optional `<count> <dim>` header,
    /// then `term v1 ... vD` per line. Later duplicates replace earlier ones.
    pub fn parse(src: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in src.lines().enumerate() {
            let line_no = i + 1;
            let mut fields = line.split_whitespace();
            let Some(term) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if line_no == 1 && rest.len() == 1 {
                if let (Ok(_), Ok(dim)) = (term.parse::<usize>(), rest[0].parse::<usize>()) {
                    table = Some(EmbeddingTable::new(dim));
                    continue;
                }
            }
            let values = rest
                .iter()
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| FeatureError::Malformed { line: line_no, message: format!("non-numeric value for `{term}`") })?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            if values.len() != t.dim {
                return Err(FeatureError::DimensionMismatch { line: Some(line_no), expected: t.dim, found: values.len() });
            }
            t.insert(term, values)?;
        }
        let table = table.unwrap_or_else(|| EmbeddingTable::new(0));
        if table.duplicates > 0 {
            log::warn!("{} duplicate embedding terms replaced", table.duplicates);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }
}

/// `max_len x dim` matrix of token vectors in order. Unknown tokens give zero
/// rows; short sequences are zero-padded at the end and long ones truncated.
pub fn embed_sequence<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable, max_len: usize) -> Matrix {
    let mut m = Matrix::zeros(max_len, table.dim());
    for (row, t) in tokens.iter().take(max_len).enumerate() {
        if let Some(v) = table.get(t.as_ref()) {
            m.row_mut(row).copy_from_slice(v);
        }
    }
    m
}
