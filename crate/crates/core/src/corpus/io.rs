use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{Corpus, CorpusError, Label, Result, Review, Source};
use crate::exec::{self, ExecMode};

const POLARITY_DIRS: &[&str] = &["negative_polarity", "positive_polarity"];

/// Files that could not be turned into reviews during a directory parse.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseSummary {
    pub parsed: usize,
    pub skipped: Vec<(PathBuf, String)>,
}

/// Parse the published hotel deception corpus layout:
/// `{negative,positive}_polarity/<class dir>/fold<N>/*.txt`.
///
/// The class directory decides the label (`deceptive*` vs `truthful*`).
/// Files that are not valid UTF-8, or are blank, are listed in the summary and
/// otherwise ignored.
pub fn parse_opspam_dir(root: &Path, mode: ExecMode) -> Result<(Corpus, ParseSummary)> {
    if !root.is_dir() {
        return Err(CorpusError::NotFound(root.to_path_buf()));
    }
    let mut files = Vec::new();
    let mut polarity_seen = false;
    for polarity in POLARITY_DIRS {
        let dir = root.join(polarity);
        if !dir.is_dir() {
            continue;
        }
        polarity_seen = true;
        let before = files.len();
        for entry in WalkDir::new(&dir).min_depth(3).max_depth(3) {
            let entry = entry.map_err(|e| CorpusError::Io(e.into()))?;
            let path = entry.path();
            if entry.file_type().is_file() && path.extension().is_some_and(|e| e == "txt") {
                if let Some(label) = class_of(root, path) {
                    files.push((path.to_path_buf(), label));
                }
            }
        }
        if files.len() == before {
            return Err(CorpusError::EmptyCorpus(dir));
        }
    }
    if !polarity_seen {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    files.sort();

    let loaded = exec::map(mode, &files, |(path, label)| {
        let bytes = fs::read(path).map_err(|e| e.to_string())?;
        let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
        if text.trim().is_empty() {
            return Err("empty file".to_owned());
        }
        let id = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
        Ok(Review {
            id,
            text: text.trim().to_owned(),
            rating: None,
            date: None,
            reviewer_id: None,
            label: *label,
            source: Source::OpSpam,
        })
    });

    let mut summary = ParseSummary::default();
    let mut reviews = Vec::with_capacity(loaded.len());
    for ((path, _), res) in files.iter().zip(loaded) {
        match res {
            Ok(r) => reviews.push(r),
            Err(msg) => {
                log::warn!("skipping {}: {msg}", path.display());
                summary.skipped.push((path.clone(), msg));
            }
        }
    }
    summary.parsed = reviews.len();
    Ok((Corpus::new(reviews)?, summary))
}

fn class_of(root: &Path, path: &Path) -> Option<Label> {
    let rel = path.strip_prefix(root).ok()?;
    let class_dir = rel.components().nth(1)?.as_os_str().to_str()?;
    if class_dir.starts_with("deceptive") {
        Some(Label::Deceptive)
    } else if class_dir.starts_with("truthful") {
        Some(Label::Genuine)
    } else {
        None
    }
}

/// One line of the newline-delimited review record format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rating: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reviewer_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl Record {
    fn into_review(self, line: usize) -> Result<Review> {
        let malformed = |message: String| CorpusError::Malformed { line, message };
        let rating = match self.rating {
            None => None,
            Some(r @ 1..=5) => Some(r as u8),
            Some(r) => return Err(malformed(format!("rating {r} outside 1..=5"))),
        };
        let date = match self.date {
            None => None,
            Some(d) => Some(
                NaiveDate::parse_from_str(&d, "%Y-%m-%d")
                    .map_err(|e| malformed(format!("date `{d}`: {e}")))?,
            ),
        };
        let label = match self.label.as_deref() {
            None => Label::Unknown,
            Some("deceptive") => Label::Deceptive,
            Some("genuine") => Label::Genuine,
            Some(other) => return Err(malformed(format!("unknown label `{other}`"))),
        };
        if self.text.trim().is_empty() {
            return Err(malformed("empty text".into()));
        }
        Ok(Review {
            id: self.id,
            text: self.text,
            rating,
            date,
            reviewer_id: self.reviewer_id,
            label,
            source: Source::YelpStyle,
        })
    }

    fn from_review(r: &Review) -> Self {
        Record {
            id: r.id.clone(),
            text: r.text.clone(),
            rating: r.rating.map(i64::from),
            date: r.date.map(|d| d.format("%Y-%m-%d").to_string()),
            reviewer_id: r.reviewer_id.clone(),
            label: match r.label {
                Label::Unknown => None,
                l => Some(l.to_string()),
            },
        }
    }
}

/// Read review records from any buffered reader. Blank lines are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut reviews = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        reviews.push(record.into_review(line_no)?);
    }
    Corpus::new(reviews)
}

pub fn parse_reviews_records(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::NotFound(path.to_path_buf()),
        _ => CorpusError::Io(e),
    })?;
    read_records(BufReader::new(file))
}

/// Serialize a corpus in the record format, one object per line.
pub fn write_records<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for r in corpus.reviews() {
        let line = serde_json::to_string(&Record::from_review(r)).map_err(std::io::Error::other)?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
