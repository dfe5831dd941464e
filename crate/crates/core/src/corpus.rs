//! NaturalQuestions ingestion and question truncation.
//!
//! Input is the simplified NQ release: one JSON object per line carrying
//! `example_id`, `question_text`, the whitespace-joined `document_text` and
//! `annotations[*].long_answer.{start_token,end_token}`. An example whose
//! first annotation has no valid long-answer span is a negative control and
//! is dropped.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Highest truncation level (words removed) the pipeline knows about.
pub const MAX_LEVEL: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no usable examples in {path}")]
    ZeroUsableExamples { path: String },
    #[error("question is empty after normalization")]
    EmptyQuestion,
    #[error("cannot remove {k} words from a {word_count}-word question")]
    TooShort { word_count: usize, k: usize },
    #[error("truncation level {0} outside 0..={MAX_LEVEL}")]
    InvalidLevel(u8),
    #[error("limit must be at least 1")]
    InvalidLimit,
}

/// One question with its human-annotated long answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub reference_answer: String,
    pub word_count: usize,
}

impl QAExample {
    pub fn new(
        id: impl Into<String>,
        raw_question: &str,
        reference_answer: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let question = normalize_question(raw_question)?;
        let word_count = question.split(' ').count();
        Ok(Self {
            id: id.into(),
            question,
            reference_answer: reference_answer.into(),
            word_count,
        })
    }
}

/// A question with its final `level` words removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedQuestion {
    pub example_id: String,
    pub level: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedVariant {
    pub id: String,
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub source_path: String,
    pub requested_limit: usize,
    pub filter_before_limit: bool,
    pub scanned: usize,
    pub loaded: usize,
    pub dropped_negative_controls: usize,
    pub skipped_too_short: Vec<SkippedVariant>,
}

/// Record layout shared by the corpus and variant output files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub id: String,
    pub level: u8,
    pub text: String,
    pub reference_answer: String,
}

impl VariantRecord {
    pub fn from_example(example: &QAExample) -> Self {
        Self {
            id: example.id.clone(),
            level: 0,
            text: example.question.clone(),
            reference_answer: example.reference_answer.clone(),
        }
    }

    pub fn from_variant(variant: &TruncatedQuestion, example: &QAExample) -> Self {
        Self {
            id: variant.example_id.clone(),
            level: variant.level,
            text: variant.text.clone(),
            reference_answer: example.reference_answer.clone(),
        }
    }

    pub fn to_example(&self) -> Result<QAExample, CorpusError> {
        QAExample::new(self.id.clone(), &self.text, self.reference_answer.clone())
    }

    pub fn to_variant(&self) -> TruncatedQuestion {
        TruncatedQuestion {
            example_id: self.id.clone(),
            level: self.level,
            text: self.text.clone(),
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    example_id: serde_json::Value,
    question_text: String,
    document_text: String,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    long_answer: RawSpan,
}

#[derive(Deserialize)]
struct RawSpan {
    start_token: i64,
    end_token: i64,
}

fn is_html_token(token: &str) -> bool {
    token.len() >= 2 && token.starts_with('<') && token.ends_with('>')
}

/// Extracts the long-answer text of the first annotation, or `None` for a
/// negative control.
fn reference_from(record: &RawRecord) -> Option<String> {
    let span = &record.annotations.first()?.long_answer;
    if span.start_token < 0 || span.end_token <= span.start_token {
        return None;
    }
    let tokens: Vec<&str> = record.document_text.split_whitespace().collect();
    let (start, end) = (span.start_token as usize, span.end_token as usize);
    if end > tokens.len() {
        return None;
    }
    let text = tokens[start..end]
        .iter()
        .filter(|t| !is_html_token(t))
        .copied()
        .collect::<Vec<_>>()
        .join(" ");
    (!text.is_empty()).then_some(text)
}

fn id_string(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Loads at most `limit` examples in file order.
///
/// With `filter_before_limit = false` the first `limit` records are taken and
/// negative controls among them are dropped, so fewer than `limit` examples
/// may come back. With `true`, scanning continues until `limit` usable
/// examples are found.
pub fn load_corpus(
    path: &Path,
    limit: usize,
    filter_before_limit: bool,
) -> Result<(Vec<QAExample>, CorpusManifest), CorpusError> {
    if limit == 0 {
        return Err(CorpusError::InvalidLimit);
    }
    let file = File::open(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut examples = Vec::new();
    let mut scanned = 0;
    let mut dropped = 0;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let done = if filter_before_limit {
            examples.len() >= limit
        } else {
            scanned >= limit
        };
        if done {
            break;
        }
        scanned += 1;
        let record: RawRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let Some(reference) = reference_from(&record) else {
            dropped += 1;
            continue;
        };
        let example = QAExample::new(
            id_string(&record.example_id),
            &record.question_text,
            reference,
        )
        .map_err(|e| CorpusError::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        examples.push(example);
    }
    if examples.is_empty() {
        return Err(CorpusError::ZeroUsableExamples {
            path: path.display().to_string(),
        });
    }
    let manifest = CorpusManifest {
        source_path: path.display().to_string(),
        requested_limit: limit,
        filter_before_limit,
        scanned,
        loaded: examples.len(),
        dropped_negative_controls: dropped,
        skipped_too_short: Vec::new(),
    };
    Ok((examples, manifest))
}

/// Collapses whitespace, trims, and strips trailing `?`, `.` and `!`.
pub fn normalize_question(raw: &str) -> Result<String, CorpusError> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let stripped = collapsed.trim_end_matches(['?', '.', '!']).trim_end();
    if stripped.is_empty() {
        return Err(CorpusError::EmptyQuestion);
    }
    Ok(stripped.to_string())
}

/// Removes the final `k` whitespace-delimited words. At least one word must
/// survive.
pub fn truncate_words(question: &str, k: usize) -> Result<String, CorpusError> {
    if k == 0 {
        return Ok(question.to_string());
    }
    let words: Vec<&str> = question.split_whitespace().collect();
    if words.len() <= k {
        return Err(CorpusError::TooShort {
            word_count: words.len(),
            k,
        });
    }
    Ok(words[..words.len() - k].join(" "))
}

/// One variant per (example, level), in example order then ascending level.
/// Levels that would leave no words are returned as skips.
pub fn build_variants(
    examples: &[QAExample],
    levels: &BTreeSet<u8>,
) -> Result<(Vec<TruncatedQuestion>, Vec<SkippedVariant>), CorpusError> {
    if let Some(&bad) = levels.iter().find(|&&l| l > MAX_LEVEL) {
        return Err(CorpusError::InvalidLevel(bad));
    }
    let mut variants = Vec::with_capacity(examples.len() * levels.len());
    let mut skipped = Vec::new();
    for example in examples {
        for &level in levels {
            match truncate_words(&example.question, level as usize) {
                Ok(text) => variants.push(TruncatedQuestion {
                    example_id: example.id.clone(),
                    level,
                    text,
                }),
                Err(CorpusError::TooShort { .. }) => {
                    log::info!("skipping {} at level {level}: too short", example.id);
                    skipped.push(SkippedVariant {
                        id: example.id.clone(),
                        level,
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((variants, skipped))
}

pub fn parse_levels(spec: &str) -> Result<BTreeSet<u8>, String> {
    let mut levels = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let level: u8 = part
            .parse()
            .map_err(|_| format!("invalid truncation level '{part}'"))?;
        if level > MAX_LEVEL {
            return Err(format!("truncation level {level} outside 0..={MAX_LEVEL}"));
        }
        levels.insert(level);
    }
    if levels.is_empty() {
        return Err("no truncation levels given".into());
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn nq_line(id: u64, question: &str, doc: &str, span: (i64, i64)) -> String {
        serde_json::json!({
            "example_id": id,
            "question_text": question,
            "document_text": doc,
            "annotations": [{"long_answer": {"start_token": span.0, "end_token": span.1, "candidate_index": 0}}],
        })
        .to_string()
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_question("who wrote hamlet?").unwrap(),
            "who wrote hamlet"
        );
        assert_eq!(
            normalize_question("  who   wrote hamlet  ").unwrap(),
            "who wrote hamlet"
        );
        assert!(matches!(
            normalize_question("???"),
            Err(CorpusError::EmptyQuestion)
        ));
        assert_eq!(normalize_question("Who Wrote It!").unwrap(), "Who Wrote It");
    }

    #[test]
    fn truncate_examples() {
        let q = "who sang the theme song";
        assert_eq!(truncate_words(q, 1).unwrap(), "who sang the theme");
        assert_eq!(truncate_words(q, 0).unwrap(), q);
        assert!(matches!(
            truncate_words("why", 1),
            Err(CorpusError::TooShort {
                word_count: 1,
                k: 1
            })
        ));
    }

    #[test]
    fn variants_counts() {
        let all: BTreeSet<u8> = (0..=3).collect();
        let five = QAExample::new("a", "one two three four five", "ref").unwrap();
        let (v, s) = build_variants(std::slice::from_ref(&five), &all).unwrap();
        assert_eq!(v.len(), 4);
        assert!(s.is_empty());
        assert_eq!(
            v.iter().map(|t| t.level).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );

        let two = QAExample::new("b", "why not", "ref").unwrap();
        let (v, s) = build_variants(&[two], &all).unwrap();
        assert_eq!(v.iter().map(|t| t.level).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(
            s,
            vec![
                SkippedVariant {
                    id: "b".into(),
                    level: 2
                },
                SkippedVariant {
                    id: "b".into(),
                    level: 3
                }
            ]
        );

        let bad: BTreeSet<u8> = [4].into();
        assert!(matches!(
            build_variants(&[five], &bad),
            Err(CorpusError::InvalidLevel(4))
        ));
    }

    #[test]
    fn three_record_fixture_drops_negative_control() {
        let doc = "<P> Hamlet was written by William Shakespeare . </P>";
        let f = write_lines(&[
            nq_line(1, "who wrote hamlet", doc, (0, 8)),
            nq_line(2, "what is the best song", doc, (-1, -1)),
            nq_line(3, "who is the author of hamlet?", doc, (1, 7)),
        ]);
        let (examples, manifest) = load_corpus(f.path(), 10, false).unwrap();
        assert_eq!(examples.len(), 2);
        assert_eq!(manifest.dropped_negative_controls, 1);
        assert_eq!(manifest.scanned, 3);
        assert_eq!(
            examples[0].reference_answer,
            "Hamlet was written by William Shakespeare ."
        );
        assert_eq!(examples[1].question, "who is the author of hamlet");
        assert_eq!(examples[1].word_count, 6);
        assert_eq!(examples[0].id, "1");
    }

    #[test]
    fn limit_semantics() {
        let doc = "<P> a b c </P>";
        let f = write_lines(&[
            nq_line(1, "q one", doc, (-1, -1)),
            nq_line(2, "q two", doc, (0, 5)),
            nq_line(3, "q three", doc, (0, 5)),
        ]);
        let (after, m) = load_corpus(f.path(), 2, false).unwrap();
        assert_eq!(after.len(), 1);
        assert_eq!(m.scanned, 2);
        let (before, m) = load_corpus(f.path(), 2, true).unwrap();
        assert_eq!(before.len(), 2);
        assert_eq!(m.scanned, 3);
    }

    #[test]
    fn load_errors() {
        let empty = write_lines(&[]);
        assert!(matches!(
            load_corpus(empty.path(), 1000, false),
            Err(CorpusError::ZeroUsableExamples { .. })
        ));
        let bad = write_lines(&[nq_line(1, "q", "<P> x </P>", (0, 3)), "{not json".into()]);
        assert!(matches!(
            load_corpus(bad.path(), 10, false),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            load_corpus(Path::new("/nonexistent/nq.jsonl"), 10, false),
            Err(CorpusError::Unreadable { .. })
        ));
    }

    #[test]
    fn span_past_document_end_is_negative_control() {
        let f = write_lines(&[
            nq_line(1, "q one", "<P> a </P>", (0, 40)),
            nq_line(2, "q two", "<P> </P>", (0, 2)),
            nq_line(3, "q three", "<P> b </P>", (0, 3)),
        ]);
        let (ex, m) = load_corpus(f.path(), 10, false).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(m.dropped_negative_controls, 2);
    }

    #[test]
    fn levels_parse() {
        assert_eq!(parse_levels("0,1,2,3").unwrap(), (0..=3).collect());
        assert!(parse_levels("0,5").is_err());
        assert!(parse_levels("").is_err());
    }
}
