//! Documents, paragraphs, social edges and external score files.

mod edges;
pub mod tokenize;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use edges::{filter_users, ExternalScores, SocialEdges};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Abortion,
    GunControl,
    Immigration,
    Custom,
}

impl FromStr for Topic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "abortion" => Ok(Topic::Abortion),
            "gun_control" | "guns" | "gun" => Ok(Topic::GunControl),
            "immigration" => Ok(Topic::Immigration),
            "custom" => Ok(Topic::Custom),
            other => Err(Error::Invalid(format!("unknown topic `{other}`"))),
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topic::Abortion => "abortion",
            Topic::GunControl => "gun_control",
            Topic::Immigration => "immigration",
            Topic::Custom => "custom",
        })
    }
}

/// Political leaning of a document, user or influencer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bias {
    #[serde(alias = "L", alias = "left")]
    Left,
    #[serde(alias = "R", alias = "right")]
    Right,
}

impl Bias {
    pub const BOTH: [Bias; 2] = [Bias::Left, Bias::Right];

    pub fn index(self) -> usize {
        match self {
            Bias::Left => 0,
            Bias::Right => 1,
        }
    }

    pub fn opposite(self) -> Bias {
        match self {
            Bias::Left => Bias::Right,
            Bias::Right => Bias::Left,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Bias::Left => "L",
            Bias::Right => "R",
        }
    }
}

impl FromStr for Bias {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L" | "l" | "Left" | "left" => Ok(Bias::Left),
            "R" | "r" | "Right" | "right" => Ok(Bias::Right),
            other => Err(Error::Invalid(format!("unknown bias `{other}`"))),
        }
    }
}

impl fmt::Display for Bias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bias::Left => "Left",
            Bias::Right => "Right",
        })
    }
}

/// One line of the document file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<Topic>,
    #[serde(default)]
    pub bias: Option<Bias>,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub date: Option<NaiveDate>,
    /// Policy frame label; only present in frame-labelled seed corpora.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Paragraph {
    pub doc_id: String,
    pub index: usize,
    pub sentences: Vec<Vec<String>>,
    pub tokens: Vec<String>,
}

impl Paragraph {
    pub fn from_text(doc_id: &str, index: usize, text: &str) -> Self {
        let sentences = tokenize::tokenize_sentences(text);
        let tokens = sentences.iter().flatten().cloned().collect();
        Paragraph {
            doc_id: doc_id.to_string(),
            index,
            sentences,
            tokens,
        }
    }
}

/// Immutable, indexed document collection.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    paragraphs: Vec<Vec<Paragraph>>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_documents(documents: Vec<Document>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for doc in documents {
            corpus.push(doc)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, doc: Document) -> Result<()> {
        if self.index.contains_key(&doc.id) {
            return Err(Error::DuplicateId(doc.id));
        }
        if doc.body.trim().is_empty() {
            return Err(Error::Invalid(format!("document `{}` has an empty body", doc.id)));
        }
        let paragraphs = tokenize::split_paragraphs(&doc.body)
            .into_iter()
            .enumerate()
            .map(|(i, text)| Paragraph::from_text(&doc.id, i, text))
            .collect();
        self.index.insert(doc.id.clone(), self.documents.len());
        self.documents.push(doc);
        self.paragraphs.push(paragraphs);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, i: usize) -> &Document {
        &self.documents[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.position(id).map(|i| &self.documents[i])
    }

    pub fn paragraphs(&self, doc: usize) -> &[Paragraph] {
        &self.paragraphs[doc]
    }

    pub fn all_paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.paragraphs.iter().flatten()
    }

    /// Flattened tokens of a whole document.
    pub fn tokens(&self, doc: usize) -> impl Iterator<Item = &String> {
        self.paragraphs[doc].iter().flat_map(|p| p.tokens.iter())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for doc in &self.documents {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a line-delimited JSON document file.
///
/// Lines whose `topic` disagrees with `topic` are skipped; lines without a
/// topic adopt it.
pub fn ingest_corpus(path: &Path, topic: Topic) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut corpus = Corpus::default();
    let mut skipped = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: n + 1,
            message,
        };
        let mut doc: Document = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        match doc.topic {
            Some(t) if t != topic => {
                skipped += 1;
                continue;
            }
            Some(_) => {}
            None => doc.topic = Some(topic),
        }
        corpus.push(doc).map_err(|e| match e {
            Error::DuplicateId(id) => parse_err(format!("duplicate document id `{id}`")),
            other => parse_err(other.to_string()),
        })?;
    }
    if skipped > 0 {
        warn!("{}: skipped {skipped} documents with a topic other than {topic}", path.display());
    }
    if corpus.is_empty() {
        warn!("{}: corpus is empty", path.display());
    }
    Ok(corpus)
}

/// Contiguous n-grams of one token sequence, joined by single spaces.
pub(crate) fn sequence_ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = String> + '_ {
    tokens.windows(n.max(1)).filter(move |_| n > 0).map(|w| w.join(" "))
}

/// Within-sentence n-grams of a paragraph, in order and with multiplicity.
///
/// # Panics
/// If `n` is not 1, 2 or 3.
pub fn extract_ngrams(paragraph: &Paragraph, n: usize) -> Vec<String> {
    assert!((1..=3).contains(&n), "n-gram order must be 1, 2 or 3, got {n}");
    paragraph_ngrams(paragraph, n)
}

pub(crate) fn paragraph_ngrams(paragraph: &Paragraph, n: usize) -> Vec<String> {
    paragraph
        .sentences
        .iter()
        .flat_map(|s| sequence_ngrams(s, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;


    fn doc(id: &str, body: &str) -> Document {
        Document {
            id: id.into(),
            topic: None,
            bias: None,
            title: String::new(),
            body: body.into(),
            source: String::new(),
            date: None,
            frame: None,
        }
    }

    fn para(sentences: &[&[&str]]) -> Paragraph {
        let sentences: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| s.iter().map(|t| t.to_string()).collect())
            .collect();
        Paragraph {
            doc_id: "d".into(),
            index: 0,
            tokens: sentences.iter().flatten().cloned().collect(),
            sentences,
        }
    }

    #[test]
    fn two_paragraphs() {
        let c = Corpus::from_documents(vec![doc("a", "A b.\n\nC d.")]).unwrap();
        let ps = c.paragraphs(0);
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].tokens, vec!["a", "b"]);
        assert_eq!(ps[1].tokens, vec!["c", "d"]);
        assert_eq!(ps[1].index, 1);
    }

    #[test]
    fn ngrams() {
        assert_eq!(extract_ngrams(&para(&[&["a", "b", "c"]]), 2), vec!["a b", "b c"]);
        assert!(extract_ngrams(&para(&[&["a"]]), 3).is_empty());
        assert_eq!(extract_ngrams(&para(&[&["a", "b"], &["c"]]), 2), vec!["a b"]);
        assert_eq!(extract_ngrams(&para(&[&["x", "x"]]), 1), vec!["x", "x"]);
    }

    #[test]
    #[should_panic]
    fn ngram_order_checked() {
        extract_ngrams(&para(&[&["a"]]), 4);
    }

    #[test]
    fn ingest_errors_and_topics() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"1","topic":"abortion","bias":"L","body":"x y."}}"#).unwrap();
        writeln!(f).unwrap();
        writeln!(f, r#"{{"id":"2","topic":"immigration","body":"z."}}"#).unwrap();
        writeln!(f, r#"{{"id":"3","bias":"Right","body":"w.","date":"2016-05-01"}}"#).unwrap();
        let c = ingest_corpus(f.path(), Topic::Abortion).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("1").unwrap().bias, Some(Bias::Left));
        assert_eq!(c.get("3").unwrap().topic, Some(Topic::Abortion));
        assert_eq!(c.get("3").unwrap().date.unwrap().to_string(), "2016-05-01");

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, r#"{{"id":"1","body":"x"}}"#).unwrap();
        writeln!(bad, "{{not json").unwrap();
        let err = ingest_corpus(bad.path(), Topic::Abortion).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let mut dup = tempfile::NamedTempFile::new().unwrap();
        writeln!(dup, r#"{{"id":"1","body":"x"}}"#).unwrap();
        writeln!(dup, r#"{{"id":"1","body":"y"}}"#).unwrap();
        let err = ingest_corpus(dup.path(), Topic::Abortion).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(ingest_corpus(f.path(), Topic::GunControl).unwrap().is_empty());
    }

    #[test]
    fn roundtrip_preserves_tokens() {
        let c = Corpus::from_documents(vec![
            doc("a", "First one. Second!\nThird para"),
            doc("b", "\"Quoted,\" she said.\n\n\nTail."),
        ])
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        c.write_jsonl(f.path()).unwrap();
        let back = ingest_corpus(f.path(), Topic::Custom).unwrap();
        for i in 0..c.len() {
            assert_eq!(c.paragraphs(i), back.paragraphs(i));
        }
    }
}
