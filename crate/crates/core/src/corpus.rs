//! Documents, inference queries, and BEIR-format ingestion
//! (`corpus.jsonl`, `queries.jsonl`, qrels TSV).

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::io::read_jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "_id")]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: None,
            text: text.into(),
        }
    }

    /// Title and text joined by a space; this is what gets embedded and
    /// shown to the language model.
    pub fn body(&self) -> String {
        match self.title.as_deref().map(str::trim) {
            Some(t) if !t.is_empty() => format!("{t} {}", self.text),
            _ => self.text.clone(),
        }
    }
}

/// Documents addressable by id, in ingestion order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::DuplicateDocId(d.id.clone()));
            }
        }
        Ok(Self { docs, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// A test-time query with its BEIR id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceQuery {
    #[serde(rename = "_id")]
    pub id: String,
    pub text: String,
}

#[derive(Deserialize)]
struct RawDocument {
    #[serde(rename = "_id")]
    id: String,
    #[serde(default)]
    title: Option<String>,
    text: String,
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let raw: Vec<RawDocument> = read_jsonl(path)?;
    Ok(raw
        .into_iter()
        .map(|r| Document {
            id: r.id,
            title: r.title.filter(|t| !t.trim().is_empty()),
            text: r.text,
        })
        .collect())
}

pub fn load_queries(path: &Path) -> Result<Vec<InferenceQuery>> {
    read_jsonl(path)
}

/// Reads a `query-id \t corpus-id \t score` file. A first line whose score
/// column is not an integer is treated as the header.
pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut judgments: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() < 3 {
            return Err(parse_err(i + 1, format!("expected 3 tab-separated columns, got {}", cols.len())));
        }
        // Tolerate the 4-column TREC layout `qid 0 docid rel`.
        let (qid, did, score) = if cols.len() >= 4 {
            (cols[0], cols[2], cols[3])
        } else {
            (cols[0], cols[1], cols[2])
        };
        let rel: i64 = match score.parse() {
            Ok(r) => r,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(parse_err(i + 1, format!("score `{score}` is not an integer"))),
        };
        if rel < 0 {
            // Negative grades mark judged non-relevant in some collections.
            judgments.entry(qid.to_string()).or_default().insert(did.to_string(), 0);
            continue;
        }
        let prev = judgments
            .entry(qid.to_string())
            .or_default()
            .insert(did.to_string(), rel as u32);
        if prev.is_some() {
            return Err(parse_err(i + 1, format!("duplicate judgment for ({qid}, {did})")));
        }
    }
    Ok(Qrels::from_map(judgments))
}
