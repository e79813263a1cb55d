//! Scoring and ranking under traditional, inference-time sharpened,
//! index-time sharpened, and expanded-document modes.
//!
//! Sharpening shifts a document embedding toward its generated-query
//! embeddings before the cosine is taken:
//!
//! ```text
//! d* = d + alpha * g(q, Q_d)
//! g(q, Q_d) = sum_i softmax_i(s(q, q_i)) * q_i
//! ```

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{Embedder, TextRole};
use crate::error::{Error, Result};
use crate::index::{Index, IndexRecord};
use crate::querygen::{language_model, LanguageModel, LmConfig, QueryKind};
use crate::vector::{add_scaled, cosine_similarity, l2_normalize, mean, weighted_sum, Embedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrievalMode {
    Traditional,
    SimSharp,
    ConSharp,
    IndexSharp,
    DocExpanded,
}

impl RetrievalMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RetrievalMode::Traditional => "traditional",
            RetrievalMode::SimSharp => "sim-sharp",
            RetrievalMode::ConSharp => "con-sharp",
            RetrievalMode::IndexSharp => "index-sharp",
            RetrievalMode::DocExpanded => "doc-expanded",
        }
    }

    /// Query metadata consulted at inference time, if any.
    pub fn metadata_kind(&self) -> Option<QueryKind> {
        match self {
            RetrievalMode::SimSharp => Some(QueryKind::Simple),
            RetrievalMode::ConSharp => Some(QueryKind::Contrastive),
            _ => None,
        }
    }
}

impl std::str::FromStr for RetrievalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown retrieval mode `{s}`")))
    }
}

impl std::fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefinerStyle {
    /// Mean of the query embedding and the generated passage embedding.
    HydeMean,
    /// Embedding of the query text followed by the generated passage.
    Query2docConcat,
}

pub const DEFAULT_ANSWER_PROMPT: &str = "Please write a passage to answer the question.\nQuestion: {query}\nPassage:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinerConfig {
    pub style: RefinerStyle,
    #[serde(default)]
    pub lm: LmConfig,
    /// Template; `{query}` is replaced by the query text.
    #[serde(default = "default_answer_prompt")]
    pub answer_prompt: String,
}

fn default_answer_prompt() -> String {
    DEFAULT_ANSWER_PROMPT.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub mode: RetrievalMode,
    pub alpha: f64,
    pub top_k: usize,
    pub refiner: Option<RefinerConfig>,
    /// L2-normalize query-metadata embeddings before aggregation.
    pub normalize_query_metadata: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            mode: RetrievalMode::Traditional,
            alpha: 1.0,
            top_k: 100,
            refiner: None,
            normalize_query_metadata: false,
        }
    }
}

impl RetrievalConfig {
    pub fn new(mode: RetrievalMode, alpha: f64) -> Self {
        Self {
            mode,
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be finite, got {}", self.alpha)));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
}

/// Descending-score ranking for one query; equal scores are ordered by
/// ascending doc id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }
}

/// Softmax-weighted combination of `queries`, weighted by cosine
/// similarity to `q`. Weights are shifted by their maximum before
/// exponentiation.
pub fn aggregate_g(q: &Embedding, queries: &[&Embedding]) -> Result<Embedding> {
    let (weights, _) = softmax_weights(q, queries)?;
    weighted_sum(&weights, queries)
}

/// The softmax weights of [`aggregate_g`] and the raw similarities they came from.
pub fn softmax_weights(q: &Embedding, queries: &[&Embedding]) -> Result<(Vec<f64>, Vec<f64>)> {
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let sims: Vec<f64> = queries
        .iter()
        .map(|qi| cosine_similarity(q, qi))
        .collect::<Result<_>>()?;
    Ok((softmax(&sims), sims))
}

/// Max-shifted softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `d + alpha · g`.
pub fn sharpen(d: &Embedding, g: &Embedding, alpha: f64) -> Result<Embedding> {
    add_scaled(d, g, alpha)
}

/// Relevance of `record` to query embedding `q` under `cfg.mode`. A refined
/// query embedding, when given, replaces `q` everywhere.
pub fn score(q: &Embedding, record: &IndexRecord, cfg: &RetrievalConfig, q_refined: Option<&Embedding>) -> Result<f64> {
    let q = q_refined.unwrap_or(q);
    match cfg.mode {
        RetrievalMode::Traditional | RetrievalMode::DocExpanded => cosine_similarity(q, &record.embedding),
        RetrievalMode::IndexSharp => {
            let sharpened = record
                .sharpened_embedding
                .as_ref()
                .ok_or_else(|| Error::MissingSharpenedEmbedding(record.doc_id.clone()))?;
            cosine_similarity(q, sharpened)
        }
        RetrievalMode::SimSharp | RetrievalMode::ConSharp => {
            let kind = cfg.mode.metadata_kind().expect("sharp mode has a kind");
            let raw: Vec<&Embedding> = record.queries_of(kind).map(|m| &m.embedding).collect();
            if raw.is_empty() {
                return cosine_similarity(q, &record.embedding);
            }
            let g = if cfg.normalize_query_metadata {
                let normalized: Vec<Embedding> = raw.iter().map(|e| l2_normalize(e)).collect::<Result<_>>()?;
                aggregate_g(q, &normalized.iter().collect::<Vec<_>>())?
            } else {
                aggregate_g(q, &raw)?
            };
            cosine_similarity(q, &sharpen(&record.embedding, &g, cfg.alpha)?)
        }
    }
}

fn rank_order(a: &RankedEntry, b: &RankedEntry) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id))
}

const PARTITION: usize = 512;

/// Exhaustive scan: scores every record and keeps the top `cfg.top_k`.
pub fn rank(
    query_id: &str,
    q: &Embedding,
    index: &Index,
    cfg: &RetrievalConfig,
    q_refined: Option<&Embedding>,
) -> Result<RankedList> {
    cfg.validate()?;
    let dim = index.dimension();
    q.ensure_dim(dim)?;
    if let Some(r) = q_refined {
        r.ensure_dim(dim)?;
    }
    let top_k = cfg.top_k;
    let partials: Vec<Vec<RankedEntry>> = index
        .records()
        .par_chunks(PARTITION)
        .map(|chunk| {
            let mut part: Vec<RankedEntry> = chunk
                .iter()
                .map(|r| {
                    Ok(RankedEntry {
                        doc_id: r.doc_id.clone(),
                        score: score(q, r, cfg, q_refined)?,
                    })
                })
                .collect::<Result<_>>()?;
            part.sort_by(rank_order);
            part.truncate(top_k);
            Ok(part)
        })
        .collect::<Result<_>>()?;
    let mut entries: Vec<RankedEntry> = partials.into_iter().flatten().collect();
    entries.sort_by(rank_order);
    entries.truncate(top_k);
    Ok(RankedList {
        query_id: query_id.to_string(),
        entries,
    })
}

/// Outcome of query refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub embedding: Embedding,
    /// Set when the LM produced nothing and the raw query embedding was used.
    pub warning: Option<String>,
}

/// Asks the LM to answer `q_text` and folds the answer into the query embedding.
pub fn refine_query(
    q_text: &str,
    cfg: &RefinerConfig,
    model: &dyn LanguageModel,
    embedder: &Embedder,
) -> Result<Refinement> {
    if q_text.trim().is_empty() {
        return Err(Error::EmptyText(0));
    }
    let passage = model.complete(&cfg.answer_prompt.replace("{query}", q_text))?;
    let passage = passage.trim();
    if passage.is_empty() {
        return Ok(Refinement {
            embedding: embedder.embed_one(q_text, TextRole::Query)?,
            warning: Some(format!("empty generation for query `{q_text}`; using the unrefined embedding")),
        });
    }
    let embedding = match cfg.style {
        RefinerStyle::HydeMean => {
            let both = embedder.embed_batch(&[q_text, passage], TextRole::Query)?;
            mean(&[&both[0], &both[1]])?
        }
        RefinerStyle::Query2docConcat => embedder.embed_one(&format!("{q_text} {passage}"), TextRole::Query)?,
    };
    Ok(Refinement {
        embedding,
        warning: None,
    })
}

/// Ranked list plus any non-fatal warnings raised while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub ranked: RankedList,
    pub warnings: Vec<String>,
}

/// Embeds queries and ranks an index; holds the LM client when a refiner is configured.
pub struct Retriever<'a> {
    index: &'a Index,
    embedder: &'a Embedder,
    cfg: RetrievalConfig,
    refiner: Option<Box<dyn LanguageModel>>,
}

impl<'a> Retriever<'a> {
    pub fn new(index: &'a Index, embedder: &'a Embedder, cfg: RetrievalConfig) -> Result<Self> {
        cfg.validate()?;
        index.check_fingerprint(&embedder.fingerprint())?;
        let refiner = cfg.refiner.as_ref().map(|r| language_model(&r.lm)).transpose()?;
        Ok(Self {
            index,
            embedder,
            cfg,
            refiner,
        })
    }

    pub fn with_model(mut self, model: Box<dyn LanguageModel>) -> Self {
        self.refiner = Some(model);
        self
    }

    pub fn retrieve(&self, query_id: &str, q_text: &str) -> Result<Retrieval> {
        let q = self.embedder.embed_one(q_text, TextRole::Query)?;
        let mut warnings = Vec::new();
        let refined = match (&self.cfg.refiner, &self.refiner) {
            (Some(rc), Some(model)) => {
                let r = refine_query(q_text, rc, model.as_ref(), self.embedder)?;
                warnings.extend(r.warning);
                Some(r.embedding)
            }
            _ => None,
        };
        let ranked = rank(query_id, &q, self.index, &self.cfg, refined.as_ref())?;
        Ok(Retrieval { ranked, warnings })
    }
}

/// Embeds `q_text` and returns the top `cfg.top_k` documents of `index`.
pub fn retrieve_topk(
    query_id: &str,
    q_text: &str,
    index: &Index,
    embedder: &Embedder,
    cfg: &RetrievalConfig,
) -> Result<Retrieval> {
    Retriever::new(index, embedder, cfg.clone())?.retrieve(query_id, q_text)
}

/// TREC run lines: `query_id Q0 doc_id rank score run_tag`, rank from 1,
/// score with six decimals.
pub fn format_trec_run(lists: &[RankedList], run_tag: &str) -> String {
    let mut out = String::new();
    for list in lists {
        for (i, e) in list.entries.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {:.6} {}", list.query_id, e.doc_id, i + 1, e.score, run_tag).unwrap();
        }
    }
    out
}

pub fn write_trec_run(path: &Path, lists: &[RankedList], run_tag: &str) -> Result<()> {
    crate::io::write_bytes(path, format_trec_run(lists, run_tag).as_bytes())
}

/// Parses a TREC run file; entries are ordered by the rank column and
/// queries by first appearance.
pub fn read_trec_run(path: &Path) -> Result<Vec<RankedList>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut lists: Vec<(RankedList, Vec<usize>)> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(bad(format!("expected 6 columns, got {}", cols.len())));
        }
        let rank: usize = cols[3].parse().map_err(|_| bad(format!("bad rank `{}`", cols[3])))?;
        let score: f64 = cols[4].parse().map_err(|_| bad(format!("bad score `{}`", cols[4])))?;
        let pos = match lists.iter().position(|(l, _)| l.query_id == cols[0]) {
            Some(p) => p,
            None => {
                lists.push((
                    RankedList {
                        query_id: cols[0].to_string(),
                        entries: Vec::new(),
                    },
                    Vec::new(),
                ));
                lists.len() - 1
            }
        };
        let (list, ranks) = &mut lists[pos];
        if list.entries.iter().any(|e| e.doc_id == cols[2]) {
            return Err(bad(format!("duplicate document `{}` for query `{}`", cols[2], cols[0])));
        }
        list.entries.push(RankedEntry {
            doc_id: cols[2].to_string(),
            score,
        });
        ranks.push(rank);
    }
    Ok(lists
        .into_iter()
        .map(|(mut list, ranks)| {
            let mut paired: Vec<(usize, RankedEntry)> = ranks.into_iter().zip(list.entries).collect();
            paired.sort_by_key(|(r, _)| *r);
            list.entries = paired.into_iter().map(|(_, e)| e).collect();
            list
        })
        .collect())
}
