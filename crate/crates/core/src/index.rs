//! The document index: per-document embeddings plus attached query
//! metadata, index-time sharpening, text expansion, and persistence.
//!
//! On disk an index is a directory holding `manifest.json` and
//! `records.jsonl` (one record per line, decimal floats). An optional
//! `vectors.bin` sibling stores the raw document embeddings as
//! little-endian `f32` behind a fixed header.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Document;
use crate::embed::{Embedder, EmbedderFingerprint, TextRole};
use crate::error::{Error, Result};
use crate::io::{read_json, write_bytes, write_json_pretty};
use crate::querygen::{GeneratedQuery, QueryKind};
use crate::vector::{add_scaled, mean, Embedding};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";

const VECTORS_MAGIC: &[u8; 8] = b"SHRPVEC\0";
const VECTORS_VERSION: u32 = 1;

/// A generated query's embedding stored alongside its document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEmbedding {
    pub ordinal: u32,
    pub kind: QueryKind,
    pub text: String,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub title: Option<String>,
    pub embedding: Embedding,
    #[serde(default)]
    pub queries: Vec<QueryEmbedding>,
    #[serde(default)]
    pub sharpened_embedding: Option<Embedding>,
}

impl IndexRecord {
    pub fn queries_of(&self, kind: QueryKind) -> impl Iterator<Item = &QueryEmbedding> {
        self.queries.iter().filter(move |q| q.kind == kind)
    }

    fn check(&self, dim: usize) -> std::result::Result<(), String> {
        let mismatch = |what: &str, e: &Embedding| {
            (e.dim() != dim).then(|| format!("{what} of `{}` has dimension {}, expected {dim}", self.doc_id, e.dim()))
        };
        if let Some(m) = mismatch("embedding", &self.embedding) {
            return Err(m);
        }
        if let Some(m) = self.sharpened_embedding.as_ref().and_then(|s| mismatch("sharpened embedding", s)) {
            return Err(m);
        }
        let mut last: HashMap<QueryKind, u32> = HashMap::new();
        for q in &self.queries {
            if let Some(m) = mismatch("query embedding", &q.embedding) {
                return Err(m);
            }
            if let Some(prev) = last.insert(q.kind, q.ordinal) {
                if q.ordinal <= prev {
                    return Err(format!("query ordinals of `{}` are not increasing", self.doc_id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub embedder: EmbedderFingerprint,
    pub dimension: usize,
    pub doc_count: usize,
    pub total_query_count: usize,
    /// Stored query embeddings per document, `total_query_count / doc_count`.
    pub growth_factor: f64,
    pub alpha_used_for_index_sharpening: Option<f64>,
    /// Incremented by every mutation.
    pub revision: u32,
    /// Seconds since the Unix epoch. Excluded from [`IndexManifest::digest`].
    pub created_at: u64,
    pub pipeline_config_digest: Option<String>,
}

impl IndexManifest {
    /// SHA-256 over the manifest with `created_at` zeroed.
    pub fn digest(&self) -> String {
        let mut m = self.clone();
        m.created_at = 0;
        let bytes = serde_json::to_vec(&m).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn growth_factor(total_queries: usize, docs: usize) -> f64 {
    if docs == 0 {
        0.0
    } else {
        total_queries as f64 / docs as f64
    }
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    manifest: IndexManifest,
    records: Vec<IndexRecord>,
    positions: HashMap<String, usize>,
}

impl Index {
    /// Assembles an index from parts, validating every invariant.
    pub fn from_parts(embedder: EmbedderFingerprint, records: Vec<IndexRecord>) -> Result<Self> {
        let dimension = embedder.dimension;
        let manifest = IndexManifest {
            embedder,
            dimension,
            doc_count: records.len(),
            total_query_count: 0,
            growth_factor: 0.0,
            alpha_used_for_index_sharpening: None,
            revision: 0,
            created_at: now_secs(),
            pipeline_config_digest: None,
        };
        let mut index = Self {
            manifest,
            records,
            positions: HashMap::new(),
        };
        index.reindex()?;
        for r in &index.records {
            r.check(dimension).map_err(Error::InvalidConfig)?;
        }
        index.recount();
        Ok(index)
    }

    fn reindex(&mut self) -> Result<()> {
        self.positions.clear();
        for (i, r) in self.records.iter().enumerate() {
            if self.positions.insert(r.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateDocId(r.doc_id.clone()));
            }
        }
        Ok(())
    }

    fn recount(&mut self) {
        let total = self.records.iter().map(|r| r.queries.len()).sum();
        self.manifest.doc_count = self.records.len();
        self.manifest.total_query_count = total;
        self.manifest.growth_factor = growth_factor(total, self.records.len());
    }

    fn bump(&mut self) {
        self.manifest.revision += 1;
        self.manifest.created_at = now_secs();
    }

    pub fn manifest(&self) -> &IndexManifest {
        &self.manifest
    }

    pub fn records(&self) -> &[IndexRecord] {
        &self.records
    }

    pub fn dimension(&self) -> usize {
        self.manifest.dimension
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&IndexRecord> {
        self.positions.get(doc_id).map(|&i| &self.records[i])
    }

    pub fn set_pipeline_config_digest(&mut self, digest: impl Into<String>) {
        self.manifest.pipeline_config_digest = Some(digest.into());
    }

    pub fn check_fingerprint(&self, caller: &EmbedderFingerprint) -> Result<()> {
        if &self.manifest.embedder != caller {
            return Err(Error::FingerprintMismatch {
                index: self.manifest.embedder.to_string(),
                caller: caller.to_string(),
            });
        }
        Ok(())
    }

    /// Copy of the index keeping at most the first `n` queries of each kind
    /// per document (ordinal order).
    pub fn truncate_queries(&self, n: usize) -> Index {
        let mut out = self.clone();
        for r in &mut out.records {
            let mut seen: HashMap<QueryKind, usize> = HashMap::new();
            r.queries.retain(|q| {
                let c = seen.entry(q.kind).or_default();
                *c += 1;
                *c <= n
            });
        }
        out.recount();
        out
    }

    pub fn documents(&self) -> Vec<Document> {
        self.records
            .iter()
            .map(|r| Document {
                id: r.doc_id.clone(),
                title: r.title.clone(),
                text: r.text.clone(),
            })
            .collect()
    }
}

/// Embeds every document and returns an index with empty query metadata.
pub fn build_index(corpus: &[Document], embedder: &Embedder) -> Result<Index> {
    let mut seen = HashMap::with_capacity(corpus.len());
    for (i, d) in corpus.iter().enumerate() {
        if seen.insert(d.id.as_str(), i).is_some() {
            return Err(Error::DuplicateDocId(d.id.clone()));
        }
        if d.text.trim().is_empty() {
            return Err(Error::EmptyText(i).context(format!("document `{}`", d.id)));
        }
    }
    let bodies: Vec<String> = corpus.iter().map(Document::body).collect();
    let embeddings = if bodies.is_empty() {
        Vec::new()
    } else {
        embedder
            .embed_batch(&bodies, TextRole::Document)
            .map_err(|e| e.context(format!("embedding {} document(s)", bodies.len())))?
    };
    let records = corpus
        .iter()
        .zip(embeddings)
        .map(|(d, embedding)| IndexRecord {
            doc_id: d.id.clone(),
            text: d.text.clone(),
            title: d.title.clone(),
            embedding,
            queries: Vec::new(),
            sharpened_embedding: None,
        })
        .collect();
    Index::from_parts(embedder.fingerprint(), records)
}

/// Embeds the queries of `kind_filter` and appends them to their documents
/// in ordinal order. Queries of other kinds are ignored.
pub fn attach_queries(
    index: &Index,
    queries: &[GeneratedQuery],
    embedder: &Embedder,
    kind_filter: QueryKind,
) -> Result<Index> {
    index.check_fingerprint(&embedder.fingerprint())?;
    let mut selected: Vec<&GeneratedQuery> = queries.iter().filter(|q| q.kind == kind_filter).collect();
    if let Some(q) = selected.iter().find(|q| index.get(&q.source_doc_id).is_none()) {
        return Err(Error::UnknownDocument(q.source_doc_id.clone()));
    }
    let mut out = index.clone();
    if selected.is_empty() {
        out.bump();
        return Ok(out);
    }
    selected.sort_by(|a, b| {
        index.positions[&a.source_doc_id]
            .cmp(&index.positions[&b.source_doc_id])
            .then(a.ordinal.cmp(&b.ordinal))
    });
    let texts: Vec<&str> = selected.iter().map(|q| q.text.as_str()).collect();
    let embeddings = embedder
        .embed_batch(&texts, TextRole::Query)
        .map_err(|e| match e {
            Error::EmptyText(i) => Error::EmptyText(i).context(format!(
                "query {} of `{}`",
                selected[i].ordinal, selected[i].source_doc_id
            )),
            e => e.context(format!("embedding {} {kind_filter} queries", texts.len())),
        })?;
    for (q, embedding) in selected.iter().zip(embeddings) {
        let record = &mut out.records[index.positions[&q.source_doc_id]];
        if let Some(last) = record.queries_of(kind_filter).map(|x| x.ordinal).max() {
            if q.ordinal <= last {
                return Err(Error::QueryOrdinalOrder {
                    doc: q.source_doc_id.clone(),
                    kind: kind_filter.to_string(),
                    ordinal: q.ordinal,
                });
            }
        }
        record.queries.push(QueryEmbedding {
            ordinal: q.ordinal,
            kind: kind_filter,
            text: q.text.clone(),
            embedding,
        });
    }
    out.recount();
    out.bump();
    Ok(out)
}

/// Query kind used for index-time sharpening: contrastive when any record
/// carries contrastive queries, otherwise every kind.
pub fn default_sharpening_kind(index: &Index) -> Option<QueryKind> {
    index
        .records()
        .iter()
        .any(|r| r.queries_of(QueryKind::Contrastive).next().is_some())
        .then_some(QueryKind::Contrastive)
}

/// Sets every record's sharpened embedding to `d + alpha · mean(Q_d)`,
/// always starting from the raw embedding. Records with no matching queries
/// keep their raw embedding. `kind = None` uses queries of every kind.
pub fn apply_index_sharpening(index: &Index, alpha: f64, kind: Option<QueryKind>) -> Result<Index> {
    if !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be finite, got {alpha}")));
    }
    let mut out = index.clone();
    for r in &mut out.records {
        let qs: Vec<&Embedding> = r
            .queries
            .iter()
            .filter(|q| kind.is_none_or(|k| q.kind == k))
            .map(|q| &q.embedding)
            .collect();
        let sharpened = if qs.is_empty() {
            r.embedding.clone()
        } else {
            add_scaled(&r.embedding, &mean(&qs)?, alpha)?
        };
        r.sharpened_embedding = Some(sharpened);
    }
    out.manifest.alpha_used_for_index_sharpening = Some(alpha);
    out.bump();
    Ok(out)
}

/// Appends the query texts to the document text, space-separated, in ordinal order.
pub fn doc_expand(d: &Document, queries: &[GeneratedQuery]) -> Result<Document> {
    if let Some(q) = queries.iter().find(|q| q.source_doc_id != d.id) {
        return Err(Error::ForeignQuery {
            doc: d.id.clone(),
            query_doc: q.source_doc_id.clone(),
        });
    }
    let mut ordered: Vec<&GeneratedQuery> = queries.iter().collect();
    ordered.sort_by_key(|q| q.ordinal);
    let mut text = d.text.clone();
    for q in ordered {
        text.push(' ');
        text.push_str(&q.text);
    }
    Ok(Document {
        id: d.id.clone(),
        title: d.title.clone(),
        text,
    })
}

/// Expands every document of `corpus` with its queries of `kind`.
pub fn expand_corpus(corpus: &[Document], queries: &[GeneratedQuery], kind: QueryKind) -> Result<Vec<Document>> {
    let mut by_doc: BTreeMap<&str, Vec<GeneratedQuery>> = BTreeMap::new();
    for q in queries.iter().filter(|q| q.kind == kind) {
        by_doc.entry(q.source_doc_id.as_str()).or_default().push(q.clone());
    }
    corpus
        .iter()
        .map(|d| doc_expand(d, by_doc.get(d.id.as_str()).map(Vec::as_slice).unwrap_or(&[])))
        .collect()
}

/// Writes `manifest.json` and `records.jsonl` into `dir`.
pub fn save_index(index: &Index, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut buf = Vec::new();
    for r in &index.records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_bytes(&dir.join(RECORDS_FILE), &buf)?;
    write_json_pretty(&dir.join(MANIFEST_FILE), &index.manifest)
}

pub fn load_index(dir: &Path) -> Result<Index> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let records_path = dir.join(RECORDS_FILE);
    let corrupt = |path: &PathBuf, line: Option<usize>, message: String| Error::CorruptIndex {
        path: path.clone(),
        line,
        message,
    };
    if !manifest_path.exists() {
        return Err(corrupt(&manifest_path, None, "missing manifest".into()));
    }
    let manifest: IndexManifest = read_json(&manifest_path).map_err(|e| corrupt(&manifest_path, None, e.to_string()))?;
    if manifest.dimension != manifest.embedder.dimension {
        return Err(corrupt(&manifest_path, None, "manifest dimension disagrees with embedder".into()));
    }
    let file = File::open(&records_path).map_err(|e| Error::io(format!("opening {}", records_path.display()), e))?;
    let mut records = Vec::with_capacity(manifest.doc_count);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", records_path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: IndexRecord =
            serde_json::from_str(&line).map_err(|e| corrupt(&records_path, Some(i + 1), e.to_string()))?;
        record
            .check(manifest.dimension)
            .map_err(|m| corrupt(&records_path, Some(i + 1), m))?;
        records.push(record);
    }
    let mut index = Index {
        manifest: manifest.clone(),
        records,
        positions: HashMap::new(),
    };
    index.reindex().map_err(|e| corrupt(&records_path, None, e.to_string()))?;
    index.recount();
    if index.manifest.doc_count != manifest.doc_count
        || index.manifest.total_query_count != manifest.total_query_count
        || index.manifest.growth_factor != manifest.growth_factor
    {
        return Err(corrupt(
            &records_path,
            None,
            format!(
                "manifest records {} document(s) and {} queries, file holds {} and {}",
                manifest.doc_count, manifest.total_query_count, index.manifest.doc_count, index.manifest.total_query_count
            ),
        ));
    }
    Ok(index)
}

/// Loads an index and verifies that `caller` produced it.
pub fn load_index_for(dir: &Path, caller: &EmbedderFingerprint) -> Result<Index> {
    let index = load_index(dir)?;
    index.check_fingerprint(caller)?;
    Ok(index)
}

/// Writes the raw document embeddings in the compact binary layout:
/// magic, version `u32`, dimension `u32`, record count `u64`, then
/// `count × dimension` little-endian `f32`.
pub fn save_vectors_binary(index: &Index, path: &Path) -> Result<()> {
    let dim = index.dimension();
    let mut buf = Vec::with_capacity(24 + index.len() * dim * 4);
    buf.extend_from_slice(VECTORS_MAGIC);
    buf.extend_from_slice(&VECTORS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for r in &index.records {
        for &v in r.embedding.iter() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    write_bytes(path, &buf)
}

pub fn load_vectors_binary(path: &Path) -> Result<Vec<Embedding>> {
    let corrupt = |message: &str| Error::CorruptIndex {
        path: path.to_path_buf(),
        line: None,
        message: message.to_string(),
    };
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.len() < 24 || &bytes[..8] != VECTORS_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(8) != VECTORS_VERSION {
        return Err(corrupt("unsupported version"));
    }
    let dim = u32_at(12) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let payload = &bytes[24..];
    if dim == 0 || payload.len() != count * dim * 4 {
        return Err(corrupt("payload length disagrees with header"));
    }
    payload
        .chunks_exact(dim * 4)
        .map(|row| {
            let floats: Vec<f32> = row
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            Embedding::from_f32(&floats)
        })
        .collect()
}

/// Writes `records.jsonl`'s bytes for `index` to `out`; used for byte-level comparisons.
pub fn write_records<W: Write>(index: &Index, mut out: W) -> Result<()> {
    for r in &index.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("writing records", e))?;
    }
    Ok(())
}
