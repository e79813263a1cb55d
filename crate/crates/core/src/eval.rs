//! Ranked-retrieval metrics (NDCG, Recall, MAP), sharpening analytics,
//! and α / query-count sweeps.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{apply_index_sharpening, default_sharpening_kind, Index, IndexRecord};
use crate::retrieval::{rank, score, RankedList, RetrievalConfig, RetrievalMode};
use crate::vector::Embedding;

/// Graded relevance judgments, `(query id, doc id) → grade`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn from_map(judgments: BTreeMap<String, BTreeMap<String, u32>>) -> Self {
        Self { judgments }
    }

    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, rel: u32) {
        self.judgments.entry(query_id.into()).or_default().insert(doc_id.into(), rel);
    }

    pub fn relevance(&self, query_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn judged(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    fn relevant_count(&self, query_id: &str) -> usize {
        self.judged(query_id).map_or(0, |m| m.values().filter(|&&r| r > 0).count())
    }
}

pub const NDCG_CUTOFF: usize = 10;
pub const RECALL_CUTOFF: usize = 50;
pub const MAP_CUTOFF: usize = 50;

/// Linear-gain NDCG@k; `None` when the query has no relevant document.
pub fn ndcg_at_k(ranked: &RankedList, qrels: &Qrels, k: usize) -> Option<f64> {
    let judged = qrels.judged(&ranked.query_id)?;
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&r| r > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let discount = |i: usize| ((i + 2) as f64).log2();
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, &r)| r as f64 / discount(i)).sum();
    let dcg: f64 = ranked
        .doc_ids()
        .take(k)
        .enumerate()
        .map(|(i, d)| qrels.relevance(&ranked.query_id, d) as f64 / discount(i))
        .sum();
    Some(dcg / idcg)
}

/// Fraction of relevant documents found in the top `k`.
pub fn recall_at_k(ranked: &RankedList, qrels: &Qrels, k: usize) -> Option<f64> {
    let total = qrels.relevant_count(&ranked.query_id);
    if total == 0 {
        return None;
    }
    let hits = ranked
        .doc_ids()
        .take(k)
        .filter(|d| qrels.relevance(&ranked.query_id, d) > 0)
        .count();
    Some(hits as f64 / total as f64)
}

/// Average precision truncated at `k`, normalized by the total number of
/// relevant documents.
pub fn map_at_k(ranked: &RankedList, qrels: &Qrels, k: usize) -> Option<f64> {
    let total = qrels.relevant_count(&ranked.query_id);
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.doc_ids().take(k).enumerate() {
        if qrels.relevance(&ranked.query_id, d) > 0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    #[serde(rename = "ndcg@10")]
    pub ndcg_at_10: f64,
    #[serde(rename = "recall@50")]
    pub recall_at_50: f64,
    #[serde(rename = "map@50")]
    pub map_at_50: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Macro averages over judged queries.
    pub mean: QueryMetrics,
    pub query_count: usize,
    pub skipped_count: usize,
    pub skipped: Vec<String>,
    pub per_query: BTreeMap<String, QueryMetrics>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Per-query and macro-averaged metrics. Queries with no relevant judgment
/// are skipped rather than scored zero.
pub fn evaluate_run(run: &[RankedList], qrels: &Qrels) -> Result<MetricsReport> {
    let mut per_query = BTreeMap::new();
    let mut skipped = Vec::new();
    for list in run {
        match (
            ndcg_at_k(list, qrels, NDCG_CUTOFF),
            recall_at_k(list, qrels, RECALL_CUTOFF),
            map_at_k(list, qrels, MAP_CUTOFF),
        ) {
            (Some(ndcg_at_10), Some(recall_at_50), Some(map_at_50)) => {
                per_query.insert(
                    list.query_id.clone(),
                    QueryMetrics {
                        ndcg_at_10,
                        recall_at_50,
                        map_at_50,
                    },
                );
            }
            _ => skipped.push(list.query_id.clone()),
        }
    }
    if per_query.is_empty() {
        return Err(Error::NoJudgedQuery);
    }
    skipped.sort();
    let n = per_query.len() as f64;
    let avg = |f: fn(&QueryMetrics) -> f64| per_query.values().map(f).sum::<f64>() / n;
    Ok(MetricsReport {
        mean: QueryMetrics {
            ndcg_at_10: avg(|m| m.ndcg_at_10),
            recall_at_50: avg(|m| m.recall_at_50),
            map_at_50: avg(|m| m.map_at_50),
        },
        query_count: per_query.len(),
        skipped_count: skipped.len(),
        skipped,
        per_query,
    })
}

/// `s(q, d*) − s(q, d)` for one record. Zero under non-sharpening modes and
/// for records without relevant metadata.
pub fn sharpening_boost(q: &Embedding, record: &IndexRecord, cfg: &RetrievalConfig) -> Result<f64> {
    let sharp = score(q, record, cfg, None)?;
    let traditional = score(q, record, &RetrievalConfig::new(RetrievalMode::Traditional, cfg.alpha), None)?;
    Ok(sharp - traditional)
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One retrieved document's sharpening boost for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocBoost {
    pub query_id: String,
    pub doc_id: String,
    pub boost: f64,
}

/// Retrieves the top `depth` documents per query under `cfg` and records
/// each document's sharpening boost.
pub fn compute_run_boosts(
    index: &Index,
    queries: &[(String, Embedding)],
    cfg: &RetrievalConfig,
    depth: usize,
) -> Result<Vec<DocBoost>> {
    let cfg = RetrievalConfig {
        top_k: depth,
        ..cfg.clone()
    };
    let mut out = Vec::new();
    for (qid, q) in queries {
        for entry in rank(qid, q, index, &cfg, None)?.entries {
            let record = index.get(&entry.doc_id).expect("ranked doc is indexed");
            out.push(DocBoost {
                query_id: qid.clone(),
                doc_id: entry.doc_id,
                boost: sharpening_boost(q, record, &cfg)?,
            });
        }
    }
    Ok(out)
}

/// Pearson r between document perplexity and sharpening boost, pooled over
/// every (query, document) pair.
pub fn boost_perplexity_correlation(boosts: &[DocBoost], perplexities: &HashMap<String, f64>) -> Result<f64> {
    let mut missing: Vec<String> = boosts
        .iter()
        .filter(|b| !perplexities.contains_key(&b.doc_id))
        .map(|b| b.doc_id.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::MissingPerplexity(missing));
    }
    let xs: Vec<f64> = boosts.iter().map(|b| perplexities[&b.doc_id]).collect();
    let ys: Vec<f64> = boosts.iter().map(|b| b.boost).collect();
    pearson(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Alpha,
    NQueries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg_at_10: f64,
    #[serde(rename = "recall@50")]
    pub recall_at_50: f64,
    #[serde(rename = "map@50")]
    pub map_at_50: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

fn run_all(index: &Index, queries: &[(String, Embedding)], cfg: &RetrievalConfig) -> Result<Vec<RankedList>> {
    queries.iter().map(|(qid, q)| rank(qid, q, index, cfg, None)).collect()
}

/// Ranks every query and evaluates the run.
pub fn evaluate_index(
    index: &Index,
    queries: &[(String, Embedding)],
    qrels: &Qrels,
    cfg: &RetrievalConfig,
) -> Result<MetricsReport> {
    evaluate_run(&run_all(index, queries, cfg)?, qrels)
}

fn row(axis: SweepAxis, value: f64, report: &MetricsReport) -> SweepRow {
    SweepRow {
        axis,
        value,
        ndcg_at_10: report.mean.ndcg_at_10,
        recall_at_50: report.mean.recall_at_50,
        map_at_50: report.mean.map_at_50,
    }
}

/// Evaluates at each α in `alphas`, then at each per-document query budget
/// in `n_values` (first `n` queries by ordinal, α from `cfg`).
pub fn sweep(
    index: &Index,
    queries: &[(String, Embedding)],
    qrels: &Qrels,
    alphas: &[f64],
    n_values: &[usize],
    cfg: &RetrievalConfig,
) -> Result<SweepTable> {
    if alphas.is_empty() && n_values.is_empty() {
        return Err(Error::EmptyInput("sweep needs alphas or n values"));
    }
    let prepare = |idx: &Index, alpha: f64| -> Result<Index> {
        if cfg.mode == RetrievalMode::IndexSharp {
            let kind = default_sharpening_kind(idx);
            apply_index_sharpening(idx, alpha, kind)
        } else {
            Ok(idx.clone())
        }
    };
    let mut table = SweepTable::default();
    for &alpha in alphas {
        let c = RetrievalConfig { alpha, ..cfg.clone() };
        let idx = prepare(index, alpha)?;
        table.rows.push(row(SweepAxis::Alpha, alpha, &evaluate_index(&idx, queries, qrels, &c)?));
    }
    for &n in n_values {
        let idx = prepare(&index.truncate_queries(n), cfg.alpha)?;
        table
            .rows
            .push(row(SweepAxis::NQueries, n as f64, &evaluate_index(&idx, queries, qrels, cfg)?));
    }
    Ok(table)
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("flushing csv", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_bytes(path, self.to_csv()?.as_bytes())
    }

    /// Line plot of NDCG@10 against the axis value, as SVG.
    pub fn to_svg(&self, axis: SweepAxis) -> Option<String> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.axis == axis)
            .map(|r| (r.value, r.ndcg_at_10))
            .collect();
        if pts.is_empty() {
            return None;
        }
        let (w, h, pad) = (480.0, 320.0, 40.0);
        let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let sx = |x: f64| pad + if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 } * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 } * (h - 2.0 * pad);
        let label = match axis {
            SweepAxis::Alpha => "alpha",
            SweepAxis::NQueries => "queries per document",
        };
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#).unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
            b = h - pad,
            r = w - pad
        )
        .unwrap();
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" ")).unwrap();
        for &(x, y) in &pts {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{label}</text>"#, w / 2.0, h - 8.0).unwrap();
        writeln!(s, r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})">NDCG@10 ({y0:.3}–{y1:.3})</text>"#, h / 2.0, h / 2.0).unwrap();
        s.push_str("</svg>\n");
        Some(s)
    }
}
