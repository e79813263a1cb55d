//! Acceptance checks. Each test prints one `criterion N ...: PASS|FAIL` line.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sharpen_core::corpus::{Corpus, Document};
use sharpen_core::embed::{Embedder, EmbedderConfig, EmbedderFingerprint};
use sharpen_core::eval::{
    boost_perplexity_correlation, evaluate_index, map_at_k, ndcg_at_k, recall_at_k, sweep, DocBoost, Qrels,
    SweepAxis,
};
use sharpen_core::index::{
    apply_index_sharpening, attach_queries, build_index, Index, IndexRecord, QueryEmbedding,
};
use sharpen_core::pipeline::{Pipeline, PipelineConfig};
use sharpen_core::querygen::{
    generate_contrastive, GeneratedQuery, LanguageModel, LmConfig, PromptBundle, QueryKind,
};
use sharpen_core::refsel::{select_all_references, select_references, RefSelConfig};
use sharpen_core::retrieval::{
    aggregate_g, rank, score, softmax, softmax_weights, RankedEntry, RankedList, RetrievalConfig, RetrievalMode,
};
use sharpen_core::vector::Embedding;
use sharpen_core::Result;

const SUM_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-9;
const SHIFT_TOL: f64 = 1e-9;
const MIDPOINT_TOL: f64 = 1e-12;
const AGREEMENT_TOL: f64 = 1e-9;
const METRIC_TOL: f64 = 1e-9;
const RANK2_NDCG: f64 = 0.6309;
const RANK2_TOL: f64 = 1e-4;
const REFSEL_MIN_SUCCESSES: usize = 95;
const MIN_UPLIFT: f64 = 0.05;
const MAX_CORRELATION: f64 = -0.8;

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, sd: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sd).unwrap();
    (0..dim).map(|_| n.sample(rng)).collect()
}

fn emb(v: Vec<f64>) -> Embedding {
    Embedding::new(v).unwrap()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Random unit vector orthogonal to the unit vector `q`.
fn orthogonal_unit(rng: &mut ChaCha8Rng, q: &[f64]) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, q.len(), 1.0);
        let p = dot(&v, q);
        let w: Vec<f64> = v.iter().zip(q).map(|(a, b)| a - p * b).collect();
        if norm(&w) > 1e-3 {
            return unit(&w);
        }
    }
}

fn fingerprint(dim: usize) -> EmbedderFingerprint {
    EmbedderConfig::deterministic(dim, 0).fingerprint()
}

fn record(id: &str, embedding: Vec<f64>, queries: Vec<Vec<f64>>) -> IndexRecord {
    IndexRecord {
        doc_id: id.to_string(),
        text: format!("text of {id}"),
        title: None,
        embedding: emb(embedding),
        queries: queries
            .into_iter()
            .enumerate()
            .map(|(i, v)| QueryEmbedding {
                ordinal: i as u32,
                kind: QueryKind::Contrastive,
                text: format!("query {i} of {id}"),
                embedding: emb(v),
            })
            .collect(),
        sharpened_embedding: None,
    }
}

fn words(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> String {
    (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect::<Vec<_>>().join(" ")
}

#[test]
fn criterion_01_zero_alpha_matches_traditional() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocab: Vec<String> = (0..200).map(|i| format!("tok{i}")).collect();
    let embedder = Embedder::new(EmbedderConfig::deterministic(32, 0)).unwrap();
    let docs: Vec<Document> = (0..100)
        .map(|i| Document::new(format!("doc{i:03}"), words(&mut rng, &vocab, 12)))
        .collect();
    let queries: Vec<GeneratedQuery> = docs
        .iter()
        .flat_map(|d| {
            (0..3)
                .map(|o| GeneratedQuery {
                    text: words(&mut rng, &vocab, 4),
                    source_doc_id: d.id.clone(),
                    reference_doc_id: None,
                    kind: QueryKind::Contrastive,
                    ordinal: o,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let index = build_index(&docs, &embedder).unwrap();
    let index = attach_queries(&index, &queries, &embedder, QueryKind::Contrastive).unwrap();

    let mut traditional = RetrievalConfig::new(RetrievalMode::Traditional, 0.0);
    traditional.top_k = 100;
    let con = RetrievalConfig {
        mode: RetrievalMode::ConSharp,
        ..traditional.clone()
    };
    let mut equal = 0;
    for i in 0..20 {
        let q = embedder
            .embed_one(&words(&mut rng, &vocab, 5), sharpen_core::TextRole::Query)
            .unwrap();
        let qid = format!("q{i}");
        let a = rank(&qid, &q, &index, &traditional, None).unwrap();
        let b = rank(&qid, &q, &index, &con, None).unwrap();
        if a == b {
            equal += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "zero-alpha identity",
        equal == 20 && elapsed < Duration::from_secs(5),
        format!("{equal}/20 ranked lists identical, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_softmax_contract() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_sum: f64 = 0.0;
    let mut worst_norm_excess = f64::NEG_INFINITY;
    let mut worst_shift: f64 = 0.0;
    let mut negative = 0;
    for _ in 0..1000 {
        let dim = rng.random_range(2..24);
        let q = emb(gaussian_vec(&mut rng, dim, 1.0));
        let n = rng.random_range(1..=16);
        let qs: Vec<Embedding> = (0..n)
            .map(|_| {
                let scale = rng.random_range(0.1..10.0);
                emb(gaussian_vec(&mut rng, dim, scale))
            })
            .collect();
        let refs: Vec<&Embedding> = qs.iter().collect();
        let (w, sims) = softmax_weights(&q, &refs).unwrap();
        negative += w.iter().filter(|&&x| x < 0.0).count();
        worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
        let g = aggregate_g(&q, &refs).unwrap();
        let max_norm = qs.iter().map(|e| norm(e)).fold(0.0, f64::max);
        worst_norm_excess = worst_norm_excess.max(norm(&g) - max_norm);
        let c = rng.random_range(-50.0..50.0);
        let shifted: Vec<f64> = sims.iter().map(|s| s + c).collect();
        let w2 = softmax(&shifted);
        for (a, b) in w.iter().zip(&w2) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = negative == 0
        && worst_sum <= SUM_TOL
        && worst_norm_excess <= NORM_TOL
        && worst_shift <= SHIFT_TOL
        && elapsed < Duration::from_secs(5);
    report(
        2,
        "softmax contract",
        pass,
        format!(
            "negative weights {negative}, max |sum-1| {worst_sum:.1e}, max norm excess {worst_norm_excess:.1e}, \
             max shift diff {worst_shift:.1e}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_03_single_and_symmetric_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut single_exact = true;
    let mut worst_mid: f64 = 0.0;
    for _ in 0..200 {
        let dim = rng.random_range(2..32);
        let q = emb(gaussian_vec(&mut rng, dim, 1.0));
        let e = emb(gaussian_vec(&mut rng, dim, 2.0));
        single_exact &= aggregate_g(&q, &[&e]).unwrap() == e;

        let qu = unit(&q);
        let u = orthogonal_unit(&mut rng, &qu);
        let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(0.1..2.0));
        let q1: Vec<f64> = qu.iter().zip(&u).map(|(x, y)| a * x + b * y).collect();
        let q2: Vec<f64> = qu.iter().zip(&u).map(|(x, y)| a * x - b * y).collect();
        let mid: Vec<f64> = q1.iter().zip(&q2).map(|(x, y)| (x + y) / 2.0).collect();
        let g = aggregate_g(&q, &[&emb(q1), &emb(q2)]).unwrap();
        for (x, y) in g.iter().zip(&mid) {
            worst_mid = worst_mid.max((x - y).abs());
        }
    }
    report(
        3,
        "single-query and symmetric identities",
        single_exact && worst_mid <= MIDPOINT_TOL,
        format!("single exact: {single_exact}, max midpoint error {worst_mid:.1e}"),
    );
}

#[test]
fn criterion_04_index_sharp_matches_con_sharp_on_equal_similarities() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..200 {
        let dim = rng.random_range(4..24);
        let q = gaussian_vec(&mut rng, dim, 1.0);
        let qu = unit(&q);
        let c: f64 = rng.random_range(-0.9..0.9);
        let s = (1.0 - c * c).sqrt();
        let alpha = rng.random_range(0.0..3.0);
        let records: Vec<IndexRecord> = (0..8)
            .map(|i| {
                let nq = rng.random_range(0..=8);
                let qs = (0..nq)
                    .map(|_| {
                        let u = orthogonal_unit(&mut rng, &qu);
                        let lambda = rng.random_range(0.5..2.0);
                        qu.iter().zip(&u).map(|(x, y)| lambda * (c * x + s * y)).collect()
                    })
                    .collect();
                record(&format!("d{i}"), gaussian_vec(&mut rng, dim, 1.0), qs)
            })
            .collect();
        let index = Index::from_parts(fingerprint(dim), records).unwrap();
        let sharp = apply_index_sharpening(&index, alpha, Some(QueryKind::Contrastive)).unwrap();
        let q = emb(q);
        let con = RetrievalConfig::new(RetrievalMode::ConSharp, alpha);
        let idx = RetrievalConfig::new(RetrievalMode::IndexSharp, alpha);
        for r in sharp.records() {
            let a = score(&q, r, &con, None).unwrap();
            let b = score(&q, r, &idx, None).unwrap();
            worst = worst.max((a - b).abs());
            compared += 1;
        }
    }
    report(
        4,
        "index-sharp / con-sharp agreement",
        worst <= AGREEMENT_TOL,
        format!("{compared} document scores, max difference {worst:.1e}"),
    );
}

mod oracle {
    //! Straightforward metric definitions, written independently of the crate.

    pub fn ndcg(ranking: &[String], grades: &std::collections::HashMap<String, u32>, k: usize) -> Option<f64> {
        let mut ideal: Vec<f64> = grades.values().filter(|&&g| g > 0).map(|&g| g as f64).collect();
        if ideal.is_empty() {
            return None;
        }
        ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut dcg = 0.0;
        for (pos, doc) in ranking.iter().enumerate() {
            if pos >= k {
                break;
            }
            let g = grades.get(doc).copied().unwrap_or(0) as f64;
            dcg += g * std::f64::consts::LN_2 / ((pos + 2) as f64).ln();
        }
        let mut idcg = 0.0;
        for (pos, g) in ideal.iter().enumerate().take(k) {
            idcg += g * std::f64::consts::LN_2 / ((pos + 2) as f64).ln();
        }
        Some(dcg / idcg)
    }

    pub fn recall(ranking: &[String], grades: &std::collections::HashMap<String, u32>, k: usize) -> Option<f64> {
        let relevant: Vec<&String> = grades.iter().filter(|(_, &g)| g > 0).map(|(d, _)| d).collect();
        if relevant.is_empty() {
            return None;
        }
        let top = &ranking[..ranking.len().min(k)];
        let found = relevant.iter().filter(|d| top.contains(d)).count();
        Some(found as f64 / relevant.len() as f64)
    }

    pub fn map(ranking: &[String], grades: &std::collections::HashMap<String, u32>, k: usize) -> Option<f64> {
        let total = grades.values().filter(|&&g| g > 0).count();
        if total == 0 {
            return None;
        }
        let is_rel = |d: &String| grades.get(d).is_some_and(|&g| g > 0);
        let mut ap = 0.0;
        for cut in 1..=ranking.len().min(k) {
            if is_rel(&ranking[cut - 1]) {
                let precision = ranking[..cut].iter().filter(|d| is_rel(d)).count() as f64 / cut as f64;
                ap += precision;
            }
        }
        Some(ap / total as f64)
    }
}

fn ranked(qid: &str, docs: &[String]) -> RankedList {
    RankedList {
        query_id: qid.to_string(),
        entries: docs
            .iter()
            .enumerate()
            .map(|(i, d)| RankedEntry {
                doc_id: d.clone(),
                score: -(i as f64),
            })
            .collect(),
    }
}

#[test]
fn criterion_05_metric_oracle_parity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut none_mismatch = 0;
    let mut ideal_exact = true;
    for _ in 0..50 {
        let n = rng.random_range(1..=30);
        let mut docs: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let mut grades = HashMap::new();
        let mut qrels = Qrels::default();
        for d in &docs {
            if rng.random_bool(0.6) {
                let g = rng.random_range(0..5);
                grades.insert(d.clone(), g);
                qrels.insert("q", d.clone(), g);
            }
        }
        docs.shuffle(&mut rng);
        let list = ranked("q", &docs);
        for k in [1, 3, 5, 10, 20, 50] {
            let pairs = [
                (ndcg_at_k(&list, &qrels, k), oracle::ndcg(&docs, &grades, k)),
                (recall_at_k(&list, &qrels, k), oracle::recall(&docs, &grades, k)),
                (map_at_k(&list, &qrels, k), oracle::map(&docs, &grades, k)),
            ];
            for (a, b) in pairs {
                match (a, b) {
                    (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                    (None, None) => {}
                    _ => none_mismatch += 1,
                }
            }
        }
        let mut ideal = docs.clone();
        ideal.sort_by_key(|d| std::cmp::Reverse(grades.get(d).copied().unwrap_or(0)));
        if let Some(v) = ndcg_at_k(&ranked("q", &ideal), &qrels, 10) {
            ideal_exact &= v == 1.0;
        }
    }
    let mut binary = Qrels::default();
    binary.insert("q", "rel", 1);
    let rank2 = ndcg_at_k(&ranked("q", &["other".into(), "rel".into()]), &binary, 10).unwrap();
    let pass = worst <= METRIC_TOL && none_mismatch == 0 && ideal_exact && (rank2 - RANK2_NDCG).abs() <= RANK2_TOL;
    report(
        5,
        "metric oracle parity",
        pass,
        format!(
            "max deviation {worst:.1e}, skip mismatches {none_mismatch}, ideal ndcg exact {ideal_exact}, rank-2 ndcg {rank2:.4}"
        ),
    );
}

#[test]
fn criterion_06_reference_selection_recovers_planted_blobs() {
    let start = Instant::now();
    let dim = 16;
    let spread = 0.01;
    let mut successes = 0;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        // orthonormal blob centres
        let mut centres: Vec<Vec<f64>> = Vec::new();
        while centres.len() < 3 {
            let mut v = gaussian_vec(&mut rng, dim, 1.0);
            for c in &centres {
                let p = dot(&v, c);
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= p * y);
            }
            centres.push(unit(&v));
        }
        let a = rng.random_range(25..=40);
        let b = rng.random_range(25..=40);
        let sizes = [a, b, 100 - a - b];
        let mut records = Vec::new();
        let mut blob_of = HashMap::new();
        let target: Vec<f64> = (0..dim).map(|j| centres.iter().map(|c| c[j]).sum()).collect();
        records.push(record("target", target, vec![]));
        for (blob, &size) in sizes.iter().enumerate() {
            for _ in 0..size {
                let id = format!("n{:03}", records.len());
                let v: Vec<f64> = centres[blob]
                    .iter()
                    .zip(gaussian_vec(&mut rng, dim, spread))
                    .map(|(c, e)| c + e)
                    .collect();
                blob_of.insert(id.clone(), blob);
                records.push(record(&id, v, vec![]));
            }
        }
        let index = Index::from_parts(fingerprint(dim), records).unwrap();
        let cfg = RefSelConfig {
            neighborhood_size: 100,
            seed,
            ..RefSelConfig::default()
        };
        let refs = select_references("target", &index, &cfg).unwrap();
        let blobs: HashSet<usize> = refs.reference_ids.iter().map(|r| blob_of[r]).collect();
        if refs.chosen_k == 3 && refs.reference_ids.len() == 3 && blobs.len() == 3 {
            successes += 1;
        } else {
            failures.push((seed, refs.chosen_k));
        }
    }
    let elapsed = start.elapsed();
    report(
        6,
        "reference-selection fidelity",
        successes >= REFSEL_MIN_SUCCESSES && elapsed < Duration::from_secs(30),
        format!("{successes}/100 seeds recovered all three blobs, {elapsed:.2?}, failures {failures:?}"),
    );
}

/// Answers a contrastive prompt with the planted queries of its first document.
struct PlantedLm {
    by_body: HashMap<String, Vec<String>>,
}

impl LanguageModel for PlantedLm {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = prompt
            .lines()
            .find_map(|l| l.strip_prefix("Document 1: "))
            .expect("contrastive prompt names document 1");
        Ok(self.by_body[body]
            .iter()
            .map(|q| format!("<PLAN>mention the detail only document 1 has</PLAN>\n<QUERY>{q}</QUERY>\n"))
            .collect())
    }
}

struct TwinCorpus {
    index: Index,
    queries: Vec<(String, Embedding)>,
    qrels: Qrels,
}

/// 50 pairs of documents that share six tokens and differ in one. Each
/// document's planted contrastive query pairs its distinguishing token with
/// a cue word; test queries use the shared tokens plus the target's cue.
/// The twin's id sorts first, so ties under plain cosine go against the
/// target.
fn twin_corpus() -> TwinCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let embedder = Embedder::new(EmbedderConfig::deterministic(256, 0)).unwrap();
    let mut docs = Vec::new();
    let mut planted = HashMap::new();
    let mut tests = Vec::new();
    let mut qrels = Qrels::default();
    for i in 0..50 {
        let shared: Vec<String> = (0..6).map(|j| format!("pair{i}word{j}")).collect();
        let base = shared.join(" ");
        for (suffix, tok, cue) in [("s", format!("twin{i}mark"), format!("twin{i}cue")), ("t", format!("target{i}mark"), format!("target{i}cue"))] {
            let d = Document::new(format!("p{i:02}-{suffix}"), format!("{base} {tok}"));
            planted.insert(d.body(), vec![format!("{tok} {cue}")]);
            docs.push(d);
        }
        let mut picked = shared.clone();
        picked.shuffle(&mut rng);
        let qid = format!("q{i:02}");
        tests.push((qid.clone(), format!("{} target{i}cue", picked[..3].join(" "))));
        qrels.insert(qid, format!("p{i:02}-t"), 1);
    }
    let index = build_index(&docs, &embedder).unwrap();
    let corpus = Corpus::new(docs.clone()).unwrap();
    let lm = PlantedLm { by_body: planted };
    let bundle = PromptBundle::new(["a b", "c d", "e f", "g h", "i j"]).unwrap();
    let refsel = RefSelConfig {
        neighborhood_size: 5,
        k_min: 2,
        k_max: 3,
        ..RefSelConfig::default()
    };
    let mut generated = Vec::new();
    for refs in select_all_references(&index, &refsel).unwrap() {
        let d = corpus.get(&refs.doc_id).unwrap();
        let outcome = generate_contrastive(d, &refs, &corpus, &lm, &LmConfig::default(), &bundle).unwrap();
        generated.extend(outcome.queries);
    }
    let index = attach_queries(&index, &generated, &embedder, QueryKind::Contrastive).unwrap();
    let queries = tests
        .into_iter()
        .map(|(id, text)| {
            let e = embedder.embed_one(&text, sharpen_core::TextRole::Query).unwrap();
            (id, e)
        })
        .collect();
    TwinCorpus { index, queries, qrels }
}

const PLANTED_ALPHA: f64 = 1.0;

#[test]
fn criterion_07_sharpening_separates_near_duplicates() {
    let start = Instant::now();
    let t = twin_corpus();
    let trad = evaluate_index(&t.index, &t.queries, &t.qrels, &RetrievalConfig::new(RetrievalMode::Traditional, 0.0))
        .unwrap();
    let con = evaluate_index(
        &t.index,
        &t.queries,
        &t.qrels,
        &RetrievalConfig::new(RetrievalMode::ConSharp, PLANTED_ALPHA),
    )
    .unwrap();
    let uplift = con.mean.ndcg_at_10 - trad.mean.ndcg_at_10;
    let elapsed = start.elapsed();
    report(
        7,
        "end-to-end sharpening uplift",
        uplift >= MIN_UPLIFT && elapsed < Duration::from_secs(60),
        format!(
            "traditional ndcg@10 {:.4}, con-sharp ndcg@10 {:.4}, uplift {uplift:.4}, {elapsed:.2?}",
            trad.mean.ndcg_at_10, con.mean.ndcg_at_10
        ),
    );
}

#[test]
fn criterion_08_growth_factor() {
    let embedder = Embedder::new(EmbedderConfig::deterministic(16, 0)).unwrap();
    let docs: Vec<Document> = (0..10).map(|i| Document::new(format!("d{i}"), format!("document number {i}"))).collect();
    let queries: Vec<GeneratedQuery> = docs
        .iter()
        .flat_map(|d| {
            (0..3).map(|o| GeneratedQuery {
                text: format!("question {o} about {}", d.id),
                source_doc_id: d.id.clone(),
                reference_doc_id: None,
                kind: QueryKind::Contrastive,
                ordinal: o,
            })
        })
        .collect();
    let index = build_index(&docs, &embedder).unwrap();
    let index = attach_queries(&index, &queries, &embedder, QueryKind::Contrastive).unwrap();
    let expected = index.records().iter().map(|r| r.queries.len()).sum::<usize>() as f64 / index.len() as f64;
    let got = index.manifest().growth_factor;
    report(
        8,
        "growth-factor bookkeeping",
        got == 3.0 && got == expected && index.manifest().total_query_count == 30,
        format!("growth_factor {got}, recomputed {expected}"),
    );
}

fn fixture_config(workdir: &Path) -> PipelineConfig {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy");
    let mut cfg = PipelineConfig::load(&root.join("config.json")).unwrap();
    cfg.paths.workdir = workdir.to_path_buf();
    cfg
}

#[test]
fn criterion_09_pipeline_is_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut manifests = Vec::new();
    for d in &dirs {
        let p = Pipeline::new(fixture_config(d.path())).unwrap();
        let _lock = p.workdir().lock().unwrap();
        p.run_all().unwrap();
        manifests.push(sharpen_core::load_index(&p.workdir().index_q_dir()).unwrap().manifest().digest());
    }
    let files = [
        "index/records.jsonl",
        "index/vectors.bin",
        "refs.jsonl",
        "queries.jsonl",
        "index-q/records.jsonl",
        "run-con-sharp.trec",
        "metrics-con-sharp.json",
        "sweep.csv",
    ];
    let mut differing = Vec::new();
    for f in files {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        if a != b || a.is_empty() {
            differing.push(f);
        }
    }
    report(
        9,
        "determinism",
        differing.is_empty() && manifests[0] == manifests[1],
        format!("{} artifacts compared, differing {differing:?}, manifest digests equal {}", files.len(), manifests[0] == manifests[1]),
    );
}

#[test]
fn criterion_10_sweep_sanity() {
    let t = twin_corpus();
    let cfg = RetrievalConfig::new(RetrievalMode::ConSharp, PLANTED_ALPHA);
    let table = sweep(&t.index, &t.queries, &t.qrels, &[0.0, 0.5, PLANTED_ALPHA, 2.0], &[0, 1, 2], &cfg).unwrap();
    let trad = evaluate_index(&t.index, &t.queries, &t.qrels, &RetrievalConfig::new(RetrievalMode::Traditional, 0.0))
        .unwrap()
        .mean;
    let row = |axis: SweepAxis, v: f64| table.rows.iter().find(|r| r.axis == axis && r.value == v).unwrap();
    let same = |r: &sharpen_core::eval::SweepRow| {
        r.ndcg_at_10 == trad.ndcg_at_10 && r.recall_at_50 == trad.recall_at_50 && r.map_at_50 == trad.map_at_50
    };
    let alpha0 = row(SweepAxis::Alpha, 0.0);
    let n0 = row(SweepAxis::NQueries, 0.0);
    let best = row(SweepAxis::Alpha, PLANTED_ALPHA);
    report(
        10,
        "sweep sanity",
        same(alpha0) && same(n0) && best.ndcg_at_10 > alpha0.ndcg_at_10,
        format!(
            "alpha=0 equals traditional {}, n=0 equals traditional {}, ndcg@10 at alpha={PLANTED_ALPHA} {:.4} vs alpha=0 {:.4}",
            same(alpha0),
            same(n0),
            best.ndcg_at_10,
            alpha0.ndcg_at_10
        ),
    );
}

#[test]
fn criterion_11_boost_perplexity_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 400;
    let perplexity: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..80.0)).collect();
    let signal: Vec<f64> = perplexity.iter().map(|p| 0.5 - 0.01 * p).collect();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let sd = (signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let noise = Normal::new(0.0, 0.1 * sd).unwrap();
    let mut ppl = HashMap::new();
    let boosts: Vec<DocBoost> = (0..n)
        .map(|i| {
            let doc = format!("d{i}");
            ppl.insert(doc.clone(), perplexity[i]);
            DocBoost {
                query_id: format!("q{}", i % 20),
                doc_id: doc,
                boost: signal[i] + noise.sample(&mut rng),
            }
        })
        .collect();
    let r = boost_perplexity_correlation(&boosts, &ppl).unwrap();
    report(11, "boost/perplexity correlation sign", r < MAX_CORRELATION, format!("pearson r {r:.4}"));
}
