//! Python bindings: `import pysharpen`.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use pyo3::exceptions::{PyConnectionError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sharpen_core::embed::{Embedder, EmbedderConfig, TextRole};
use sharpen_core::eval::{self, Qrels};
use sharpen_core::index::{self, Index};
use sharpen_core::pipeline::{Pipeline, PipelineConfig};
use sharpen_core::querygen::{self, GeneratedQuery, QueryKind};
use sharpen_core::refsel::{self, RefSelConfig};
use sharpen_core::retrieval::{self, RankedEntry, RankedList, RetrievalConfig, RetrievalMode};
use sharpen_core::vector::{self, Embedding};
use sharpen_core::{Document, Error, ErrorClass};

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.class() {
        ErrorClass::Input => PyValueError::new_err(msg),
        ErrorClass::Remote => PyConnectionError::new_err(msg),
        ErrorClass::Internal => PyRuntimeError::new_err(msg),
    }
}

fn embedding(v: Vec<f64>) -> PyResult<Embedding> {
    Embedding::new(v).map_err(to_py)
}

fn role(s: &str) -> PyResult<TextRole> {
    match s {
        "query" => Ok(TextRole::Query),
        "document" => Ok(TextRole::Document),
        other => Err(PyValueError::new_err(format!("role must be `query` or `document`, got `{other}`"))),
    }
}

fn kind(s: &str) -> PyResult<QueryKind> {
    match s {
        "contrastive" => Ok(QueryKind::Contrastive),
        "simple" => Ok(QueryKind::Simple),
        other => Err(PyValueError::new_err(format!("kind must be `contrastive` or `simple`, got `{other}`"))),
    }
}

fn mode(s: &str) -> PyResult<RetrievalMode> {
    s.parse().map_err(to_py)
}

/// Text embedder; deterministic hashed bag-of-tokens unless configured otherwise.
#[pyclass(name = "Embedder", module = "pysharpen")]
struct PyEmbedder {
    inner: Embedder,
}

#[pymethods]
impl PyEmbedder {
    #[new]
    #[pyo3(signature = (dimension = 64, seed = 0))]
    fn new(dimension: usize, seed: u64) -> PyResult<Self> {
        let inner = Embedder::new(EmbedderConfig::deterministic(dimension, seed)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Builds an embedder from a JSON object with the config-file schema.
    #[staticmethod]
    fn from_json(config: &str) -> PyResult<Self> {
        let cfg: EmbedderConfig = serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: Embedder::new(cfg).map_err(to_py)?,
        })
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint().to_string()
    }

    #[pyo3(signature = (texts, role = "document"))]
    fn embed(&self, py: Python<'_>, texts: Vec<String>, role: &str) -> PyResult<Vec<Vec<f64>>> {
        let r = self::role(role)?;
        let out = py.detach(|| self.inner.embed_batch(&texts, r)).map_err(to_py)?;
        Ok(out.into_iter().map(Embedding::into_inner).collect())
    }
}

/// Document index with optional query metadata and sharpened embeddings.
#[pyclass(name = "Index", module = "pysharpen")]
struct PyIndex {
    inner: Index,
}

#[pymethods]
impl PyIndex {
    /// `docs` is a list of `(doc_id, text)` pairs.
    #[staticmethod]
    fn build(py: Python<'_>, docs: Vec<(String, String)>, embedder: &PyEmbedder) -> PyResult<Self> {
        let docs: Vec<Document> = docs.into_iter().map(|(id, text)| Document::new(id, text)).collect();
        let inner = py.detach(|| index::build_index(&docs, &embedder.inner)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: index::load_index(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        index::save_index(&self.inner, &path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn doc_ids(&self) -> Vec<String> {
        self.inner.records().iter().map(|r| r.doc_id.clone()).collect()
    }

    fn embedding(&self, doc_id: &str) -> PyResult<Vec<f64>> {
        self.inner
            .get(doc_id)
            .map(|r| r.embedding.to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("unknown document `{doc_id}`")))
    }

    /// Manifest as a JSON string.
    fn manifest(&self) -> String {
        serde_json::to_string(self.inner.manifest()).expect("manifest serializes")
    }

    #[getter]
    fn growth_factor(&self) -> f64 {
        self.inner.manifest().growth_factor
    }

    /// `queries` is a list of `(doc_id, text)`; ordinals follow list order per document.
    #[pyo3(signature = (queries, embedder, kind = "contrastive"))]
    fn attach_queries(&self, py: Python<'_>, queries: Vec<(String, String)>, embedder: &PyEmbedder, kind: &str) -> PyResult<Self> {
        let k = self::kind(kind)?;
        let mut next: HashMap<String, u32> = HashMap::new();
        let generated: Vec<GeneratedQuery> = queries
            .into_iter()
            .map(|(doc, text)| {
                let o = next.entry(doc.clone()).or_insert(0);
                let start = self
                    .inner
                    .get(&doc)
                    .and_then(|r| r.queries_of(k).map(|q| q.ordinal + 1).max())
                    .unwrap_or(0);
                let ordinal = start + *o;
                *o += 1;
                GeneratedQuery {
                    text,
                    source_doc_id: doc,
                    reference_doc_id: None,
                    kind: k,
                    ordinal,
                }
            })
            .collect();
        let inner = py
            .detach(|| index::attach_queries(&self.inner, &generated, &embedder.inner, k))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Index-time sharpening with the mean of each document's queries.
    #[pyo3(signature = (alpha, kind = None))]
    fn sharpen(&self, alpha: f64, kind: Option<&str>) -> PyResult<Self> {
        let k = kind.map(self::kind).transpose()?;
        Ok(Self {
            inner: index::apply_index_sharpening(&self.inner, alpha, k).map_err(to_py)?,
        })
    }

    /// Top `top_k` `(doc_id, score)` pairs for a query text.
    #[pyo3(signature = (query, embedder, mode = "traditional", alpha = 1.0, top_k = 10))]
    fn search(
        &self,
        py: Python<'_>,
        query: &str,
        embedder: &PyEmbedder,
        mode: &str,
        alpha: f64,
        top_k: usize,
    ) -> PyResult<Vec<(String, f64)>> {
        let cfg = RetrievalConfig {
            top_k,
            ..RetrievalConfig::new(self::mode(mode)?, alpha)
        };
        let r = py
            .detach(|| retrieval::retrieve_topk("q", query, &self.inner, &embedder.inner, &cfg))
            .map_err(to_py)?;
        Ok(r.ranked.entries.into_iter().map(|e| (e.doc_id, e.score)).collect())
    }

    /// Contrastive references for one document, as `(chosen_k, silhouette, reference_ids)`.
    #[pyo3(signature = (doc_id, neighborhood_size = 100, k_min = 3, k_max = 10, seed = 0))]
    fn select_references(
        &self,
        doc_id: &str,
        neighborhood_size: usize,
        k_min: usize,
        k_max: usize,
        seed: u64,
    ) -> PyResult<(usize, Option<f64>, Vec<String>)> {
        let cfg = RefSelConfig {
            neighborhood_size,
            k_min,
            k_max,
            seed,
            ..RefSelConfig::default()
        };
        let r = refsel::select_references(doc_id, &self.inner, &cfg).map_err(to_py)?;
        Ok((r.chosen_k, r.silhouette, r.reference_ids))
    }
}

#[pyfunction]
fn cosine_similarity(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    vector::cosine_similarity(&embedding(a)?, &embedding(b)?).map_err(to_py)
}

/// Softmax-weighted combination of `queries` by similarity to `q`.
#[pyfunction]
fn aggregate(q: Vec<f64>, queries: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let qs: Vec<Embedding> = queries.into_iter().map(embedding).collect::<PyResult<_>>()?;
    let refs: Vec<&Embedding> = qs.iter().collect();
    Ok(retrieval::aggregate_g(&embedding(q)?, &refs).map_err(to_py)?.into_inner())
}

/// `(plan, query)` pairs parsed from LM output.
#[pyfunction]
fn parse_generation(raw: &str) -> Vec<(String, String)> {
    querygen::parse_generation(raw)
        .queries
        .into_iter()
        .map(|p| (p.plan, p.query))
        .collect()
}

fn one_query(ranking: Vec<String>, grades: BTreeMap<String, u32>) -> (RankedList, Qrels) {
    let n = ranking.len();
    let list = RankedList {
        query_id: "q".into(),
        entries: ranking
            .into_iter()
            .enumerate()
            .map(|(i, doc_id)| RankedEntry {
                doc_id,
                score: (n - i) as f64,
            })
            .collect(),
    };
    let mut map = BTreeMap::new();
    map.insert("q".to_string(), grades);
    (list, Qrels::from_map(map))
}

/// NDCG@k of a ranking against `{doc_id: grade}`; None when nothing is relevant.
#[pyfunction]
#[pyo3(signature = (ranking, grades, k = 10))]
fn ndcg_at_k(ranking: Vec<String>, grades: BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let (l, q) = one_query(ranking, grades);
    eval::ndcg_at_k(&l, &q, k)
}

#[pyfunction]
#[pyo3(signature = (ranking, grades, k = 50))]
fn recall_at_k(ranking: Vec<String>, grades: BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let (l, q) = one_query(ranking, grades);
    eval::recall_at_k(&l, &q, k)
}

#[pyfunction]
#[pyo3(signature = (ranking, grades, k = 50))]
fn map_at_k(ranking: Vec<String>, grades: BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let (l, q) = one_query(ranking, grades);
    eval::map_at_k(&l, &q, k)
}

#[pyfunction]
fn pearson(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    eval::pearson(&xs, &ys).map_err(to_py)
}

/// Runs the full pipeline from a config file; returns the metrics report
/// as a JSON string, or None when no qrels are configured.
#[pyfunction]
#[pyo3(signature = (config_path, workdir = None))]
fn run_pipeline(py: Python<'_>, config_path: PathBuf, workdir: Option<PathBuf>) -> PyResult<Option<String>> {
    let mut cfg = PipelineConfig::load(&config_path).map_err(to_py)?;
    if let Some(w) = workdir {
        cfg.paths.workdir = w;
    }
    py.detach(|| {
        let p = Pipeline::new(cfg)?;
        let _lock = p.workdir().lock()?;
        p.run_all()?.map(|r| r.to_json()).transpose()
    })
    .map_err(to_py)
}

#[pymodule]
pub fn pysharpen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmbedder>()?;
    m.add_class::<PyIndex>()?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_generation, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(map_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
