//! Batch stages over a working directory. Each stage reads the outputs of
//! its predecessor from the workdir and writes its own:
//!
//! ```text
//! index/            embed
//! refs.jsonl        select-refs
//! queries.jsonl     gen-queries
//! index-q/          attach
//! index-sharp/      sharpen-index
//! index-docexp/     doc-expand
//! run-<mode>.trec   search
//! metrics-<mode>.json, sweep.csv, warnings/<stage>.jsonl
//! ```

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus, load_qrels, load_queries, Corpus};
use crate::embed::{Embedder, EmbedderConfig, EmbedderKind, TextRole};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, sweep, MetricsReport, Qrels, SweepAxis, SweepTable};
use crate::index::{
    apply_index_sharpening, attach_queries, build_index, default_sharpening_kind, expand_corpus, load_index_for,
    save_index, save_vectors_binary, Index, IndexManifest, MANIFEST_FILE, VECTORS_FILE,
};
use crate::io::{read_jsonl, write_bytes, write_jsonl};
use crate::querygen::{
    generate_contrastive, generate_simple, language_model, GeneratedQuery, GenerationIssue, LmConfig, LmKind,
    PromptBundle, QueryKind,
};
use crate::refsel::{select_all_references, RefSelConfig, ReferenceSet};
use crate::retrieval::{rank, read_trec_run, write_trec_run, RankedList, RetrievalConfig, RetrievalMode, Retriever};
use crate::vector::Embedding;
use crate::workers::ordered_map;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub workdir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub alphas: Vec<f64>,
    pub n_values: Vec<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0],
            n_values: vec![0, 1, 2, 4, 8],
        }
    }
}

/// Everything one experiment needs, read from a single JSON file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub embedder: EmbedderConfig,
    pub lm: LmConfig,
    pub refsel: RefSelConfig,
    pub retrieval: RetrievalConfig,
    pub prompt: PromptBundle,
    /// Seeds reference selection.
    pub seed: u64,
    /// Per-document cap on query metadata used by sharpening (first n by ordinal).
    pub n_queries: Option<usize>,
    /// Overrides the in-flight limit of the embedder and LM clients.
    pub workers: Option<usize>,
    pub sweep: SweepSettings,
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = crate::io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.workdir);
        self.paths.queries.iter_mut().for_each(fix);
        self.paths.qrels.iter_mut().for_each(fix);
        self.lm.fixtures_dir.iter_mut().for_each(fix);
        if let Some(r) = self.retrieval.refiner.as_mut() {
            r.lm.fixtures_dir.iter_mut().for_each(fix);
        }
    }

    /// Hex sha256 of the config with paths blanked, so the same experiment
    /// run from different directories has the same digest.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        c.lm.fixtures_dir = None;
        if let Some(r) = c.retrieval.refiner.as_mut() {
            r.lm.fixtures_dir = None;
        }
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    pub fn effective_embedder(&self) -> EmbedderConfig {
        let mut e = self.embedder.clone();
        if let Some(w) = self.workers {
            e.parallelism = w;
        }
        e
    }

    pub fn effective_lm(&self) -> LmConfig {
        let mut l = self.lm.clone();
        if let Some(w) = self.workers {
            l.parallelism = w;
        }
        l
    }

    pub fn effective_refsel(&self) -> RefSelConfig {
        RefSelConfig {
            seed: self.seed,
            ..self.refsel.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.workdir.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("paths.workdir is not set".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        self.embedder.validate()?;
        self.refsel.validate()?;
        self.retrieval.validate()?;
        let mut envs = Vec::new();
        if self.embedder.kind == EmbedderKind::Remote {
            envs.extend(self.embedder.auth_token_env.as_deref());
        }
        if self.lm.kind == LmKind::Remote {
            envs.extend(self.lm.auth_token_env.as_deref());
        }
        if let Some(r) = &self.retrieval.refiner {
            if r.lm.kind == LmKind::Remote {
                envs.extend(r.lm.auth_token_env.as_deref());
            }
        }
        for name in envs.into_iter().filter(|n| !n.is_empty()) {
            if std::env::var_os(name).is_none() {
                return Err(Error::InvalidConfig(format!("environment variable {name} is not set")));
            }
        }
        Ok(())
    }
}

/// File layout of a working directory.
#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index_dir(&self) -> PathBuf {
        self.root.join("index")
    }

    pub fn index_q_dir(&self) -> PathBuf {
        self.root.join("index-q")
    }

    pub fn index_sharp_dir(&self) -> PathBuf {
        self.root.join("index-sharp")
    }

    pub fn index_docexp_dir(&self) -> PathBuf {
        self.root.join("index-docexp")
    }

    /// The index a retrieval mode searches.
    pub fn index_dir_for(&self, mode: RetrievalMode) -> PathBuf {
        match mode {
            RetrievalMode::Traditional => self.index_dir(),
            RetrievalMode::SimSharp | RetrievalMode::ConSharp => self.index_q_dir(),
            RetrievalMode::IndexSharp => self.index_sharp_dir(),
            RetrievalMode::DocExpanded => self.index_docexp_dir(),
        }
    }

    pub fn refs_path(&self) -> PathBuf {
        self.root.join("refs.jsonl")
    }

    pub fn queries_path(&self) -> PathBuf {
        self.root.join("queries.jsonl")
    }

    pub fn run_path(&self, mode: RetrievalMode) -> PathBuf {
        self.root.join(format!("run-{mode}.trec"))
    }

    pub fn metrics_path(&self, mode: RetrievalMode) -> PathBuf {
        self.root.join(format!("metrics-{mode}.json"))
    }

    pub fn sweep_path(&self) -> PathBuf {
        self.root.join("sweep.csv")
    }

    pub fn sweep_plot_path(&self, axis: SweepAxis) -> PathBuf {
        self.root.join(match axis {
            SweepAxis::Alpha => "sweep-alpha.svg",
            SweepAxis::NQueries => "sweep-n.svg",
        })
    }

    pub fn warnings_path(&self, stage: &str) -> PathBuf {
        self.root.join("warnings").join(format!("{stage}.jsonl"))
    }

    /// Takes the single-writer lock, creating the workdir if needed.
    pub fn lock(&self) -> Result<WorkdirLock> {
        std::fs::create_dir_all(&self.root)
            .map_err(|e| Error::io(format!("creating workdir {}", self.root.display()), e))?;
        let path = self.root.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkdirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::WorkdirLocked(path)),
            Err(e) => Err(Error::io(format!("creating {}", path.display()), e)),
        }
    }
}

/// Removes the lock file on drop.
#[derive(Debug)]
pub struct WorkdirLock {
    path: PathBuf,
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// One machine-readable line of a warnings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub doc_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_doc_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub query_id: Option<String>,
    pub message: String,
}

impl From<GenerationIssue> for Warning {
    fn from(i: GenerationIssue) -> Self {
        Warning {
            kind: i.kind,
            doc_id: Some(i.source_doc_id),
            reference_doc_id: i.reference_doc_id,
            query_id: None,
            message: i.message,
        }
    }
}

/// Counts reported by the query-generation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationSummary {
    pub documents: usize,
    pub queries: usize,
    pub issues: usize,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    wd: Workdir,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let wd = Workdir::new(&cfg.paths.workdir);
        Ok(Self { cfg, wd })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn workdir(&self) -> &Workdir {
        &self.wd
    }

    fn embedder(&self) -> Result<Embedder> {
        Embedder::new(self.cfg.effective_embedder())
    }

    fn load(&self, dir: &Path, embedder: &Embedder) -> Result<Index> {
        if !dir.join(MANIFEST_FILE).exists() {
            return Err(Error::MissingArtifact {
                what: "index",
                path: dir.to_path_buf(),
            });
        }
        load_index_for(dir, &embedder.fingerprint())
    }

    fn save(&self, mut index: Index, dir: &Path) -> Result<IndexManifest> {
        index.set_pipeline_config_digest(self.cfg.digest());
        save_index(&index, dir)?;
        Ok(index.manifest().clone())
    }

    fn warn(&self, stage: &str, warnings: &[Warning]) -> Result<()> {
        for w in warnings {
            log::warn!("{stage}: {} {}", w.kind, w.message);
        }
        write_jsonl(&self.wd.warnings_path(stage), warnings)
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, field: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::InvalidConfig(format!("paths.{field} is not set")))
    }

    fn read_artifact<T: serde::de::DeserializeOwned>(&self, path: PathBuf, what: &'static str) -> Result<Vec<T>> {
        if !path.exists() {
            return Err(Error::MissingArtifact { what, path });
        }
        read_jsonl(&path)
    }

    /// Embeds the corpus into `index/`.
    pub fn embed(&self) -> Result<IndexManifest> {
        let docs = load_corpus(&self.cfg.paths.corpus)?;
        log::info!("embedding {} documents", docs.len());
        let index = build_index(&docs, &self.embedder()?)?;
        let manifest = self.save(index.clone(), &self.wd.index_dir())?;
        save_vectors_binary(&index, &self.wd.index_dir().join(VECTORS_FILE))?;
        Ok(manifest)
    }

    /// Chooses contrastive references for every document.
    pub fn select_refs(&self) -> Result<Vec<ReferenceSet>> {
        let index = self.load(&self.wd.index_dir(), &self.embedder()?)?;
        let refs = select_all_references(&index, &self.cfg.effective_refsel())?;
        let warnings: Vec<Warning> = refs
            .iter()
            .filter(|r| r.reference_ids.is_empty())
            .map(|r| Warning {
                kind: "no-references".into(),
                doc_id: Some(r.doc_id.clone()),
                reference_doc_id: None,
                query_id: None,
                message: "document has no neighbours to contrast with".into(),
            })
            .collect();
        write_jsonl(&self.wd.refs_path(), &refs)?;
        self.warn("select-refs", &warnings)?;
        Ok(refs)
    }

    /// Generates queries of `kind` for every document and merges them into
    /// `queries.jsonl`, replacing earlier queries of the same kind.
    pub fn gen_queries(&self, kind: QueryKind) -> Result<GenerationSummary> {
        self.cfg.prompt.validate()?;
        let lm = self.cfg.effective_lm();
        let index = self.load(&self.wd.index_dir(), &self.embedder()?)?;
        let corpus = Corpus::new(index.documents())?;
        let model = language_model(&lm)?;

        let (outcomes, calls) = match kind {
            QueryKind::Contrastive => {
                let refs: Vec<ReferenceSet> = self.read_artifact(self.wd.refs_path(), "reference sets")?;
                let by_doc: HashMap<&str, &ReferenceSet> = refs.iter().map(|r| (r.doc_id.as_str(), r)).collect();
                let mut outcomes = Vec::with_capacity(corpus.len());
                let mut calls = 0;
                for d in corpus.documents() {
                    let empty = ReferenceSet {
                        doc_id: d.id.clone(),
                        chosen_k: 0,
                        silhouette: None,
                        reference_ids: Vec::new(),
                    };
                    let r = by_doc.get(d.id.as_str()).copied().unwrap_or(&empty);
                    calls += r.reference_ids.len();
                    outcomes.push(generate_contrastive(d, r, &corpus, model.as_ref(), &lm, &self.cfg.prompt)?);
                }
                (outcomes, calls)
            }
            QueryKind::Simple => {
                let docs = corpus.documents();
                let results = ordered_map(docs, lm.parallelism, |_, d| {
                    generate_simple(d, model.as_ref(), &lm, &self.cfg.prompt)
                });
                let mut outcomes = Vec::with_capacity(docs.len());
                for (d, r) in docs.iter().zip(results) {
                    outcomes.push(match r {
                        Ok(o) => o,
                        Err(e) if e.class() == crate::error::ErrorClass::Remote => crate::querygen::GenerationOutcome {
                            queries: Vec::new(),
                            issues: vec![
                                GenerationIssue {
                                    source_doc_id: d.id.clone(),
                                    reference_doc_id: None,
                                    kind: "lm-failure".into(),
                                    message: e.to_string(),
                                },
                                GenerationIssue {
                                    source_doc_id: d.id.clone(),
                                    reference_doc_id: None,
                                    kind: "no-queries".into(),
                                    message: "document has no simple queries".into(),
                                },
                            ],
                        },
                        Err(e) => return Err(e.context(format!("document `{}`", d.id))),
                    });
                }
                (outcomes, docs.len())
            }
        };

        let issues: Vec<GenerationIssue> = outcomes.iter().flat_map(|o| o.issues.iter().cloned()).collect();
        let failures: Vec<&GenerationIssue> = issues.iter().filter(|i| i.kind == "lm-failure").collect();
        if calls > 0 && failures.len() == calls {
            return Err(Error::LmUnavailable(format!(
                "all {calls} language-model call(s) failed; first: {}",
                failures[0].message
            )));
        }

        let fresh: Vec<GeneratedQuery> = outcomes.into_iter().flat_map(|o| o.queries).collect();
        let generated = fresh.len();
        let path = self.wd.queries_path();
        let mut all: Vec<GeneratedQuery> = if path.exists() { read_jsonl(&path)? } else { Vec::new() };
        all.retain(|q| q.kind != kind);
        all.extend(fresh);
        let position: HashMap<&str, usize> =
            corpus.documents().iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
        all.sort_by_key(|q| (q.kind, position.get(q.source_doc_id.as_str()).copied(), q.ordinal));
        write_jsonl(&path, &all)?;

        let warnings: Vec<Warning> = issues.into_iter().map(Warning::from).collect();
        self.warn(&format!("gen-queries-{kind}"), &warnings)?;
        Ok(GenerationSummary {
            documents: corpus.len(),
            queries: generated,
            issues: warnings.len(),
        })
    }

    /// Embeds generated queries and attaches them to `index/`, writing `index-q/`.
    pub fn attach(&self) -> Result<IndexManifest> {
        let embedder = self.embedder()?;
        let mut index = self.load(&self.wd.index_dir(), &embedder)?;
        let queries: Vec<GeneratedQuery> = self.read_artifact(self.wd.queries_path(), "generated queries")?;
        for kind in [QueryKind::Contrastive, QueryKind::Simple] {
            if queries.iter().any(|q| q.kind == kind) {
                index = attach_queries(&index, &queries, &embedder, kind)?;
            }
        }
        let warnings: Vec<Warning> = index
            .records()
            .iter()
            .filter(|r| r.queries.is_empty())
            .map(|r| Warning {
                kind: "no-metadata".into(),
                doc_id: Some(r.doc_id.clone()),
                reference_doc_id: None,
                query_id: None,
                message: "no queries attached; sharpened modes score this document traditionally".into(),
            })
            .collect();
        self.warn("attach", &warnings)?;
        self.save(index, &self.wd.index_q_dir())
    }

    /// Precomputes index-time sharpened embeddings into `index-sharp/`.
    pub fn sharpen_index(&self) -> Result<IndexManifest> {
        let mut index = self.load(&self.wd.index_q_dir(), &self.embedder()?)?;
        if let Some(n) = self.cfg.n_queries {
            index = index.truncate_queries(n);
        }
        let kind = default_sharpening_kind(&index);
        let sharpened = apply_index_sharpening(&index, self.cfg.retrieval.alpha, kind)?;
        self.save(sharpened, &self.wd.index_sharp_dir())
    }

    /// Re-embeds documents with their generated queries of `kind` appended.
    pub fn doc_expand(&self, kind: QueryKind) -> Result<IndexManifest> {
        let embedder = self.embedder()?;
        let index = self.load(&self.wd.index_dir(), &embedder)?;
        let queries: Vec<GeneratedQuery> = self.read_artifact(self.wd.queries_path(), "generated queries")?;
        let expanded = expand_corpus(&index.documents(), &queries, kind)?;
        let out = build_index(&expanded, &embedder)?;
        self.save(out, &self.wd.index_docexp_dir())
    }

    fn search_index(&self, embedder: &Embedder) -> Result<Index> {
        let mode = self.cfg.retrieval.mode;
        let mut index = self.load(&self.wd.index_dir_for(mode), embedder)?;
        if let (Some(n), Some(_)) = (self.cfg.n_queries, mode.metadata_kind()) {
            index = index.truncate_queries(n);
        }
        Ok(index)
    }

    fn embedded_queries(&self, embedder: &Embedder) -> Result<Vec<(String, String, Embedding)>> {
        let queries = load_queries(self.require(&self.cfg.paths.queries, "queries")?)?;
        if queries.is_empty() {
            return Err(Error::EmptyInput("query file has no queries"));
        }
        let texts: Vec<&str> = queries.iter().map(|q| q.text.as_str()).collect();
        let embeddings = embedder.embed_batch(&texts, TextRole::Query)?;
        Ok(queries
            .into_iter()
            .zip(embeddings)
            .map(|(q, e)| (q.id, q.text, e))
            .collect())
    }

    /// Ranks every inference query and writes `run-<mode>.trec`.
    pub fn search(&self) -> Result<Vec<RankedList>> {
        let embedder = self.embedder()?;
        let index = self.search_index(&embedder)?;
        let cfg = &self.cfg.retrieval;
        let queries = self.embedded_queries(&embedder)?;
        let mut warnings = Vec::new();
        let lists: Vec<RankedList> = if cfg.refiner.is_some() {
            let retriever = Retriever::new(&index, &embedder, cfg.clone())?;
            let mut lists = Vec::with_capacity(queries.len());
            for (qid, text, _) in &queries {
                let r = retriever.retrieve(qid, text)?;
                warnings.extend(r.warnings.into_iter().map(|message| Warning {
                    kind: "refinement".into(),
                    doc_id: None,
                    reference_doc_id: None,
                    query_id: Some(qid.clone()),
                    message,
                }));
                lists.push(r.ranked);
            }
            lists
        } else {
            queries
                .par_iter()
                .map(|(qid, _, q)| rank(qid, q, &index, cfg, None))
                .collect::<Result<_>>()?
        };
        write_trec_run(&self.wd.run_path(cfg.mode), &lists, cfg.mode.as_str())?;
        self.warn("search", &warnings)?;
        Ok(lists)
    }

    fn qrels(&self) -> Result<Qrels> {
        load_qrels(self.require(&self.cfg.paths.qrels, "qrels")?)
    }

    /// Scores `run-<mode>.trec` against the qrels into `metrics-<mode>.json`.
    pub fn eval(&self) -> Result<MetricsReport> {
        let mode = self.cfg.retrieval.mode;
        let path = self.wd.run_path(mode);
        if !path.exists() {
            return Err(Error::MissingArtifact { what: "run", path });
        }
        let run = read_trec_run(&path)?;
        let report = evaluate_run(&run, &self.qrels()?)?;
        write_bytes(&self.wd.metrics_path(mode), report.to_json()?.as_bytes())?;
        let warnings: Vec<Warning> = report
            .skipped
            .iter()
            .map(|q| Warning {
                kind: "unjudged-query".into(),
                doc_id: None,
                reference_doc_id: None,
                query_id: Some(q.clone()),
                message: "query has no relevant judgment and is excluded from the averages".into(),
            })
            .collect();
        self.warn("eval", &warnings)?;
        Ok(report)
    }

    /// Sweeps α and the per-document query budget; writes `sweep.csv` and plots.
    pub fn sweep(&self) -> Result<SweepTable> {
        let embedder = self.embedder()?;
        let mode = self.cfg.retrieval.mode;
        let dir = match mode {
            RetrievalMode::IndexSharp => self.wd.index_q_dir(),
            m => self.wd.index_dir_for(m),
        };
        let index = self.load(&dir, &embedder)?;
        let queries: Vec<(String, Embedding)> = self
            .embedded_queries(&embedder)?
            .into_iter()
            .map(|(id, _, e)| (id, e))
            .collect();
        let table = sweep(
            &index,
            &queries,
            &self.qrels()?,
            &self.cfg.sweep.alphas,
            &self.cfg.sweep.n_values,
            &self.cfg.retrieval,
        )?;
        table.write_csv(&self.wd.sweep_path())?;
        for axis in [SweepAxis::Alpha, SweepAxis::NQueries] {
            if let Some(svg) = table.to_svg(axis) {
                write_bytes(&self.wd.sweep_plot_path(axis), svg.as_bytes())?;
            }
        }
        Ok(table)
    }

    /// Runs every stage the configured retrieval mode needs, then search,
    /// and evaluation when qrels are configured.
    pub fn run_all(&self) -> Result<Option<MetricsReport>> {
        let mode = self.cfg.retrieval.mode;
        self.embed()?;
        let contrastive = matches!(mode, RetrievalMode::ConSharp | RetrievalMode::IndexSharp);
        let simple = matches!(mode, RetrievalMode::SimSharp | RetrievalMode::DocExpanded);
        if contrastive {
            self.select_refs()?;
            self.gen_queries(QueryKind::Contrastive)?;
        }
        if simple {
            self.gen_queries(QueryKind::Simple)?;
        }
        if contrastive || mode == RetrievalMode::SimSharp {
            self.attach()?;
        }
        match mode {
            RetrievalMode::IndexSharp => {
                self.sharpen_index()?;
            }
            RetrievalMode::DocExpanded => {
                self.doc_expand(QueryKind::Simple)?;
            }
            _ => {}
        }
        self.search()?;
        if self.cfg.paths.qrels.is_none() {
            return Ok(None);
        }
        let report = self.eval()?;
        if !self.cfg.sweep.alphas.is_empty() || !self.cfg.sweep.n_values.is_empty() {
            self.sweep()?;
        }
        Ok(Some(report))
    }
}
