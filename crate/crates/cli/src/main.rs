use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use sharpen_core::pipeline::{Pipeline, PipelineConfig};
use sharpen_core::{Error, ErrorClass, QueryKind, RetrievalMode};

/// Zero-shot dense retrieval with query-sharpened document embeddings.
#[derive(Debug, Parser)]
#[command(name = "sharpen", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags take precedence over the config file, which takes precedence over defaults.
#[derive(Debug, Args)]
struct Overrides {
    /// JSON pipeline config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<RetrievalMode>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Per-document cap on query metadata used for sharpening.
    #[arg(long, global = true)]
    n_queries: Option<usize>,
    /// Concurrent embedding / LM requests.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    queries: Option<PathBuf>,
    #[arg(long, global = true)]
    qrels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Contrastive,
    Simple,
}

impl From<Kind> for QueryKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Contrastive => QueryKind::Contrastive,
            Kind::Simple => QueryKind::Simple,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embed the corpus into <workdir>/index.
    Embed,
    /// Pick contrastive references for every document.
    SelectRefs,
    /// Generate queries with the configured language model.
    GenQueries {
        #[arg(long, value_enum, default_value = "contrastive")]
        kind: Kind,
    },
    /// Embed generated queries and attach them to the index.
    Attach,
    /// Precompute index-time sharpened embeddings.
    SharpenIndex,
    /// Re-embed documents with generated queries appended.
    DocExpand {
        #[arg(long, value_enum, default_value = "simple")]
        kind: Kind,
    },
    /// Rank the inference queries and write a TREC run.
    Search,
    /// Score the run against the qrels.
    Eval,
    /// Sweep alpha and the number of queries per document.
    Sweep {
        /// Comma-separated alpha values.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Comma-separated query budgets.
        #[arg(long, value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
    },
    /// Run every stage the configured mode needs, then search and eval.
    Pipeline,
}

fn parse_mode(s: &str) -> Result<RetrievalMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(o: &Overrides) -> sharpen_core::Result<PipelineConfig> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.alpha {
        cfg.retrieval.alpha = v;
    }
    if let Some(v) = o.mode {
        cfg.retrieval.mode = v;
    }
    if let Some(v) = o.top_k {
        cfg.retrieval.top_k = v;
    }
    if let Some(v) = o.n_queries {
        cfg.n_queries = Some(v);
    }
    if let Some(v) = o.workers {
        cfg.workers = Some(v);
    }
    if let Some(v) = &o.workdir {
        cfg.paths.workdir = v.clone();
    }
    if let Some(v) = &o.corpus {
        cfg.paths.corpus = v.clone();
    }
    if let Some(v) = &o.queries {
        cfg.paths.queries = Some(v.clone());
    }
    if let Some(v) = &o.qrels {
        cfg.paths.qrels = Some(v.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> sharpen_core::Result<()> {
    let mut cfg = load_config(&cli.overrides)?;
    if let Command::Sweep { alphas, n_values } = &cli.command {
        if let Some(a) = alphas {
            cfg.sweep.alphas = a.clone();
        }
        if let Some(n) = n_values {
            cfg.sweep.n_values = n.clone();
        }
    }
    let p = Pipeline::new(cfg)?;
    let _lock = p.workdir().lock()?;
    let wd = p.workdir();
    let mode = p.config().retrieval.mode;
    match cli.command {
        Command::Embed => {
            let m = p.embed()?;
            info!("embedded {} documents into {}", m.doc_count, wd.index_dir().display());
        }
        Command::SelectRefs => {
            let refs = p.select_refs()?;
            info!("selected references for {} documents", refs.len());
        }
        Command::GenQueries { kind } => {
            let s = p.gen_queries(kind.into())?;
            info!(
                "generated {} queries for {} documents ({} warnings)",
                s.queries, s.documents, s.issues
            );
        }
        Command::Attach => {
            let m = p.attach()?;
            info!("attached {} queries (growth factor {})", m.total_query_count, m.growth_factor);
        }
        Command::SharpenIndex => {
            p.sharpen_index()?;
            info!("wrote {}", wd.index_sharp_dir().display());
        }
        Command::DocExpand { kind } => {
            let m = p.doc_expand(kind.into())?;
            info!("expanded {} documents into {}", m.doc_count, wd.index_docexp_dir().display());
        }
        Command::Search => {
            let lists = p.search()?;
            info!("ranked {} queries into {}", lists.len(), wd.run_path(mode).display());
        }
        Command::Eval => print_report(&p.eval()?),
        Command::Sweep { .. } => {
            let t = p.sweep()?;
            info!("wrote {} sweep rows to {}", t.rows.len(), wd.sweep_path().display());
        }
        Command::Pipeline => {
            if let Some(r) = p.run_all()? {
                print_report(&r);
            }
        }
    }
    Ok(())
}

fn print_report(r: &sharpen_core::MetricsReport) {
    println!(
        "ndcg@10 {:.4}  recall@50 {:.4}  map@50 {:.4}  ({} queries, {} skipped)",
        r.mean.ndcg_at_10, r.mean.recall_at_50, r.mean.map_at_50, r.query_count, r.skipped_count
    );
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Input => 2,
        ErrorClass::Remote => 3,
        ErrorClass::Internal => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::LmUnavailable("x".into())), 3);
        assert_eq!(exit_code(&Error::DegenerateClustering), 4);
        assert_eq!(exit_code(&Error::DegenerateClustering.context("stage")), 4);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 3, "retrieval": {"alpha": 0.5, "top_k": 7}}"#).unwrap();
        let cli = Cli::parse_from(["sharpen", "--config", path.to_str().unwrap(), "--alpha", "2", "search"]);
        let cfg = load_config(&cli.overrides).unwrap();
        assert_eq!(cfg.retrieval.alpha, 2.0);
        assert_eq!(cfg.retrieval.top_k, 7);
        assert_eq!(cfg.seed, 3);
        let cli = Cli::parse_from(["sharpen", "search"]);
        assert_eq!(load_config(&cli.overrides).unwrap().retrieval.alpha, 1.0);
    }
}
