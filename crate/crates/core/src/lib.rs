//! Dense retrieval with contrastive-query sharpening of document embeddings.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
mod http;
pub mod index;
pub mod io;
pub mod pipeline;
pub mod querygen;
pub mod refsel;
pub mod retrieval;
pub mod vector;
pub mod workers;

pub use corpus::{load_corpus, load_qrels, load_queries, Corpus, Document, InferenceQuery};
pub use embed::{Embedder, EmbedderConfig, EmbedderFingerprint, EmbedderKind, TextRole};
pub use error::{Error, ErrorClass, Result};
pub use eval::{evaluate_run, pearson, sweep, MetricsReport, Qrels, SweepTable};
pub use index::{apply_index_sharpening, attach_queries, build_index, load_index, save_index, Index, IndexRecord};
pub use querygen::{GeneratedQuery, LanguageModel, LmConfig, PromptBundle, QueryKind};
pub use refsel::{select_references, RefSelConfig, ReferenceSet};
pub use retrieval::{rank, score, RankedList, RetrievalConfig, RetrievalMode};
pub use vector::{cosine_similarity, Embedding};
