//! Text-to-vector providers: a remote embedding-service client and a
//! deterministic hashed bag-of-tokens embedder for offline runs.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{self, RetryPolicy};
use crate::vector::{l2_normalize, Embedding};
use crate::workers::ordered_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    Remote,
    DeterministicTest,
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedderKind::Remote => "remote",
            EmbedderKind::DeterministicTest => "deterministic-test",
        })
    }
}

/// Whether a text is embedded as a query or as a document. Some retrievers
/// expect a role-specific instruction prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextRole {
    Query,
    Document,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub endpoint: Option<String>,
    pub model_id: String,
    pub dimension: usize,
    pub batch_size: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: Option<String>,
    /// Maximum number of in-flight remote requests.
    pub parallelism: usize,
    pub backoff_base_ms: u64,
    pub query_prefix: String,
    pub document_prefix: String,
    /// Hash seed for the deterministic embedder.
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::DeterministicTest,
            endpoint: None,
            model_id: "hashed-bag-of-tokens".into(),
            dimension: 64,
            batch_size: 32,
            timeout_ms: 30_000,
            max_retries: 3,
            auth_token_env: None,
            parallelism: 4,
            backoff_base_ms: 1_000,
            query_prefix: String::new(),
            document_prefix: String::new(),
            seed: 0,
        }
    }
}

impl EmbedderConfig {
    pub fn deterministic(dimension: usize, seed: u64) -> Self {
        Self {
            dimension,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidConfig("embedder dimension must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("embedder batch_size must be >= 1".into()));
        }
        if self.kind == EmbedderKind::Remote
            && self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty())
        {
            return Err(Error::InvalidConfig("remote embedder requires an endpoint".into()));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> EmbedderFingerprint {
        EmbedderFingerprint {
            kind: self.kind,
            // hashed spaces with different seeds are incompatible
            model_id: match self.kind {
                EmbedderKind::DeterministicTest => format!("{}#seed={}", self.model_id, self.seed),
                EmbedderKind::Remote => self.model_id.clone(),
            },
            dimension: self.dimension,
        }
    }
}

/// Identity stamp of the embedder that produced an index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderFingerprint {
    pub kind: EmbedderKind,
    pub model_id: String,
    pub dimension: usize,
}

impl fmt::Display for EmbedderFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind, self.model_id, self.dimension)
    }
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the seed's little-endian bytes followed by the token bytes,
/// finished with the splitmix64 mixer.
pub fn token_hash(token: &str, seed: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Hashed bag-of-tokens embedding: each token adds ±1 at a hashed slot, and
/// the accumulation is normalized to unit length.
pub fn deterministic_embed(text: &str, m: usize, seed: u64) -> Result<Embedding> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText(0));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    let mut acc = vec![0.0f64; m];
    for token in tokenize(text) {
        let h = token_hash(&token, seed);
        let slot = (h % m as u64) as usize;
        acc[slot] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
    if acc.iter().all(|&v| v == 0.0) {
        acc[0] = 1.0;
    }
    l2_normalize(&Embedding::new(acc)?)
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

/// A configured embedder. Cheap to share across threads.
pub struct Embedder {
    cfg: EmbedderConfig,
    agent: Option<ureq::Agent>,
}

impl Embedder {
    pub fn new(cfg: EmbedderConfig) -> Result<Self> {
        cfg.validate()?;
        let agent = (cfg.kind == EmbedderKind::Remote).then(|| http::agent(cfg.timeout_ms));
        Ok(Self { cfg, agent })
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.cfg
    }

    pub fn fingerprint(&self) -> EmbedderFingerprint {
        self.cfg.fingerprint()
    }

    pub fn embed_one(&self, text: &str, role: TextRole) -> Result<Embedding> {
        let mut v = self.embed_batch(&[text], role)?;
        Ok(v.remove(0))
    }

    /// One embedding per input text, in input order.
    pub fn embed_batch<S: AsRef<str> + Sync>(&self, texts: &[S], role: TextRole) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput("embed_batch"));
        }
        if let Some(i) = texts.iter().position(|t| t.as_ref().trim().is_empty()) {
            return Err(Error::EmptyText(i));
        }
        let prefix = match role {
            TextRole::Query => &self.cfg.query_prefix,
            TextRole::Document => &self.cfg.document_prefix,
        };
        let prepared: Vec<String> = texts.iter().map(|t| format!("{prefix}{}", t.as_ref())).collect();
        match self.cfg.kind {
            EmbedderKind::DeterministicTest => prepared
                .iter()
                .map(|t| deterministic_embed(t, self.cfg.dimension, self.cfg.seed))
                .collect(),
            EmbedderKind::Remote => self.embed_remote(&prepared),
        }
    }

    fn embed_remote(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        let agent = self.agent.as_ref().expect("remote embedder has an agent");
        let endpoint = self.cfg.endpoint.as_deref().unwrap_or_default();
        let token = http::bearer_token(self.cfg.auth_token_env.as_deref())?;
        let policy = RetryPolicy {
            max_retries: self.cfg.max_retries,
            backoff_base: Duration::from_millis(self.cfg.backoff_base_ms),
        };
        let batches: Vec<&[String]> = texts.chunks(self.cfg.batch_size).collect();
        let results = ordered_map(&batches, self.cfg.parallelism, |_, batch| {
            let body = EmbeddingRequest {
                model: &self.cfg.model_id,
                input: batch,
            };
            let resp: EmbeddingResponse = http::post_json(agent, endpoint, token.as_deref(), &body, &policy)?;
            self.assemble(resp, batch.len())
        });
        let mut out = Vec::with_capacity(texts.len());
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }

    fn assemble(&self, resp: EmbeddingResponse, expected: usize) -> Result<Vec<Embedding>> {
        if resp.data.len() != expected {
            return Err(Error::MalformedResponse(format!(
                "expected {expected} embeddings, got {}",
                resp.data.len()
            )));
        }
        let mut slots: Vec<Option<Embedding>> = vec![None; expected];
        for datum in resp.data {
            if datum.embedding.len() != self.cfg.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.cfg.dimension,
                    actual: datum.embedding.len(),
                });
            }
            let slot = slots
                .get_mut(datum.index)
                .ok_or_else(|| Error::MalformedResponse(format!("index {} out of range", datum.index)))?;
            *slot = Some(Embedding::new(datum.embedding)?);
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::MalformedResponse(format!("missing embedding {i}"))))
            .collect()
    }
}

/// Embeds `texts` as documents under `cfg`.
pub fn embed_batch<S: AsRef<str> + Sync>(texts: &[S], cfg: &EmbedderConfig) -> Result<Vec<Embedding>> {
    Embedder::new(cfg.clone())?.embed_batch(texts, TextRole::Document)
}
