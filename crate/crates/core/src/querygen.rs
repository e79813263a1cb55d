//! Contrastive (many-to-many) and simple (one-to-many) query generation:
//! prompt construction, language-model clients, and output parsing.

use std::fmt;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::http::{self, RetryPolicy};
use crate::refsel::ReferenceSet;
use crate::workers::ordered_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Contrastive,
    Simple,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Contrastive => "contrastive",
            QueryKind::Simple => "simple",
        })
    }
}

/// A synthetic query and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuery {
    pub text: String,
    pub source_doc_id: String,
    pub reference_doc_id: Option<String>,
    pub kind: QueryKind,
    /// Generation order within the source document, per kind.
    pub ordinal: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmKind {
    Remote,
    CannedTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub kind: LmKind,
    pub endpoint: Option<String>,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub auth_token_env: Option<String>,
    pub backoff_base_ms: u64,
    /// Maximum number of in-flight LM calls.
    pub parallelism: usize,
    /// Optional cost cap on queries kept from a single LM call.
    pub max_queries_per_call: Option<usize>,
    /// Fixture directory for the canned LM.
    pub fixtures_dir: Option<PathBuf>,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            kind: LmKind::CannedTest,
            endpoint: None,
            model_id: "canned".into(),
            temperature: 0.7,
            max_output_tokens: 1024,
            timeout_ms: 120_000,
            max_retries: 3,
            auth_token_env: None,
            backoff_base_ms: 1_000,
            parallelism: 4,
            max_queries_per_call: None,
            fixtures_dir: None,
        }
    }
}

impl LmConfig {
    pub fn canned(dir: impl Into<PathBuf>) -> Self {
        Self {
            fixtures_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidConfig("temperature must be >= 0".into()));
        }
        match self.kind {
            LmKind::Remote if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) => {
                Err(Error::InvalidConfig("remote LM requires an endpoint".into()))
            }
            LmKind::CannedTest if self.fixtures_dir.is_none() => {
                Err(Error::InvalidConfig("canned LM requires fixtures_dir".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Text-in, text-out completion.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Hex SHA-256 of the prompt; names the canned LM's fixture files.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Answers from `<fixtures_dir>/<prompt_hash>.txt`, falling back to
/// `default.txt` when present.
pub struct CannedLm {
    dir: PathBuf,
}

impl CannedLm {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn fixture_path(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_hash(prompt)))
    }
}

impl LanguageModel for CannedLm {
    fn complete(&self, prompt: &str) -> Result<String> {
        let path = self.fixture_path(prompt);
        let fallback = self.dir.join("default.txt");
        for p in [&path, &fallback] {
            match std::fs::read_to_string(p) {
                Ok(s) => return Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(e) => return Err(Error::io(format!("reading {}", p.display()), e)),
            }
        }
        Err(Error::LmUnavailable(format!("no fixture {}", path.display())))
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatContent,
}

#[derive(Deserialize)]
struct ChatContent {
    #[serde(default)]
    content: Option<String>,
}

/// Chat-completion client.
pub struct RemoteLm {
    cfg: LmConfig,
    agent: ureq::Agent,
}

impl RemoteLm {
    pub fn new(cfg: LmConfig) -> Result<Self> {
        cfg.validate()?;
        let agent = http::agent(cfg.timeout_ms);
        Ok(Self { cfg, agent })
    }
}

impl LanguageModel for RemoteLm {
    fn complete(&self, prompt: &str) -> Result<String> {
        let token = http::bearer_token(self.cfg.auth_token_env.as_deref())?;
        let body = ChatRequest {
            model: &self.cfg.model_id,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_output_tokens,
        };
        let policy = RetryPolicy {
            max_retries: self.cfg.max_retries,
            backoff_base: Duration::from_millis(self.cfg.backoff_base_ms),
        };
        let endpoint = self.cfg.endpoint.as_deref().unwrap_or_default();
        let resp: ChatResponse = http::post_json(&self.agent, endpoint, token.as_deref(), &body, &policy)
            .map_err(|e| match e {
                Error::RemoteUnavailable { .. } => Error::LmUnavailable(e.to_string()),
                other => other,
            })?;
        resp.choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| Error::MalformedResponse("response has no choices".into()))
    }
}

pub fn language_model(cfg: &LmConfig) -> Result<Box<dyn LanguageModel>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        LmKind::Remote => Box::new(RemoteLm::new(cfg.clone())?),
        LmKind::CannedTest => Box::new(CannedLm::new(cfg.fixtures_dir.clone().unwrap_or_default())),
    })
}

/// The in-domain style exemplars and the name of the artifact to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptBundle {
    pub exemplar_queries: Vec<String>,
    /// What is being generated, e.g. "query" or "counter-argument passage".
    pub artifact_noun: String,
    /// Plural of `artifact_noun`; derived when absent.
    pub artifact_noun_plural: Option<String>,
}

impl Default for PromptBundle {
    fn default() -> Self {
        Self {
            exemplar_queries: Vec::new(),
            artifact_noun: "query".into(),
            artifact_noun_plural: None,
        }
    }
}

impl PromptBundle {
    pub fn new<S: Into<String>>(exemplars: impl IntoIterator<Item = S>) -> Result<Self> {
        let b = Self {
            exemplar_queries: exemplars.into_iter().map(Into::into).collect(),
            ..Self::default()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_noun(mut self, noun: impl Into<String>) -> Self {
        self.artifact_noun = noun.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.exemplar_queries.len() != 5 {
            return Err(Error::InvalidConfig(format!(
                "prompt bundle needs exactly 5 exemplar queries, got {}",
                self.exemplar_queries.len()
            )));
        }
        if self.artifact_noun.trim().is_empty() {
            return Err(Error::InvalidConfig("artifact_noun is empty".into()));
        }
        Ok(())
    }

    fn plural(&self) -> String {
        if let Some(p) = &self.artifact_noun_plural {
            return p.clone();
        }
        let noun = &self.artifact_noun;
        match noun.strip_suffix('y') {
            Some(stem) if !stem.ends_with(['a', 'e', 'i', 'o', 'u']) => format!("{stem}ies"),
            _ => format!("{noun}s"),
        }
    }

    fn exemplar_block(&self) -> String {
        self.exemplar_queries
            .iter()
            .map(|q| normalize_whitespace(q))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Prompt asking for queries that separate `d` from its reference `d_ref`.
pub fn build_contrastive_prompt(d: &Document, d_ref: &Document, bundle: &PromptBundle) -> String {
    let noun = &bundle.artifact_noun;
    let nouns = bundle.plural();
    format!(
        "Here are some examples of {nouns} to understand the style:\n\
         {examples}\n\
         \n\
         Given the following two documents, create a {noun} that is weakly related to both documents \
         such that document 1 is directly relevant to the {noun}, but document 2 is not. \
         Your plan should highlight the key difference between the documents that you will use.\n\
         \n\
         Document 1: {doc}\n\
         Document 2: {reference}\n\
         Return as many answers as you can, but make sure that each answer is unique and distinct. \
         Do not repeat yourself across answers, and focus on quality over quantity.\n\
         Format your answer in the following output structure:\n\
         \n\
         <PLAN>Explanation on how you will design the {noun} and why the first document is relevant to it \
         but the second is not. Also explain how you will ensure the style is similar to the style of the \
         {nouns} provided above (name the language you will use)</PLAN>\n\
         \n\
         <QUERY>text of the {noun} in the same language as the examples and document above</QUERY>\n",
        examples = bundle.exemplar_block(),
        doc = d.body(),
        reference = d_ref.body(),
    )
}

/// The contrastive prompt with the second document and the contrast clause removed.
pub fn build_simple_prompt(d: &Document, bundle: &PromptBundle) -> String {
    let noun = &bundle.artifact_noun;
    let nouns = bundle.plural();
    format!(
        "Here are some examples of {nouns} to understand the style:\n\
         {examples}\n\
         \n\
         Given the following document, create a {noun} such that the document is directly relevant to the {noun}.\n\
         \n\
         Document: {doc}\n\
         Return as many answers as you can, but make sure that each answer is unique and distinct. \
         Do not repeat yourself across answers, and focus on quality over quantity.\n\
         Format your answer in the following output structure:\n\
         \n\
         <PLAN>Explanation on how you will design the {noun} and why the document is relevant to it. \
         Also explain how you will ensure the style is similar to the style of the \
         {nouns} provided above (name the language you will use)</PLAN>\n\
         \n\
         <QUERY>text of the {noun} in the same language as the examples and document above</QUERY>\n",
        examples = bundle.exemplar_block(),
        doc = d.body(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedQuery {
    pub plan: String,
    pub query: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseWarning {
    NoQueryTags,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedGeneration {
    pub queries: Vec<ParsedQuery>,
    pub warning: Option<ParseWarning>,
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)<(PLAN|QUERY)>(.*?)</(?:PLAN|QUERY)>").expect("valid regex"))
}

/// Extracts `<QUERY>` spans, each paired with the nearest preceding
/// `<PLAN>`. Never fails; missing tags yield an empty result and a warning.
pub fn parse_generation(raw: &str) -> ParsedGeneration {
    let mut plan = String::new();
    let mut out: Vec<ParsedQuery> = Vec::new();
    let mut saw_query_tag = false;
    for cap in tag_regex().captures_iter(raw) {
        let body = normalize_whitespace(&cap[2]);
        if cap[1].eq_ignore_ascii_case("plan") {
            plan = body;
            continue;
        }
        saw_query_tag = true;
        if body.is_empty() || out.iter().any(|q| q.query == body) {
            continue;
        }
        out.push(ParsedQuery {
            plan: plan.clone(),
            query: body,
        });
    }
    let warning = (!saw_query_tag).then_some(ParseWarning::NoQueryTags);
    ParsedGeneration { queries: out, warning }
}

/// A reference (or simple-generation call) that produced nothing usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationIssue {
    pub source_doc_id: String,
    pub reference_doc_id: Option<String>,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationOutcome {
    pub queries: Vec<GeneratedQuery>,
    /// LM failures and unparseable outputs; also flags documents left with no queries.
    pub issues: Vec<GenerationIssue>,
}

impl GenerationOutcome {
    fn issue(&mut self, doc: &str, reference: Option<&str>, kind: &str, message: String) {
        self.issues.push(GenerationIssue {
            source_doc_id: doc.to_string(),
            reference_doc_id: reference.map(str::to_string),
            kind: kind.to_string(),
            message,
        });
    }
}

fn cap_queries(mut parsed: ParsedGeneration, lm: &LmConfig) -> ParsedGeneration {
    if let Some(cap) = lm.max_queries_per_call {
        parsed.queries.truncate(cap);
    }
    parsed
}

/// One LM call per contrastive reference; parsed queries concatenated in
/// reference order and de-duplicated across references.
pub fn generate_contrastive(
    d: &Document,
    refs: &ReferenceSet,
    corpus: &Corpus,
    model: &dyn LanguageModel,
    lm: &LmConfig,
    bundle: &PromptBundle,
) -> Result<GenerationOutcome> {
    bundle.validate()?;
    let references: Vec<&Document> = refs
        .reference_ids
        .iter()
        .map(|id| corpus.get(id).ok_or_else(|| Error::UnknownDocument(id.clone())))
        .collect::<Result<_>>()?;
    if let Some(r) = references.iter().find(|r| r.id == d.id) {
        return Err(Error::InvalidConfig(format!("document `{}` is its own reference", r.id)));
    }
    let responses = ordered_map(&references, lm.parallelism, |_, r| {
        model.complete(&build_contrastive_prompt(d, r, bundle))
    });

    let mut outcome = GenerationOutcome::default();
    for (reference, response) in references.iter().zip(responses) {
        let raw = match response {
            Ok(raw) => raw,
            Err(e) => {
                outcome.issue(&d.id, Some(&reference.id), "lm-failure", e.to_string());
                continue;
            }
        };
        let parsed = cap_queries(parse_generation(&raw), lm);
        if parsed.warning.is_some() {
            outcome.issue(&d.id, Some(&reference.id), "no-query-tags", "LM output has no <QUERY> tags".into());
        }
        for p in parsed.queries {
            if outcome.queries.iter().any(|q| q.text == p.query) {
                continue;
            }
            let ordinal = outcome.queries.len() as u32;
            outcome.queries.push(GeneratedQuery {
                text: p.query,
                source_doc_id: d.id.clone(),
                reference_doc_id: Some(reference.id.clone()),
                kind: QueryKind::Contrastive,
                ordinal,
            });
        }
    }
    if outcome.queries.is_empty() {
        outcome.issue(&d.id, None, "no-queries", "document has no contrastive queries".into());
    }
    Ok(outcome)
}

/// One-to-many generation from a single document.
pub fn generate_simple(
    d: &Document,
    model: &dyn LanguageModel,
    lm: &LmConfig,
    bundle: &PromptBundle,
) -> Result<GenerationOutcome> {
    bundle.validate()?;
    if d.text.trim().is_empty() {
        return Err(Error::EmptyText(0));
    }
    let raw = model.complete(&build_simple_prompt(d, bundle))?;
    let parsed = cap_queries(parse_generation(&raw), lm);
    let mut outcome = GenerationOutcome::default();
    if parsed.warning.is_some() {
        outcome.issue(&d.id, None, "no-query-tags", "LM output has no <QUERY> tags".into());
    }
    outcome.queries = parsed
        .queries
        .into_iter()
        .enumerate()
        .map(|(i, p)| GeneratedQuery {
            text: p.query,
            source_doc_id: d.id.clone(),
            reference_doc_id: None,
            kind: QueryKind::Simple,
            ordinal: i as u32,
        })
        .collect();
    if outcome.queries.is_empty() {
        outcome.issue(&d.id, None, "no-queries", "document has no simple queries".into());
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::Mutex;

    fn bundle() -> PromptBundle {
        PromptBundle::new(["q one", "q two", "q three", "q\nfour", "q five"]).unwrap()
    }

    /// Responds by looking up a substring of the prompt.
    struct ScriptedLm {
        rules: Vec<(String, String)>,
        calls: Mutex<Vec<String>>,
    }

    impl ScriptedLm {
        fn new(rules: &[(&str, &str)]) -> Self {
            Self {
                rules: rules.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
                calls: Mutex::new(Vec::new()),
            }
        }
    }

    impl LanguageModel for ScriptedLm {
        fn complete(&self, prompt: &str) -> Result<String> {
            self.calls.lock().unwrap().push(prompt.to_string());
            self.rules
                .iter()
                .find(|(k, _)| prompt.contains(&format!("Document 2: {k}")) || prompt.contains(&format!("Document: {k}")))
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::LmUnavailable("no rule".into()))
        }
    }

    fn corpus() -> Corpus {
        Corpus::new(vec![
            Document::new("d", "Statin use after diagnosis of breast cancer and survival"),
            Document::new("r1", "mushrooms and green tea"),
            Document::new("r2", "Dietary intakes of mushrooms"),
            Document::new("r3", "third reference"),
        ])
        .unwrap()
    }

    fn refs(ids: &[&str]) -> ReferenceSet {
        ReferenceSet {
            doc_id: "d".into(),
            reference_ids: ids.iter().map(|s| s.to_string()).collect(),
            chosen_k: ids.len(),
            silhouette: None,
        }
    }

    #[test]
    fn contrastive_prompt_contents() {
        let c = corpus();
        let p = build_contrastive_prompt(c.get("d").unwrap(), c.get("r1").unwrap(), &bundle());
        assert!(p.contains("Statin use after diagnosis of breast cancer and survival"));
        assert!(p.contains("mushrooms and green tea"));
        assert!(p.contains("query that is weakly related to both documents such that document 1 is directly relevant to the query, but document 2 is not"));
        let lines: Vec<&str> = p.lines().collect();
        assert_eq!(&lines[1..6], &["q one", "q two", "q three", "q four", "q five"]);
        assert_eq!(lines[6], "");
        assert!(p.contains("<PLAN>") && p.contains("</QUERY>"));
        assert_eq!(p, build_contrastive_prompt(c.get("d").unwrap(), c.get("r1").unwrap(), &bundle()));
    }

    #[test]
    fn artifact_noun_substitution() {
        let c = corpus();
        let b = bundle().with_noun("counter-argument passage");
        let p = build_contrastive_prompt(c.get("d").unwrap(), c.get("r1").unwrap(), &b);
        assert!(p.contains("create a counter-argument passage that is weakly related"));
        assert!(p.contains("examples of counter-argument passages"));
        assert!(!p.contains(" query"));
        assert!(p.contains("<QUERY>"));
    }

    #[test]
    fn simple_prompt_has_one_document() {
        let c = corpus();
        let p = build_simple_prompt(c.get("d").unwrap(), &bundle());
        assert_eq!(p.matches("Document").count(), 1);
        assert!(p.contains("create a query such that the document is directly relevant to the query"));
        assert!(!p.contains("document 2"));
    }

    #[test]
    fn bundle_requires_five_exemplars() {
        assert!(PromptBundle::new(["a", "b"]).is_err());
        assert_eq!(bundle().plural(), "queries");
    }

    #[test]
    fn parse_examples() {
        let got = parse_generation("<PLAN>p</PLAN><QUERY>statins breast cancer</QUERY>");
        assert_eq!(
            got.queries,
            vec![ParsedQuery {
                plan: "p".into(),
                query: "statins breast cancer".into()
            }]
        );
        assert_eq!(got.warning, None);

        let got = parse_generation("<QUERY> simvastatin </QUERY>\n<QUERY>simvastatin</QUERY>");
        assert_eq!(got.queries.len(), 1);
        assert_eq!(got.queries[0].plan, "");

        let got = parse_generation("no tags at all");
        assert!(got.queries.is_empty());
        assert_eq!(got.warning, Some(ParseWarning::NoQueryTags));
    }

    #[test]
    fn parse_pairs_plans_and_normalizes() {
        let raw = "<PLAN>first\nplan</PLAN>\n<QUERY>Cohort   studies\nbreast cancer</QUERY>\n\
                   <QUERY></QUERY><plan>second</plan><query>simvastatin</query>";
        let got = parse_generation(raw);
        assert_eq!(got.queries.len(), 2);
        assert_eq!(got.queries[0].plan, "first plan");
        assert_eq!(got.queries[0].query, "Cohort studies breast cancer");
        assert_eq!(got.queries[1].plan, "second");
        assert_eq!(got.warning, None);
    }

    #[test]
    fn contrastive_counts_and_ordinals() {
        let lm = ScriptedLm::new(&[
            ("mushrooms and green tea", "<QUERY>a</QUERY><QUERY>b</QUERY><QUERY>c</QUERY>"),
            ("Dietary", "<QUERY>d</QUERY><QUERY>e</QUERY><QUERY>f</QUERY>"),
            ("third", "<QUERY>g</QUERY><QUERY>h</QUERY><QUERY>i</QUERY>"),
        ]);
        let c = corpus();
        let out = generate_contrastive(
            c.get("d").unwrap(),
            &refs(&["r1", "r2", "r3"]),
            &c,
            &lm,
            &LmConfig::default(),
            &bundle(),
        )
        .unwrap();
        assert_eq!(out.queries.len(), 9);
        assert_eq!(out.queries.iter().map(|q| q.ordinal).collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
        assert_eq!(out.queries.iter().map(|q| q.text.as_str()).collect::<String>(), "abcdefghi");
        assert_eq!(out.queries[3].reference_doc_id.as_deref(), Some("r2"));
        assert!(out.issues.is_empty());
    }

    #[test]
    fn contrastive_dedups_and_records_failures() {
        let lm = ScriptedLm::new(&[
            ("mushrooms and green tea", "<QUERY>same</QUERY>"),
            ("Dietary", "<QUERY>same</QUERY><QUERY>other</QUERY>"),
        ]);
        let c = corpus();
        let out = generate_contrastive(
            c.get("d").unwrap(),
            &refs(&["r1", "r2", "r3"]),
            &c,
            &lm,
            &LmConfig::default(),
            &bundle(),
        )
        .unwrap();
        assert_eq!(out.queries.iter().map(|q| q.text.as_str()).collect::<Vec<_>>(), vec!["same", "other"]);
        assert_eq!(out.queries[0].reference_doc_id.as_deref(), Some("r1"));
        assert_eq!(out.issues.len(), 1);
        assert_eq!(out.issues[0].reference_doc_id.as_deref(), Some("r3"));
        assert_eq!(lm.calls.lock().unwrap().len(), 3);

        let missing = generate_contrastive(c.get("d").unwrap(), &refs(&["zz"]), &c, &lm, &LmConfig::default(), &bundle());
        assert!(matches!(missing, Err(Error::UnknownDocument(_))));
    }

    #[test]
    fn paper_style_fiqa_output_is_parsed() {
        let c = Corpus::new(vec![
            Document::new("fiqa1", "Just have the associate sign the back and then deposit it."),
            Document::new("fiqa2", "Lets say you owed me $123.00 an wanted to mail me a check."),
        ])
        .unwrap();
        let lm = ScriptedLm::new(&[(
            "Lets say",
            "<PLAN>Doc 1 covers third-party cheques.</PLAN>\n\
             <QUERY>How do you deposit a third-party check at a bank?</QUERY>\n\
             <QUERY>Is endorsing a check in front of a teller necessary for deposit?</QUERY>\n\
             <QUERY>Can you deposit money into someone else's account with just their account number?</QUERY>",
        )]);
        let mut r = refs(&["fiqa2"]);
        r.doc_id = "fiqa1".into();
        let out = generate_contrastive(c.get("fiqa1").unwrap(), &r, &c, &lm, &LmConfig::default(), &bundle()).unwrap();
        assert!(out.queries.iter().any(|q| q.text == "How do you deposit a third-party check at a bank?"));
        assert_eq!(out.queries.len(), 3);
    }

    #[test]
    fn simple_generation() {
        let c = corpus();
        let lm = ScriptedLm::new(&[("Statin", "<QUERY>x</QUERY><QUERY>y</QUERY>")]);
        let out = generate_simple(c.get("d").unwrap(), &lm, &LmConfig::default(), &bundle()).unwrap();
        assert_eq!(out.queries.len(), 2);
        assert!(out.queries.iter().all(|q| q.reference_doc_id.is_none() && q.kind == QueryKind::Simple));
        let empty = Document::new("e", "  ");
        assert!(matches!(
            generate_simple(&empty, &lm, &LmConfig::default(), &bundle()),
            Err(Error::EmptyText(_))
        ));
    }

    #[test]
    fn per_call_cap() {
        let c = corpus();
        let lm = ScriptedLm::new(&[("Statin", "<QUERY>x</QUERY><QUERY>y</QUERY><QUERY>z</QUERY>")]);
        let cfg = LmConfig {
            max_queries_per_call: Some(2),
            ..LmConfig::default()
        };
        let out = generate_simple(c.get("d").unwrap(), &lm, &cfg, &bundle()).unwrap();
        assert_eq!(out.queries.len(), 2);
    }

    #[test]
    fn canned_lm_reads_fixture_by_hash() {
        let dir = tempfile::tempdir().unwrap();
        let lm = CannedLm::new(dir.path());
        assert!(matches!(lm.complete("hello"), Err(Error::LmUnavailable(_))));
        std::fs::write(lm.fixture_path("hello"), "<QUERY>hi</QUERY>").unwrap();
        assert_eq!(lm.complete("hello").unwrap(), "<QUERY>hi</QUERY>");
        std::fs::write(dir.path().join("default.txt"), "fallback").unwrap();
        assert_eq!(lm.complete("other").unwrap(), "fallback");
        assert_eq!(prompt_hash("hello").len(), 64);
    }

    #[test]
    fn generated_query_jsonl_shape() {
        let q = GeneratedQuery {
            text: "t".into(),
            source_doc_id: "d".into(),
            reference_doc_id: None,
            kind: QueryKind::Simple,
            ordinal: 0,
        };
        let v: HashMap<String, serde_json::Value> = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(v["reference_doc_id"], serde_json::Value::Null);
        assert_eq!(v["kind"], "simple");
    }
}
