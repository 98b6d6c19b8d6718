//! Skip-arc feature vectors ψ(q, c), embedded text inputs, the feature
//! schema and the min-max scaler.
//!
//! Skip-arc layout, in order (each group present only when enabled):
//!
//! | group       | width | contents                                              |
//! |-------------|-------|-------------------------------------------------------|
//! | MTfeats     | 6     | bleu, nist, ter, meteor-lite, unigram P, unigram R    |
//! | BLEUcomp    | 16    | p1-4, m1-4, t1-4, hyp_len, ref_len, ratio, bp         |
//! | CosineSim   | 0-3   | one cosine per enabled embedding source               |
//! | TaskComment | 25    | comment surface statistics, see [`COMMENT_FEATURES`]  |
//! | TaskPair    | 16    | question/comment count ratios with zero indicators    |
//! | TaskMeta    | 2     | same author flag, reciprocal rank of the comment      |
//!
//! Ratios whose denominator is zero are encoded as 0 with the companion
//! `_zero` indicator set to 1. POS counts come from an optional annotation
//! sidecar; without one they are 0 and `pos_present` is 0.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Comment, Question, Thread};
use crate::embeddings::{cosine, EmbeddingTable, SidecarVectors};
use crate::error::{Error, Result};
use crate::mte::{bleu_components, metric_bundle_with, NistStats};
use crate::textproc::{count_pattern, is_interrogative, split_sentences, tokenize, PatternKind, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureGroup {
    MTfeats,
    BLEUcomp,
    CosineSim,
    TaskComment,
    TaskPair,
    TaskMeta,
}

impl FeatureGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::MTfeats => "MTfeats",
            FeatureGroup::BLEUcomp => "BLEUcomp",
            FeatureGroup::CosineSim => "CosineSim",
            FeatureGroup::TaskComment => "TaskComment",
            FeatureGroup::TaskPair => "TaskPair",
            FeatureGroup::TaskMeta => "TaskMeta",
        }
    }
}

/// Embedding sources feeding the network input blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingRole {
    Google,
    Domain,
    Syntax,
}

impl EmbeddingRole {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingRole::Google => "google",
            EmbeddingRole::Domain => "domain",
            EmbeddingRole::Syntax => "syntax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionText {
    SubjectAndBody,
    BodyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NistWeighting {
    /// Information weights from the question alone.
    PerPair,
    /// Information weights pooled over all training questions.
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub mt_feats: bool,
    pub bleu_comp: bool,
    pub cosine_sim: bool,
    pub task_comment: bool,
    pub task_pair: bool,
    pub task_meta: bool,
    pub google: bool,
    pub domain: bool,
    pub syntax: bool,
    pub question_text: QuestionText,
    /// Use the question as hypothesis and the comment as reference.
    pub swap_mt_direction: bool,
    /// Min-max scale the embedded input blocks as well as ψ.
    pub scale_embeddings: bool,
    pub nist_weighting: NistWeighting,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            mt_feats: true,
            bleu_comp: true,
            cosine_sim: true,
            task_comment: true,
            task_pair: true,
            task_meta: true,
            google: true,
            domain: true,
            syntax: false,
            question_text: QuestionText::SubjectAndBody,
            swap_mt_direction: false,
            scale_embeddings: true,
            nist_weighting: NistWeighting::PerPair,
        }
    }
}

impl FeatureConfig {
    /// Translation-metric features and google-role embeddings only: no
    /// task-specific features, no domain-role embeddings.
    pub fn mte_vanilla() -> Self {
        FeatureConfig {
            task_comment: false,
            task_pair: false,
            task_meta: false,
            domain: false,
            ..Default::default()
        }
    }

    pub fn roles(&self) -> Vec<EmbeddingRole> {
        let mut out = Vec::new();
        if self.google {
            out.push(EmbeddingRole::Google);
        }
        if self.domain {
            out.push(EmbeddingRole::Domain);
        }
        if self.syntax {
            out.push(EmbeddingRole::Syntax);
        }
        out
    }
}

pub const MT_FEATURES: [&str; 6] = ["bleu", "nist", "ter", "meteor_lite", "unigram_p", "unigram_r"];

pub const BLEU_COMPONENTS: [&str; 16] = [
    "p1", "p2", "p3", "p4", "m1", "m2", "m3", "m4", "t1", "t2", "t3", "t4", "hyp_len", "ref_len",
    "length_ratio", "brevity_penalty",
];

pub const COMMENT_FEATURES: [&str; 25] = [
    "url",
    "image",
    "email",
    "phone",
    "thank",
    "tokens",
    "sentences",
    "avg_tokens_per_sentence",
    "type_token_ratio",
    "noun",
    "verb",
    "adj",
    "adv",
    "pron",
    "pos_present",
    "smiley_pos",
    "smiley_neg",
    "excl1",
    "excl2",
    "excl3",
    "quest1",
    "quest2",
    "quest3",
    "interrogative_sentences",
    "oov",
];

/// Counts compared between question and comment by the pair ratios.
pub const RATIO_COUNTS: [&str; 8] = ["sentences", "tokens", "noun", "verb", "adj", "adv", "pron", "oov"];

pub const META_FEATURES: [&str; 2] = ["same_author", "reciprocal_rank"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaId(pub u64);

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl std::str::FromStr for SchemaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        u64::from_str_radix(s.trim(), 16)
            .map(SchemaId)
            .map_err(|_| Error::Argument(format!("bad schema id {s:?}")))
    }
}

/// Ordered names of the skip-arc features plus the layout of the embedded
/// input blocks; both determine model shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub entries: Vec<(String, FeatureGroup)>,
    pub input_blocks: Vec<(EmbeddingRole, usize)>,
}

impl FeatureSchema {
    pub fn build(config: &FeatureConfig, dims: &HashMap<EmbeddingRole, usize>) -> Self {
        let mut entries = Vec::new();
        let mut push = |prefix: &str, names: &[&str], group| {
            for n in names {
                entries.push((format!("{prefix}:{n}"), group));
            }
        };
        if config.mt_feats {
            push("mt", &MT_FEATURES, FeatureGroup::MTfeats);
        }
        if config.bleu_comp {
            push("bleu", &BLEU_COMPONENTS, FeatureGroup::BLEUcomp);
        }
        let roles = config.roles();
        if config.cosine_sim {
            let names: Vec<&str> = roles.iter().map(|r| r.as_str()).collect();
            push("cos", &names, FeatureGroup::CosineSim);
        }
        if config.task_comment {
            push("comment", &COMMENT_FEATURES, FeatureGroup::TaskComment);
        }
        if config.task_pair {
            let mut names = Vec::new();
            for c in RATIO_COUNTS {
                names.push(format!("ratio_{c}"));
                names.push(format!("ratio_{c}_zero"));
            }
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            push("pair", &refs, FeatureGroup::TaskPair);
        }
        if config.task_meta {
            push("meta", &META_FEATURES, FeatureGroup::TaskMeta);
        }
        let input_blocks = roles
            .into_iter()
            .map(|r| (r, dims.get(&r).copied().unwrap_or(0)))
            .collect();
        FeatureSchema {
            entries,
            input_blocks,
        }
    }

    pub fn total_dim(&self) -> usize {
        self.entries.len()
    }

    /// Length of one embedded text vector (sum of block widths).
    pub fn input_dim(&self) -> usize {
        self.input_blocks.iter().map(|(_, d)| d).sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn group_width(&self, group: FeatureGroup) -> usize {
        self.entries.iter().filter(|(_, g)| *g == group).count()
    }

    fn canonical(&self) -> String {
        let mut s = String::from("skip:");
        for (name, group) in &self.entries {
            s.push_str(group.as_str());
            s.push('/');
            s.push_str(name);
            s.push(';');
        }
        s.push_str("|input:");
        for (role, dim) in &self.input_blocks {
            s.push_str(&format!("{}={dim};", role.as_str()));
        }
        s
    }

    pub fn id(&self) -> SchemaId {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        SchemaId(u64::from_be_bytes(bytes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: SchemaId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Other,
}

impl PosTag {
    pub fn parse(tag: &str) -> PosTag {
        match tag.to_ascii_uppercase().as_str() {
            "NOUN" | "PROPN" => PosTag::Noun,
            "VERB" | "AUX" => PosTag::Verb,
            "ADJ" => PosTag::Adj,
            "ADV" => PosTag::Adv,
            "PRON" => PosTag::Pron,
            _ => PosTag::Other,
        }
    }
}

/// Per-text POS tags, one per token of `tokenize(text)`.
///
/// File format: `<text-id>\t<TAG> <TAG> ...` per line.
#[derive(Debug, Clone, Default)]
pub struct AnnotationSidecar {
    tags: HashMap<String, Vec<PosTag>>,
}

impl AnnotationSidecar {
    pub fn parse(text: &str) -> Self {
        let mut tags = HashMap::new();
        for line in text.lines() {
            let (id, rest) = line.split_once('\t').unwrap_or((line, ""));
            if id.trim().is_empty() {
                continue;
            }
            tags.insert(
                id.trim().to_string(),
                rest.split_whitespace().map(PosTag::parse).collect(),
            );
        }
        AnnotationSidecar { tags }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn insert(&mut self, id: &str, tags: Vec<PosTag>) {
        self.tags.insert(id.to_string(), tags);
    }

    pub fn get(&self, id: &str) -> Option<&[PosTag]> {
        self.tags.get(id).map(Vec::as_slice)
    }
}

/// Per-text statistics shared by the comment and pair features.
#[derive(Debug, Clone)]
pub struct TextAnalysis {
    pub tokens: TokenSeq,
    pub sentences: Vec<String>,
    /// Noun, verb, adj, adv, pron counts when annotated.
    pub pos: Option<[usize; 5]>,
    pub oov: usize,
}

impl TextAnalysis {
    fn ratio_counts(&self) -> [f64; 8] {
        let pos = self.pos.unwrap_or([0; 5]);
        [
            self.sentences.len() as f64,
            self.tokens.len() as f64,
            pos[0] as f64,
            pos[1] as f64,
            pos[2] as f64,
            pos[3] as f64,
            pos[4] as f64,
            self.oov as f64,
        ]
    }
}

/// Resources and configuration for feature extraction. Immutable once
/// built, so it can be shared across threads.
#[derive(Debug)]
pub struct FeatureContext {
    pub config: FeatureConfig,
    pub google: Option<Arc<EmbeddingTable>>,
    pub domain: Option<Arc<EmbeddingTable>>,
    pub syntax: Option<Arc<SidecarVectors>>,
    pub annotations: Option<Arc<AnnotationSidecar>>,
    pub nist_stats: Option<Arc<NistStats>>,
    schema: FeatureSchema,
    schema_id: SchemaId,
}

/// Loaded external resources; cheap to clone.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub google: Option<Arc<EmbeddingTable>>,
    pub domain: Option<Arc<EmbeddingTable>>,
    pub syntax: Option<Arc<SidecarVectors>>,
    pub annotations: Option<Arc<AnnotationSidecar>>,
}

impl FeatureContext {
    /// Checks that every enabled embedding role has its resource.
    pub fn new(config: FeatureConfig, res: Resources) -> Result<Self> {
        let mut dims = HashMap::new();
        if config.google {
            let t = res
                .google
                .as_ref()
                .ok_or_else(|| Error::Config("google-role embeddings enabled but no table given".into()))?;
            dims.insert(EmbeddingRole::Google, t.dim);
        }
        if config.domain {
            let t = res
                .domain
                .as_ref()
                .ok_or_else(|| Error::Config("domain-role embeddings enabled but no table given".into()))?;
            dims.insert(EmbeddingRole::Domain, t.dim);
        }
        if config.syntax {
            let s = res
                .syntax
                .as_ref()
                .ok_or_else(|| Error::Config("syntax vectors enabled but no sidecar given".into()))?;
            dims.insert(EmbeddingRole::Syntax, s.dim);
        }
        let schema = FeatureSchema::build(&config, &dims);
        let schema_id = schema.id();
        Ok(FeatureContext {
            config,
            google: res.google,
            domain: res.domain,
            syntax: res.syntax,
            annotations: res.annotations,
            nist_stats: None,
            schema,
            schema_id,
        })
    }

    pub fn with_nist_stats(mut self, stats: Arc<NistStats>) -> Self {
        self.nist_stats = Some(stats);
        self
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_id(&self) -> SchemaId {
        self.schema_id
    }

    /// Table used for out-of-vocabulary counts: google-role when loaded,
    /// otherwise domain-role.
    fn vocab_table(&self) -> Option<&EmbeddingTable> {
        self.google.as_deref().or(self.domain.as_deref())
    }

    pub fn question_text(&self, q: &Question) -> String {
        match self.config.question_text {
            QuestionText::SubjectAndBody => q.full_text(),
            QuestionText::BodyOnly => q.body.clone(),
        }
    }

    pub fn analyze(&self, id: &str, text: &str) -> Result<TextAnalysis> {
        let tokens = tokenize(text);
        let sentences = split_sentences(text);
        let pos = match self.annotations.as_ref().and_then(|a| a.get(id)) {
            Some(tags) => {
                if tags.len() != tokens.len() {
                    return Err(Error::Data(format!(
                        "annotation for {id} has {} tags but the text has {} tokens",
                        tags.len(),
                        tokens.len()
                    )));
                }
                let mut counts = [0usize; 5];
                for t in tags {
                    match t {
                        PosTag::Noun => counts[0] += 1,
                        PosTag::Verb => counts[1] += 1,
                        PosTag::Adj => counts[2] += 1,
                        PosTag::Adv => counts[3] += 1,
                        PosTag::Pron => counts[4] += 1,
                        PosTag::Other => {}
                    }
                }
                Some(counts)
            }
            None => None,
        };
        let oov = self.vocab_table().map_or(0, |t| t.oov_count(&tokens));
        Ok(TextAnalysis {
            tokens,
            sentences,
            pos,
            oov,
        })
    }

    pub fn analyze_question(&self, q: &Question) -> Result<TextAnalysis> {
        self.analyze(&q.id, &self.question_text(q))
    }

    pub fn analyze_comment(&self, c: &Comment) -> Result<TextAnalysis> {
        self.analyze(&c.id, &c.body)
    }

    /// Embedded input vector of a text: enabled blocks concatenated in
    /// google, domain, syntax order.
    pub fn embed(&self, id: &str, tokens: &[String]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.schema.input_dim());
        for (role, _) in &self.schema.input_blocks {
            match role {
                EmbeddingRole::Google => {
                    out.extend(self.google.as_ref().expect("validated").embed(tokens).values)
                }
                EmbeddingRole::Domain => {
                    out.extend(self.domain.as_ref().expect("validated").embed(tokens).values)
                }
                EmbeddingRole::Syntax => {
                    out.extend(self.syntax.as_ref().expect("validated").get(id).values)
                }
            }
        }
        out
    }

    /// Comment features in [`COMMENT_FEATURES`] order.
    pub fn comment_features(&self, c: &Comment) -> Result<Vec<f64>> {
        let a = self.analyze_comment(c)?;
        Ok(comment_features_from(&c.body, &a))
    }

    pub fn pair_features(&self, q: &Question, c: &Comment) -> Result<FeatureVector> {
        let qa = self.analyze_question(q)?;
        let ca = self.analyze_comment(c)?;
        let qx = self.embed(&q.id, &qa.tokens);
        let cx = self.embed(&c.id, &ca.tokens);
        self.pair_features_with(q, c, &qa, &ca, &qx, &cx)
    }

    /// ψ(q, c) from precomputed analyses and embedded inputs.
    pub fn pair_features_with(
        &self,
        q: &Question,
        c: &Comment,
        qa: &TextAnalysis,
        ca: &TextAnalysis,
        qx: &[f64],
        cx: &[f64],
    ) -> Result<FeatureVector> {
        let dim = self.schema.input_dim();
        if qx.len() != dim || cx.len() != dim {
            return Err(Error::SchemaMismatch {
                expected: format!("input vectors of length {dim}"),
                found: format!("{} and {}", qx.len(), cx.len()),
            });
        }
        let cfg = &self.config;
        let mut values = Vec::with_capacity(self.schema.total_dim());
        let (hyp, reference) = if cfg.swap_mt_direction {
            (&qa.tokens, &ca.tokens)
        } else {
            (&ca.tokens, &qa.tokens)
        };
        if cfg.mt_feats || cfg.bleu_comp {
            let bleu = bleu_components(hyp, reference);
            if cfg.mt_feats {
                let stats = match cfg.nist_weighting {
                    NistWeighting::PerPair => None,
                    NistWeighting::Corpus => self.nist_stats.as_deref(),
                };
                values.extend(metric_bundle_with(hyp, reference, &bleu, stats).to_features());
            }
            if cfg.bleu_comp {
                values.extend(bleu.to_features());
            }
        }
        if cfg.cosine_sim {
            let mut offset = 0;
            for (_, d) in &self.schema.input_blocks {
                values.push(cosine(&qx[offset..offset + d], &cx[offset..offset + d])?);
                offset += d;
            }
        }
        if cfg.task_comment {
            values.extend(comment_features_from(&c.body, ca));
        }
        if cfg.task_pair {
            let qc = qa.ratio_counts();
            let cc = ca.ratio_counts();
            for (qv, cv) in qc.iter().zip(cc) {
                if cv == 0.0 {
                    values.extend([0.0, 1.0]);
                } else {
                    values.extend([qv / cv, 0.0]);
                }
            }
        }
        if cfg.task_meta {
            let same = !q.author_id.is_empty() && q.author_id == c.author_id;
            values.push(f64::from(u8::from(same)));
            values.push(1.0 / c.position.max(1) as f64);
        }
        debug_assert_eq!(values.len(), self.schema.total_dim());
        Ok(FeatureVector {
            values,
            schema_id: self.schema_id,
        })
    }
}

pub fn comment_features_from(body: &str, a: &TextAnalysis) -> Vec<f64> {
    let count = |k| count_pattern(body, k) as f64;
    let n_tokens = a.tokens.len();
    let n_sent = a.sentences.len();
    let types = a.tokens.iter().collect::<std::collections::HashSet<_>>().len();
    let pos = a.pos.unwrap_or([0; 5]);
    let mut v = vec![
        count(PatternKind::Url),
        count(PatternKind::Image),
        count(PatternKind::Email),
        count(PatternKind::Phone),
        count(PatternKind::ThankSubstring),
        n_tokens as f64,
        n_sent as f64,
        if n_sent == 0 { 0.0 } else { n_tokens as f64 / n_sent as f64 },
        if n_tokens == 0 { 0.0 } else { types as f64 / n_tokens as f64 },
    ];
    v.extend(pos.iter().map(|&p| p as f64));
    v.push(f64::from(u8::from(a.pos.is_some())));
    v.push(count(PatternKind::PositiveSmiley));
    v.push(count(PatternKind::NegativeSmiley));
    for k in 1..=3 {
        v.push(count(PatternKind::ExclamationRun(k)));
    }
    for k in 1..=3 {
        v.push(count(PatternKind::InterrogationRun(k)));
    }
    v.push(a.sentences.iter().filter(|s| is_interrogative(s)).count() as f64);
    v.push(a.oov as f64);
    v
}

/// Features for one thread: the question input vector and, per comment,
/// its input vector and raw ψ.
#[derive(Debug, Clone)]
pub struct ThreadFeatures {
    pub question_input: Vec<f64>,
    pub comment_inputs: Vec<Vec<f64>>,
    pub skip: Vec<FeatureVector>,
}

impl FeatureContext {
    pub fn thread_features(&self, thread: &Thread) -> Result<ThreadFeatures> {
        let qa = self.analyze_question(&thread.question)?;
        let qx = self.embed(&thread.question.id, &qa.tokens);
        let mut comment_inputs = Vec::with_capacity(thread.comments.len());
        let mut skip = Vec::with_capacity(thread.comments.len());
        for c in &thread.comments {
            let ca = self.analyze_comment(c)?;
            let cx = self.embed(&c.id, &ca.tokens);
            skip.push(self.pair_features_with(&thread.question, c, &qa, &ca, &qx, &cx)?);
            comment_inputs.push(cx);
        }
        Ok(ThreadFeatures {
            question_input: qx,
            comment_inputs,
            skip,
        })
    }
}

// ---------------------------------------------------------------------------
// Scaling

/// Per-dimension min/max fitted on training vectors, mapping to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub schema_id: SchemaId,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Scaler {
    pub fn fit<'a, I>(schema_id: SchemaId, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut it = rows.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::Argument("cannot fit a scaler on no vectors".into()))?;
        let mut mins = first.to_vec();
        let mut maxs = first.to_vec();
        for row in it {
            if row.len() != mins.len() {
                return Err(Error::Shape {
                    block: "scaler input",
                    expected: mins.len(),
                    actual: row.len(),
                });
            }
            for (i, &x) in row.iter().enumerate() {
                mins[i] = mins[i].min(x);
                maxs[i] = maxs[i].max(x);
            }
        }
        Ok(Scaler {
            schema_id,
            mins,
            maxs,
        })
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                block: "scaler input",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(x
            .iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.schema_id != self.schema_id {
            return Err(Error::SchemaMismatch {
                expected: self.schema_id.to_string(),
                found: v.schema_id.to_string(),
            });
        }
        Ok(FeatureVector {
            values: self.transform(&v.values)?,
            schema_id: v.schema_id,
        })
    }
}

pub fn fit_scaler(vectors: &[FeatureVector]) -> Result<Scaler> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Argument("cannot fit a scaler on no vectors".into()))?;
    if let Some(bad) = vectors.iter().find(|v| v.schema_id != first.schema_id) {
        return Err(Error::SchemaMismatch {
            expected: first.schema_id.to_string(),
            found: bad.schema_id.to_string(),
        });
    }
    Scaler::fit(first.schema_id, vectors.iter().map(|v| v.values.as_slice()))
}

pub fn apply_scaler(s: &Scaler, v: &FeatureVector) -> Result<FeatureVector> {
    s.apply(v)
}

// ---------------------------------------------------------------------------
// Feature dump

/// Writes raw ψ vectors: a `# schema <id>` line, a tab-separated header of
/// `question_id comment_id <names..>`, then one row per comment.
pub fn write_feature_dump<W: Write>(
    schema: &FeatureSchema,
    rows: &[(String, String, FeatureVector)],
    mut out: W,
) -> Result<()> {
    writeln!(out, "# schema {}", schema.id())?;
    let mut header = vec!["question_id", "comment_id"];
    header.extend(schema.names());
    writeln!(out, "{}", header.join("\t"))?;
    for (qid, cid, v) in rows {
        write!(out, "{qid}\t{cid}")?;
        for x in &v.values {
            write!(out, "\t{x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub type FeatureDump = HashMap<(String, String), FeatureVector>;

pub fn read_feature_dump<R: BufRead>(input: R, schema: &FeatureSchema) -> Result<FeatureDump> {
    let expected = schema.id();
    let mut lines = input.lines().enumerate();
    let bad = |line: usize, message: String| Error::Record { line, message };
    let (_, first) = lines.next().ok_or_else(|| bad(1, "empty feature dump".into()))?;
    let first = first?;
    let found: SchemaId = first
        .strip_prefix("# schema ")
        .ok_or_else(|| bad(1, "missing schema line".into()))?
        .parse()?;
    if found != expected {
        return Err(Error::SchemaMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    let (_, header) = lines.next().ok_or_else(|| bad(2, "missing header".into()))?;
    let header = header?;
    let names: Vec<&str> = header.split('\t').skip(2).collect();
    if !names.iter().copied().eq(schema.names()) {
        return Err(bad(2, "header does not match the schema".into()));
    }
    let mut out = HashMap::new();
    for (idx, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let qid = fields.next().unwrap_or_default().to_string();
        let cid = fields
            .next()
            .ok_or_else(|| bad(idx + 1, "missing comment id".into()))?
            .to_string();
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(idx + 1, e.to_string()))?;
        if values.len() != schema.total_dim() {
            return Err(bad(
                idx + 1,
                format!("{} values, expected {}", values.len(), schema.total_dim()),
            ));
        }
        out.insert(
            (qid, cid),
            FeatureVector {
                values,
                schema_id: expected,
            },
        );
    }
    Ok(out)
}
