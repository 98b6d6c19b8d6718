//! Training: pair generation, the minibatch epoch loop, validation-based
//! epoch selection, and the model file.
//!
//! Each minibatch step uses the mean data gradient of the batch plus
//! `lambda * W` for weight blocks, i.e. the per-example regularizer
//! averaged over the batch.
//!
//! Model file layout (all integers and floats little-endian):
//!
//! ```text
//! magic "CQARANK\0" | u32 version | u32 header length | JSON header
//! f64 skip mins | f64 skip maxs | [f64 input mins | f64 input maxs] | f64 params
//! ```
//!
//! The header records the network config, feature config, schema id and
//! names, input block layout, the selected epoch and its validation score.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Thread;
use crate::error::{Error, Result};
use crate::evaluator::kendall_tau_b;
use crate::features::{EmbeddingRole, FeatureConfig, FeatureSchema, Scaler, SchemaId};
use crate::network::{AdagradState, NetConfig, NetInput, NetParams, PairInput, SingleInput, Variant};
use crate::ranker::{model_scores, Accumulation};

/// One comment, ready for the network: scaled input vector and scaled ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct CommentData {
    pub id: String,
    pub position: usize,
    pub good: bool,
    pub input: Vec<f64>,
    pub skip: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadData {
    pub thread_id: String,
    pub question_input: Vec<f64>,
    pub comments: Vec<CommentData>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInstance {
    pub thread_id: String,
    /// Zero-based comment indices within the thread.
    pub i: usize,
    pub j: usize,
    /// 1 when comment i is Good and j is not.
    pub label: u8,
}

/// Ordered (i, j, label) over Good/non-Good pairs in both orders.
pub fn pair_indices(good: &[bool]) -> Vec<(usize, usize, u8)> {
    let mut out = Vec::new();
    for (g, _) in good.iter().enumerate().filter(|(_, &x)| x) {
        for (b, _) in good.iter().enumerate().filter(|(_, &x)| !x) {
            out.push((g, b, 1));
            out.push((b, g, 0));
        }
    }
    out.sort_unstable();
    out
}

pub fn make_pairs(thread: &Thread) -> Vec<PairInstance> {
    let good: Vec<bool> = thread.comments.iter().map(|c| c.binary_label().is_good()).collect();
    pair_indices(&good)
        .into_iter()
        .map(|(i, j, label)| PairInstance {
            thread_id: thread.id().to_string(),
            i,
            j,
            label,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    PairAccuracy,
    KendallTau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub lambda: f64,
    pub decay: f64,
    pub eta: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub selection: Selection,
    pub accumulation: Accumulation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            minibatch: 30,
            lambda: 0.005,
            decay: 1e-4,
            eta: 0.1,
            seed: 1,
            shuffle: true,
            selection: Selection::PairAccuracy,
            accumulation: Accumulation::Antisymmetric,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::Config("epochs and minibatch must be positive".into()));
        }
        if !(self.eta > 0.0) || self.lambda < 0.0 || self.decay < 0.0 {
            return Err(Error::Config("eta must be positive, lambda and decay nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// 1-based epoch number.
    pub epoch: usize,
    pub params: NetParams,
    pub val_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_score: f64,
    pub wall_ms: u128,
}

impl EpochStats {
    pub fn log_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.epoch, self.mean_loss, self.val_score, self.wall_ms)
    }
}

pub const EPOCH_LOG_HEADER: &str = "epoch\tmean_loss\tval_acc\twall_ms";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub history: Vec<EpochStats>,
    pub warnings: Vec<String>,
}

/// Training instance: thread index, comment indices and label. For the
/// classification variant `j` is unused.
#[derive(Debug, Clone, Copy)]
struct Instance {
    t: usize,
    i: usize,
    j: usize,
    label: f64,
}

fn instances(data: &[ThreadData], variant: Variant) -> Vec<Instance> {
    let mut out = Vec::new();
    for (t, thread) in data.iter().enumerate() {
        match variant {
            Variant::Pairwise => {
                let good: Vec<bool> = thread.comments.iter().map(|c| c.good).collect();
                for (i, j, label) in pair_indices(&good) {
                    out.push(Instance {
                        t,
                        i,
                        j,
                        label: f64::from(label),
                    });
                }
            }
            Variant::Classification => {
                for (i, c) in thread.comments.iter().enumerate() {
                    out.push(Instance {
                        t,
                        i,
                        j: i,
                        label: f64::from(u8::from(c.good)),
                    });
                }
            }
        }
    }
    out
}

fn net_input<'a>(data: &'a [ThreadData], inst: &Instance, variant: Variant) -> NetInput<'a> {
    let th = &data[inst.t];
    let ci = &th.comments[inst.i];
    match variant {
        Variant::Pairwise => {
            let cj = &th.comments[inst.j];
            NetInput::Pair(PairInput {
                xq: &th.question_input,
                xc1: &ci.input,
                xc2: &cj.input,
                psi1: &ci.skip,
                psi2: &cj.skip,
            })
        }
        Variant::Classification => NetInput::Single(SingleInput {
            xq: &th.question_input,
            xc: &ci.input,
            psi: &ci.skip,
        }),
    }
}

/// Fraction of instances whose output, thresholded at 0.5 (inclusive),
/// equals the label. Pairs for the pairwise variant, comments for the
/// classification variant. `None` when there are no instances.
pub fn pair_accuracy(params: &NetParams, data: &[ThreadData]) -> Result<Option<f64>> {
    let variant = params.config.variant;
    let inst = instances(data, variant);
    if inst.is_empty() {
        return Ok(None);
    }
    let mut correct = 0usize;
    for x in &inst {
        let out = params.forward_input(&net_input(data, x, variant))?.output;
        if (out >= 0.5) == (x.label > 0.5) {
            correct += 1;
        }
    }
    Ok(Some(correct as f64 / inst.len() as f64))
}

/// Mean per-thread Kendall tau-b between model scores and gold labels,
/// over threads with both labels present.
pub fn mean_kendall_tau(params: &NetParams, data: &[ThreadData], mode: Accumulation) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0;
    for t in data {
        let scores = model_scores(params, t, mode)?;
        let labels: Vec<bool> = t.comments.iter().map(|c| c.good).collect();
        if let Some(tau) = kendall_tau_b(&scores, &labels) {
            sum += tau;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

fn validation_score(
    params: &NetParams,
    val: &[ThreadData],
    cfg: &TrainConfig,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let score = match cfg.selection {
        Selection::PairAccuracy => pair_accuracy(params, val)?,
        Selection::KendallTau => mean_kendall_tau(params, val, cfg.accumulation)?,
    };
    Ok(score.unwrap_or_else(|| {
        if warnings.is_empty() {
            warnings.push("validation set has no scorable instances; using 0".into());
        }
        0.0
    }))
}

/// Runs the epoch loop and returns the parameters of the epoch with the
/// highest validation score, the earliest one on ties. `on_epoch` sees each
/// epoch's statistics as they are produced.
pub fn train(
    train_data: &[ThreadData],
    val_data: &[ThreadData],
    net: NetConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    net.validate()?;
    let variant = net.variant;
    let mut inst = instances(train_data, variant);
    if inst.is_empty() {
        return Err(Error::Data("no trainable pairs".into()));
    }
    let mut params = NetParams::init(net);
    let mut opt = AdagradState::new(params.len(), cfg.eta, cfg.decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut grad = vec![0.0; params.len()];
    let mut warnings = Vec::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<Checkpoint> = None;

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        if cfg.shuffle {
            inst.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for batch in inst.chunks(cfg.minibatch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let reg = 0.5 * cfg.lambda * params.weight_norm_sq();
            for x in batch {
                let input = net_input(train_data, x, variant);
                let cache = params.forward_input(&input)?;
                loss_sum += params.accumulate_gradient(&input, &cache, x.label, &mut grad)? + reg;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            params.add_regularizer(cfg.lambda, &mut grad);
            opt.step(&mut params, &grad)?;
        }
        if !params.is_finite() {
            return Err(Error::Model(format!("parameters diverged in epoch {epoch}")));
        }
        let val_score = validation_score(&params, val_data, cfg, &mut warnings)?;
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / inst.len() as f64,
            val_score,
            wall_ms: start.elapsed().as_millis(),
        };
        on_epoch(&stats);
        history.push(stats);
        if best.as_ref().map_or(true, |b| val_score > b.val_score) {
            best = Some(Checkpoint {
                epoch,
                params: params.clone(),
                val_score,
            });
        }
    }
    Ok(TrainOutcome {
        best: best.expect("at least one epoch"),
        history,
        warnings,
    })
}

/// Index of the best score, earliest on ties.
pub fn select_epoch(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.map_or(true, |b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Model file

const MAGIC: &[u8; 8] = b"CQARANK\0";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model with everything needed to score new threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: NetParams,
    pub features: FeatureConfig,
    pub schema: FeatureSchema,
    pub skip_scaler: Scaler,
    pub input_scaler: Option<Scaler>,
    pub epoch: usize,
    pub val_score: f64,
    pub selection: Selection,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    net: NetConfig,
    features: FeatureConfig,
    schema_id: String,
    feature_names: Vec<String>,
    input_blocks: Vec<(EmbeddingRole, usize)>,
    input_scaled: bool,
    epoch: usize,
    val_score: f64,
    selection: Selection,
}

impl Model {
    pub fn schema_id(&self) -> SchemaId {
        self.schema.id()
    }

    /// Errors unless this model was trained on `expected`.
    pub fn check_schema(&self, expected: SchemaId) -> Result<()> {
        if self.schema_id() != expected {
            return Err(Error::SchemaMismatch {
                expected: expected.to_string(),
                found: self.schema_id().to_string(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            net: self.params.config.clone(),
            features: self.features.clone(),
            schema_id: self.schema_id().to_string(),
            feature_names: self.schema.names().map(str::to_string).collect(),
            input_blocks: self.schema.input_blocks.clone(),
            input_scaled: self.input_scaler.is_some(),
            epoch: self.epoch,
            val_score: self.val_score,
            selection: self.selection,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Model(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut floats = |v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        floats(&self.skip_scaler.mins);
        floats(&self.skip_scaler.maxs);
        if let Some(s) = &self.input_scaler {
            floats(&s.mins);
            floats(&s.maxs);
        }
        floats(&self.params.values);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Model(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a model file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "model format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| Error::Model(format!("bad header: {e}")))?;

        let dims = header.input_blocks.iter().copied().collect();
        let schema = FeatureSchema::build(&header.features, &dims);
        if schema.input_blocks != header.input_blocks
            || !schema.names().eq(header.feature_names.iter().map(String::as_str))
        {
            return Err(bad("feature names in header do not match its feature config"));
        }
        let stored: SchemaId = header.schema_id.parse()?;
        if schema.id() != stored {
            return Err(Error::SchemaMismatch {
                expected: stored.to_string(),
                found: schema.id().to_string(),
            });
        }
        let net = header.net;
        net.validate()?;
        let s = schema.total_dim();
        let d = schema.input_dim();
        if net.skip_dim != s {
            return Err(Error::Shape {
                block: "skip_dim",
                expected: s,
                actual: net.skip_dim,
            });
        }
        if net.input_dim != d {
            return Err(Error::Shape {
                block: "input_dim",
                expected: d,
                actual: net.input_dim,
            });
        }
        let n_params = NetParams::zeros(net.clone()).len();
        let n_floats = 2 * s + if header.input_scaled { 2 * d } else { 0 } + n_params;
        let data = &bytes[16 + hlen..];
        if data.len() != 8 * n_floats {
            return Err(Error::Model(format!(
                "expected {} bytes of parameters, found {}",
                8 * n_floats,
                data.len()
            )));
        }
        let mut floats = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |n: usize| floats.by_ref().take(n).collect::<Vec<f64>>();
        let id = schema.id();
        let skip_scaler = Scaler {
            schema_id: id,
            mins: take(s),
            maxs: take(s),
        };
        let input_scaler = header.input_scaled.then(|| Scaler {
            schema_id: id,
            mins: take(d),
            maxs: take(d),
        });
        let params = NetParams {
            config: net,
            values: take(n_params),
        };
        if !params.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(Model {
            params,
            features: header.features,
            schema,
            skip_scaler,
            input_scaler,
            epoch: header.epoch,
            val_score: header.val_score,
            selection: header.selection,
        })
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let bytes = model.to_bytes()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Model::from_bytes(&bytes)
}
