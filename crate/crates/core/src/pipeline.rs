//! End-to-end steps shared by the command line and the tests: feature
//! extraction, scaler fitting on the training split, training, ranking and
//! the feature-group ablation.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::corpus::Thread;
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_rankings, gold_map, Scores, DEFAULT_CUTOFF};
use crate::features::{
    fit_scaler, FeatureConfig, FeatureContext, FeatureDump, FeatureVector, NistWeighting, Resources, Scaler,
};
use crate::mte::{NistStats, NIST_ORDER};
use crate::network::{NetConfig, Variant};
use crate::ranker::{
    baseline_random, baseline_time, score_classification, score_pairwise, Accumulation, Method, RankedThread,
};
use crate::textproc::tokenize;
use crate::trainer::{train, CommentData, EpochStats, Model, ThreadData, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub variant: Variant,
    pub hidden: usize,
    pub net_seed: u64,
    pub train: TrainConfig,
    pub cutoff: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureConfig::default(),
            variant: Variant::Pairwise,
            hidden: 3,
            net_seed: 1,
            train: TrainConfig::default(),
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

/// Unscaled features of one comment.
#[derive(Debug, Clone, PartialEq)]
pub struct RawComment {
    pub id: String,
    pub position: usize,
    pub good: bool,
    pub input: Vec<f64>,
    pub skip: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawThread {
    pub thread_id: String,
    pub question_input: Vec<f64>,
    pub comments: Vec<RawComment>,
}

/// Builds the feature context. With corpus-level NIST weighting the
/// information weights come from the questions of `nist_reference`.
pub fn build_context(features: &FeatureConfig, res: &Resources, nist_reference: &[Thread]) -> Result<FeatureContext> {
    let ctx = FeatureContext::new(features.clone(), res.clone())?;
    if features.nist_weighting == NistWeighting::Corpus {
        if nist_reference.is_empty() {
            return Err(Error::Config("corpus NIST weighting needs the training corpus".into()));
        }
        let refs: Vec<_> = nist_reference
            .iter()
            .map(|t| tokenize(&ctx.question_text(&t.question)))
            .collect();
        let stats = NistStats::from_references(refs.iter().map(|r| &r[..]), NIST_ORDER);
        return Ok(ctx.with_nist_stats(Arc::new(stats)));
    }
    Ok(ctx)
}

/// Extracts raw features; ψ vectors found in `cache` are reused.
pub fn extract(ctx: &FeatureContext, threads: &[Thread], cache: Option<&FeatureDump>) -> Result<Vec<RawThread>> {
    let id = ctx.schema_id();
    threads
        .iter()
        .map(|t| {
            let q = &t.question;
            let qa = ctx.analyze_question(q)?;
            let qx = ctx.embed(&q.id, &qa.tokens);
            let comments = t
                .comments
                .iter()
                .map(|c| {
                    let ca = ctx.analyze_comment(c)?;
                    let cx = ctx.embed(&c.id, &ca.tokens);
                    let cached = cache.and_then(|m| m.get(&(q.id.clone(), c.id.clone())));
                    let skip = match cached {
                        Some(v) if v.schema_id == id => v.clone(),
                        _ => ctx.pair_features_with(q, c, &qa, &ca, &qx, &cx)?,
                    };
                    Ok(RawComment {
                        id: c.id.clone(),
                        position: c.position,
                        good: c.binary_label().is_good(),
                        input: cx,
                        skip,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RawThread {
                thread_id: t.id().to_string(),
                question_input: qx,
                comments,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scalers {
    pub skip: Scaler,
    pub input: Option<Scaler>,
}

/// Fits the ψ scaler and, when enabled, the input scaler over every
/// question and comment vector of the training split.
pub fn fit_scalers(ctx: &FeatureContext, train: &[RawThread]) -> Result<Scalers> {
    let skips: Vec<FeatureVector> = train
        .iter()
        .flat_map(|t| t.comments.iter().map(|c| c.skip.clone()))
        .collect();
    if skips.is_empty() {
        return Err(Error::Data("training split has no comments".into()));
    }
    let skip = fit_scaler(&skips)?;
    let input = if ctx.config.scale_embeddings {
        let rows = train
            .iter()
            .flat_map(|t| std::iter::once(&t.question_input).chain(t.comments.iter().map(|c| &c.input)))
            .map(Vec::as_slice);
        Some(Scaler::fit(ctx.schema_id(), rows)?)
    } else {
        None
    };
    Ok(Scalers { skip, input })
}

pub fn apply_scalers(raw: &[RawThread], scalers: &Scalers) -> Result<Vec<ThreadData>> {
    let scale_input = |x: &Vec<f64>| match &scalers.input {
        Some(s) => s.transform(x),
        None => Ok(x.clone()),
    };
    raw.iter()
        .map(|t| {
            Ok(ThreadData {
                thread_id: t.thread_id.clone(),
                question_input: scale_input(&t.question_input)?,
                comments: t
                    .comments
                    .iter()
                    .map(|c| {
                        Ok(CommentData {
                            id: c.id.clone(),
                            position: c.position,
                            good: c.good,
                            input: scale_input(&c.input)?,
                            skip: scalers.skip.apply(&c.skip)?.values,
                        })
                    })
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

#[derive(Debug)]
pub struct Trained {
    pub model: Model,
    pub outcome: TrainOutcome,
}

/// Extracts, scales (fit on `train` only) and trains. An empty validation
/// split falls back to selecting on the training split.
pub fn train_model(
    cfg: &PipelineConfig,
    ctx: &FeatureContext,
    train_threads: &[Thread],
    val_threads: &[Thread],
    cache: Option<&FeatureDump>,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<Trained> {
    let raw_train = extract(ctx, train_threads, cache)?;
    let scalers = fit_scalers(ctx, &raw_train)?;
    let train_data = apply_scalers(&raw_train, &scalers)?;
    let mut warnings = Vec::new();
    let val_data = if val_threads.is_empty() {
        warnings.push("no validation split; selecting the epoch on the training split".to_string());
        train_data.clone()
    } else {
        apply_scalers(&extract(ctx, val_threads, cache)?, &scalers)?
    };
    let schema = ctx.schema().clone();
    let net = NetConfig {
        variant: cfg.variant,
        hidden: cfg.hidden,
        input_dim: schema.input_dim(),
        skip_dim: schema.total_dim(),
        seed: cfg.net_seed,
    };
    let mut outcome = train(&train_data, &val_data, net, &cfg.train, on_epoch)?;
    warnings.append(&mut outcome.warnings);
    outcome.warnings = warnings;
    let model = Model {
        params: outcome.best.params.clone(),
        features: ctx.config.clone(),
        schema,
        skip_scaler: scalers.skip,
        input_scaler: scalers.input,
        epoch: outcome.best.epoch,
        val_score: outcome.best.val_score,
        selection: cfg.train.selection,
    };
    Ok(Trained { model, outcome })
}

/// Scaled network inputs for `threads` under a trained model.
pub fn model_inputs(model: &Model, ctx: &FeatureContext, threads: &[Thread]) -> Result<Vec<ThreadData>> {
    model.check_schema(ctx.schema_id())?;
    let scalers = Scalers {
        skip: model.skip_scaler.clone(),
        input: model.input_scaler.clone(),
    };
    apply_scalers(&extract(ctx, threads, None)?, &scalers)
}

pub fn rank_with_model(
    model: &Model,
    ctx: &FeatureContext,
    threads: &[Thread],
    mode: Accumulation,
) -> Result<Vec<RankedThread>> {
    model_inputs(model, ctx, threads)?
        .iter()
        .map(|t| match model.params.config.variant {
            Variant::Pairwise => score_pairwise(&model.params, t, mode),
            Variant::Classification => score_classification(&model.params, t),
        })
        .collect()
}

pub fn rank_baseline(threads: &[Thread], method: Method) -> Result<Vec<RankedThread>> {
    match method {
        Method::BaselineTime => Ok(threads.iter().map(baseline_time).collect()),
        Method::BaselineRandom(seed) => Ok(threads.iter().map(|t| baseline_random(t, seed)).collect()),
        other => Err(Error::Argument(format!("{other} is not a baseline"))),
    }
}

pub fn evaluate_threads(rankings: &[RankedThread], threads: &[Thread], k: usize) -> Result<Scores> {
    evaluate_rankings(rankings, &gold_map(threads), k)
}

// ---------------------------------------------------------------------------
// Ablation

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub scores: Scores,
    /// Variant MAP minus full-system MAP; negative means the group helped.
    pub delta_map: f64,
    pub note: Option<String>,
}

type Toggle = fn(&mut FeatureConfig) -> bool;

/// Ablated groups in report order. Each toggle disables its group and
/// reports whether anything was enabled to begin with.
pub const ABLATIONS: [(&str, Toggle); 6] = [
    ("-BLEUcomp", |c| std::mem::replace(&mut c.bleu_comp, false)),
    ("-MTfeats", |c| std::mem::replace(&mut c.mt_feats, false)),
    ("-Syntax", |c| std::mem::replace(&mut c.syntax, false)),
    ("-google-role", |c| std::mem::replace(&mut c.google, false)),
    ("-domain-role", |c| std::mem::replace(&mut c.domain, false)),
    ("-TaskFeats", |c| {
        let was = c.task_comment || c.task_pair || c.task_meta;
        c.task_comment = false;
        c.task_pair = false;
        c.task_meta = false;
        was
    }),
];

fn run_variant(
    cfg: &PipelineConfig,
    res: &Resources,
    train_threads: &[Thread],
    val_threads: &[Thread],
    test_threads: &[Thread],
) -> Result<Scores> {
    let ctx = build_context(&cfg.features, res, train_threads)?;
    let trained = train_model(cfg, &ctx, train_threads, val_threads, None, |_| {})?;
    let rankings = rank_with_model(&trained.model, &ctx, test_threads, cfg.train.accumulation)?;
    evaluate_threads(&rankings, test_threads, cfg.cutoff)
}

/// Trains the full system and one variant per ablated group and evaluates
/// each on `test_threads`. Groups not enabled in `cfg` reuse the full
/// result.
pub fn ablate(
    cfg: &PipelineConfig,
    res: &Resources,
    train_threads: &[Thread],
    val_threads: &[Thread],
    test_threads: &[Thread],
    mut progress: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    let full = run_variant(cfg, res, train_threads, val_threads, test_threads)?;
    let mut rows = vec![AblationRow {
        name: "full".into(),
        scores: full,
        delta_map: 0.0,
        note: None,
    }];
    progress(&rows[0]);
    for (name, toggle) in ABLATIONS {
        let mut variant = cfg.clone();
        let row = if toggle(&mut variant.features) {
            let scores = run_variant(&variant, res, train_threads, val_threads, test_threads)?;
            AblationRow {
                name: name.into(),
                scores,
                delta_map: scores.map - full.map,
                note: None,
            }
        } else {
            AblationRow {
                name: name.into(),
                scores: full,
                delta_map: 0.0,
                note: Some("group not enabled; same as full".into()),
            }
        };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn render_ablation(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}\n", "System", "MAP", "AvgRec", "MRR", "dMAP");
    for r in rows {
        let _ = write!(
            s,
            "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>+7.2}",
            r.name,
            r.scores.map * 100.0,
            r.scores.avg_rec * 100.0,
            r.scores.mrr * 100.0,
            r.delta_map * 100.0
        );
        if let Some(note) = &r.note {
            let _ = write!(s, "  ({note})");
        }
        s.push('\n');
    }
    s
}

/// Group with the largest MAP drop; ties keep report order.
pub fn largest_drop(rows: &[AblationRow]) -> Option<&AblationRow> {
    rows.iter()
        .filter(|r| r.name != "full")
        .fold(None, |best: Option<&AblationRow>, r| match best {
            Some(b) if b.delta_map <= r.delta_map => Some(b),
            _ => Some(r),
        })
}

/// Per-comment raw ψ rows for a feature dump.
pub fn dump_rows(raw: &[RawThread]) -> Vec<(String, String, FeatureVector)> {
    raw.iter()
        .flat_map(|t| {
            t.comments
                .iter()
                .map(|c| (t.thread_id.clone(), c.id.clone(), c.skip.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, Signal, SyntheticConfig};

    fn small(signal: Signal) -> (crate::synthetic::SyntheticData, Resources) {
        let d = generate(&SyntheticConfig {
            signal,
            train_threads: 30,
            val_threads: 10,
            test_threads: 10,
            ..Default::default()
        });
        let res = Resources {
            google: Some(Arc::new(d.google.clone())),
            domain: Some(Arc::new(d.domain.clone())),
            ..Default::default()
        };
        (d, res)
    }

    fn quick() -> PipelineConfig {
        PipelineConfig {
            train: TrainConfig {
                epochs: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn scalers_fit_on_train_only() {
        let (d, res) = small(Signal::Lexical);
        let ctx = build_context(&FeatureConfig::default(), &res, &d.train).unwrap();
        let raw_train = extract(&ctx, &d.train, None).unwrap();
        let raw_test = extract(&ctx, &d.test, None).unwrap();
        let s = fit_scalers(&ctx, &raw_train).unwrap();
        let both: Vec<RawThread> = raw_train.iter().chain(&raw_test).cloned().collect();
        let s_both = fit_scalers(&ctx, &both).unwrap();
        assert_ne!(s, s_both);
        let scaled = apply_scalers(&raw_test, &s).unwrap();
        for t in &scaled {
            for c in &t.comments {
                assert!(c.skip.iter().all(|x| (-1.0..=1.0).contains(x)));
            }
        }
    }

    #[test]
    fn trains_and_ranks_small_corpus() {
        let (d, res) = small(Signal::Lexical);
        let cfg = quick();
        let ctx = build_context(&cfg.features, &res, &d.train).unwrap();
        let trained = train_model(&cfg, &ctx, &d.train, &d.val, None, |_| {}).unwrap();
        let r = rank_with_model(&trained.model, &ctx, &d.test, Accumulation::Antisymmetric).unwrap();
        assert_eq!(r.len(), d.test.len());
        let map = evaluate_threads(&r, &d.test, 10).unwrap().map;
        assert!(map > 0.9, "{map}");
        let bytes = trained.model.to_bytes().unwrap();
        let back = Model::from_bytes(&bytes).unwrap();
        let r2 = rank_with_model(&back, &ctx, &d.test, Accumulation::Antisymmetric).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn feature_cache_is_used() {
        let (d, res) = small(Signal::Lexical);
        let ctx = build_context(&FeatureConfig::default(), &res, &d.train).unwrap();
        let raw = extract(&ctx, &d.train[..2], None).unwrap();
        let mut cache: FeatureDump = dump_rows(&raw)
            .into_iter()
            .map(|(q, c, v)| ((q, c), v))
            .collect();
        let key = (d.train[0].id().to_string(), d.train[0].comments[0].id.clone());
        cache.get_mut(&key).unwrap().values[0] = 123.0;
        let again = extract(&ctx, &d.train[..2], Some(&cache)).unwrap();
        assert_eq!(again[0].comments[0].skip.values[0], 123.0);
        assert_eq!(again[1], raw[1]);
    }

    #[test]
    fn corpus_nist_needs_reference() {
        let (_, res) = small(Signal::Lexical);
        let features = FeatureConfig {
            nist_weighting: NistWeighting::Corpus,
            ..Default::default()
        };
        assert!(matches!(build_context(&features, &res, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn ablation_rows() {
        let (d, res) = small(Signal::Lexical);
        let mut cfg = quick();
        cfg.train.epochs = 2;
        let rows = ablate(&cfg, &res, &d.train, &d.val, &d.test, |_| {}).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            ["full", "-BLEUcomp", "-MTfeats", "-Syntax", "-google-role", "-domain-role", "-TaskFeats"]
        );
        assert_eq!(rows[0].delta_map, 0.0);
        assert!(rows[3].note.is_some());
        assert_eq!(rows[3].scores, rows[0].scores);
        let text = render_ablation(&rows);
        assert_eq!(text.lines().count(), 8);
    }

    #[test]
    fn baselines() {
        let (d, _) = small(Signal::Lexical);
        let t = rank_baseline(&d.test, Method::BaselineTime).unwrap();
        assert!(t.iter().all(|r| r.comments.windows(2).all(|w| w[0].position < w[1].position)));
        assert!(rank_baseline(&d.test, Method::Pairwise).is_err());
    }
}
