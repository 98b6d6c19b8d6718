//! Run configuration: a flat TOML key/value file plus `--set key=value`
//! overrides. Relative paths in the file are resolved against the file's
//! directory; paths given with `--set` are taken relative to the working
//! directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use cqarank::features::{FeatureConfig, NistWeighting, QuestionText};
use cqarank::network::Variant;
use cqarank::pipeline::PipelineConfig;
use cqarank::ranker::Accumulation;
use cqarank::trainer::{Selection, TrainConfig};
use cqarank::Error;

const PATH_KEYS: [&str; 10] = [
    "train",
    "val",
    "test",
    "google_embeddings",
    "domain_embeddings",
    "syntax_vectors",
    "annotations",
    "model",
    "output_dir",
    "features_cache",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Full,
    MteVanilla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AccumulationKey {
    #[default]
    Antisymmetric,
    Sum,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: Preset,

    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub google_embeddings: Option<PathBuf>,
    pub domain_embeddings: Option<PathBuf>,
    pub syntax_vectors: Option<PathBuf>,
    pub syntax_dim: Option<usize>,
    pub annotations: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Feature dump from `extract-features`, reused by `train`.
    pub features_cache: Option<PathBuf>,

    pub mt_feats: Option<bool>,
    pub bleu_comp: Option<bool>,
    pub cosine_sim: Option<bool>,
    pub task_comment: Option<bool>,
    pub task_pair: Option<bool>,
    pub task_meta: Option<bool>,
    pub google: Option<bool>,
    pub domain: Option<bool>,
    pub syntax: Option<bool>,
    pub question_text: Option<QuestionText>,
    pub swap_mt_direction: Option<bool>,
    pub scale_embeddings: Option<bool>,
    pub nist_weighting: Option<NistWeighting>,

    pub variant: Option<Variant>,
    pub hidden: Option<usize>,
    pub net_seed: Option<u64>,

    pub epochs: Option<usize>,
    pub minibatch: Option<usize>,
    pub lambda: Option<f64>,
    pub decay: Option<f64>,
    pub eta: Option<f64>,
    pub train_seed: Option<u64>,
    pub shuffle: Option<bool>,
    pub selection: Option<Selection>,
    pub accumulation: AccumulationKey,

    pub cutoff: Option<usize>,
}

fn parse_override(item: &str) -> Result<(String, toml::Value), Error> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    // Anything that is not a TOML literal is taken as a bare string.
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

fn resolve_paths(table: &mut toml::Table, base: &Path) {
    for key in PATH_KEYS {
        if let Some(toml::Value::String(s)) = table.get_mut(key) {
            let p = Path::new(s.as_str());
            if p.is_relative() {
                *s = base.join(p).to_string_lossy().into_owned();
            }
        }
    }
}

impl RunConfig {
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, Error> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let mut t: toml::Table = toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                resolve_paths(&mut t, path.parent().unwrap_or(Path::new(".")));
                t
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (k, v) = parse_override(item)?;
            table.insert(k, v);
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    pub fn features(&self) -> FeatureConfig {
        let mut f = match self.preset {
            Preset::Full => FeatureConfig::default(),
            Preset::MteVanilla => FeatureConfig::mte_vanilla(),
        };
        let set = |dst: &mut bool, v: Option<bool>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut f.mt_feats, self.mt_feats);
        set(&mut f.bleu_comp, self.bleu_comp);
        set(&mut f.cosine_sim, self.cosine_sim);
        set(&mut f.task_comment, self.task_comment);
        set(&mut f.task_pair, self.task_pair);
        set(&mut f.task_meta, self.task_meta);
        set(&mut f.google, self.google);
        set(&mut f.domain, self.domain);
        set(&mut f.syntax, self.syntax);
        set(&mut f.swap_mt_direction, self.swap_mt_direction);
        set(&mut f.scale_embeddings, self.scale_embeddings);
        if let Some(q) = self.question_text {
            f.question_text = q;
        }
        if let Some(n) = self.nist_weighting {
            f.nist_weighting = n;
        }
        f
    }

    pub fn accumulation(&self) -> Accumulation {
        match self.accumulation {
            AccumulationKey::Antisymmetric => Accumulation::Antisymmetric,
            AccumulationKey::Sum => Accumulation::Sum,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let d = PipelineConfig::default();
        let t = TrainConfig::default();
        PipelineConfig {
            features: self.features(),
            variant: self.variant.unwrap_or(d.variant),
            hidden: self.hidden.unwrap_or(d.hidden),
            net_seed: self.net_seed.unwrap_or(d.net_seed),
            train: TrainConfig {
                epochs: self.epochs.unwrap_or(t.epochs),
                minibatch: self.minibatch.unwrap_or(t.minibatch),
                lambda: self.lambda.unwrap_or(t.lambda),
                decay: self.decay.unwrap_or(t.decay),
                eta: self.eta.unwrap_or(t.eta),
                seed: self.train_seed.unwrap_or(t.seed),
                shuffle: self.shuffle.unwrap_or(t.shuffle),
                selection: self.selection.unwrap_or(t.selection),
                accumulation: self.accumulation(),
            },
            cutoff: self.cutoff.unwrap_or(d.cutoff),
        }
    }

    /// Path under `key`, which must be set and exist.
    pub fn require(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf, Error> {
        let p = value
            .clone()
            .ok_or_else(|| Error::Config(format!("`{key}` is not set")))?;
        existing(key, p)
    }

    /// Checks toggles against supplied resources and that every referenced
    /// input path exists. Run before any compute.
    pub fn validate_resources(&self, features: &FeatureConfig) -> Result<(), Error> {
        if features.google {
            self.require("google_embeddings", &self.google_embeddings)?;
        }
        if features.domain {
            self.require("domain_embeddings", &self.domain_embeddings)?;
        }
        if features.syntax {
            self.require("syntax_vectors", &self.syntax_vectors)?;
            if self.syntax_dim.unwrap_or(0) == 0 {
                return Err(Error::Config("syntax enabled but `syntax_dim` is not set".into()));
            }
        }
        let inputs = [
            ("val", &self.val),
            ("test", &self.test),
            ("annotations", &self.annotations),
            ("features_cache", &self.features_cache),
        ];
        for (key, value) in inputs {
            if let Some(p) = value {
                existing(key, p.clone())?;
            }
        }
        let pc = self.pipeline();
        pc.train.validate()?;
        if pc.hidden == 0 || pc.cutoff == 0 {
            return Err(Error::Config("`hidden` and `cutoff` must be positive".into()));
        }
        Ok(())
    }
}

fn existing(key: &str, p: PathBuf) -> Result<PathBuf, Error> {
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::Config(format!("{key}: file not found: {}", p.display())))
    }
}
