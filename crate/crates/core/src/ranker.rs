//! Per-thread comment rankings: pairwise score accumulation, the
//! classification variant, and the chronological and random baselines.
//!
//! Pairwise accumulation gives comment i the score
//! `s_i = sum_{j != i} (f(i, j) - f(j, i))`, which cancels any constant
//! offset in `f`; [`Accumulation::Sum`] uses `sum_{j != i} f(i, j)` instead.
//! Equal scores keep the original comment order.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::Thread;
use crate::error::{Error, Result};
use crate::network::{NetParams, PairInput, SingleInput, Variant};
use crate::trainer::ThreadData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pairwise,
    Classification,
    BaselineTime,
    BaselineRandom(u64),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Pairwise => f.write_str("pairwise"),
            Method::Classification => f.write_str("classification"),
            Method::BaselineTime => f.write_str("baseline-time"),
            Method::BaselineRandom(seed) => write!(f, "baseline-random-{seed}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise" => Ok(Method::Pairwise),
            "classification" => Ok(Method::Classification),
            "baseline-time" => Ok(Method::BaselineTime),
            "baseline-random" => Ok(Method::BaselineRandom(0)),
            _ => s
                .strip_prefix("baseline-random-")
                .and_then(|n| n.parse().ok())
                .map(Method::BaselineRandom)
                .ok_or_else(|| Error::Argument(format!("unknown ranking method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accumulation {
    #[default]
    Antisymmetric,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedComment {
    pub comment_id: String,
    pub score: f64,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedThread {
    pub thread_id: String,
    pub comments: Vec<RankedComment>,
    pub method: Method,
}

/// Sorts by score descending, ties by position ascending.
pub fn rank_by_scores(
    thread_id: &str,
    comments: impl IntoIterator<Item = (String, usize)>,
    scores: &[f64],
    method: Method,
) -> RankedThread {
    let mut ranked: Vec<RankedComment> = comments
        .into_iter()
        .zip(scores)
        .map(|((comment_id, position), &score)| RankedComment {
            comment_id,
            score,
            position,
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.position.cmp(&b.position)));
    RankedThread {
        thread_id: thread_id.to_string(),
        comments: ranked,
        method,
    }
}

/// Comment scores from a pair scorer `f(i, j)`, called once per ordered
/// pair.
pub fn accumulate<F>(n: usize, mode: Accumulation, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let mut scores = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = f(i, j)?;
            scores[i] += v;
            if mode == Accumulation::Antisymmetric {
                scores[j] -= v;
            }
        }
    }
    Ok(scores)
}

fn id_positions(data: &ThreadData) -> impl Iterator<Item = (String, usize)> + '_ {
    data.comments.iter().map(|c| (c.id.clone(), c.position))
}

pub fn pairwise_scores(params: &NetParams, data: &ThreadData, mode: Accumulation) -> Result<Vec<f64>> {
    let cs = &data.comments;
    accumulate(cs.len(), mode, |i, j| {
        let input = PairInput {
            xq: &data.question_input,
            xc1: &cs[i].input,
            xc2: &cs[j].input,
            psi1: &cs[i].skip,
            psi2: &cs[j].skip,
        };
        Ok(params.forward(&input)?.output)
    })
}

pub fn classification_scores(params: &NetParams, data: &ThreadData) -> Result<Vec<f64>> {
    data.comments
        .iter()
        .map(|c| {
            params.forward_classify(&SingleInput {
                xq: &data.question_input,
                xc: &c.input,
                psi: &c.skip,
            })
        })
        .collect()
}

/// Scores comments with whichever variant `params` is.
pub fn model_scores(params: &NetParams, data: &ThreadData, mode: Accumulation) -> Result<Vec<f64>> {
    match params.config.variant {
        Variant::Pairwise => pairwise_scores(params, data, mode),
        Variant::Classification => classification_scores(params, data),
    }
}

pub fn score_pairwise(params: &NetParams, data: &ThreadData, mode: Accumulation) -> Result<RankedThread> {
    if params.config.variant != Variant::Pairwise {
        return Err(Error::Model("pairwise ranking needs a pairwise model".into()));
    }
    let scores = pairwise_scores(params, data, mode)?;
    Ok(rank_by_scores(&data.thread_id, id_positions(data), &scores, Method::Pairwise))
}

pub fn score_classification(params: &NetParams, data: &ThreadData) -> Result<RankedThread> {
    if params.config.variant != Variant::Classification {
        return Err(Error::Model("classification ranking needs a classification model".into()));
    }
    let scores = classification_scores(params, data)?;
    Ok(rank_by_scores(
        &data.thread_id,
        id_positions(data),
        &scores,
        Method::Classification,
    ))
}

pub fn baseline_time(thread: &Thread) -> RankedThread {
    let scores: Vec<f64> = thread.comments.iter().map(|c| 1.0 / c.position as f64).collect();
    rank_by_scores(
        thread.id(),
        thread.comments.iter().map(|c| (c.id.clone(), c.position)),
        &scores,
        Method::BaselineTime,
    )
}

fn thread_rng(thread_id: &str, seed: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(thread_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Uniform random order, fixed by `(thread_id, seed)`. The comment placed
/// at rank r (from 1) gets score `n - r + 1`.
pub fn baseline_random(thread: &Thread, seed: u64) -> RankedThread {
    let n = thread.comments.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut thread_rng(thread.id(), seed));
    let comments = order
        .iter()
        .enumerate()
        .map(|(r, &i)| RankedComment {
            comment_id: thread.comments[i].id.clone(),
            score: (n - r) as f64,
            position: thread.comments[i].position,
        })
        .collect();
    RankedThread {
        thread_id: thread.id().to_string(),
        comments,
        method: Method::BaselineRandom(seed),
    }
}

/// One line per comment: `qid \t cid \t rank \t score \t method`.
pub fn write_rankings<W: Write>(rankings: &[RankedThread], mut out: W) -> Result<()> {
    for t in rankings {
        for (r, c) in t.comments.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                t.thread_id,
                c.comment_id,
                r + 1,
                c.score,
                t.method
            )?;
        }
    }
    Ok(())
}

/// Reads ranking lines back, grouping consecutive lines by question id and
/// method; within a group lines are ordered by their rank column. The
/// position field is not stored in the file and is set to the rank.
pub fn read_rankings<R: BufRead>(input: R) -> Result<Vec<RankedThread>> {
    let mut out: Vec<RankedThread> = Vec::new();
    let mut ranks: Vec<Vec<usize>> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Record {
            line: idx + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 tab-separated fields, got {}", f.len())));
        }
        let rank: usize = f[2].parse().map_err(|_| bad(format!("bad rank {:?}", f[2])))?;
        let score: f64 = f[3].parse().map_err(|_| bad(format!("bad score {:?}", f[3])))?;
        let method: Method = f[4].parse()?;
        let same = out
            .last()
            .is_some_and(|t| t.thread_id == f[0] && t.method == method);
        if !same {
            out.push(RankedThread {
                thread_id: f[0].to_string(),
                comments: Vec::new(),
                method,
            });
            ranks.push(Vec::new());
        }
        out.last_mut().expect("pushed").comments.push(RankedComment {
            comment_id: f[1].to_string(),
            score,
            position: rank,
        });
        ranks.last_mut().expect("pushed").push(rank);
    }
    for (t, r) in out.iter_mut().zip(&ranks) {
        let mut idx: Vec<usize> = (0..r.len()).collect();
        idx.sort_by_key(|&i| r[i]);
        t.comments = idx.iter().map(|&i| t.comments[i].clone()).collect();
    }
    Ok(out)
}
