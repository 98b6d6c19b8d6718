//! Seeded synthetic corpora for end-to-end checks.
//!
//! [`Signal::Lexical`]: Good comments take most of their words from the
//! question; Bad comments use a disjoint vocabulary. Every word has a
//! random unit vector in both embedding tables.
//!
//! [`Signal::StemOnly`]: question words end in `-ing`; Good comments reuse
//! the question stems with `-ed`, Bad comments use other stems with `-ed`.
//! No comment word matches a question word exactly and comment words have
//! no embeddings, so only the stem stage of METEOR-lite separates Good from
//! Bad. Lengths, positions and authors are distributed identically for both
//! labels.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Comment, GoldLabel, Question, Thread};
use crate::embeddings::EmbeddingTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Lexical,
    StemOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub signal: Signal,
    pub train_threads: usize,
    pub val_threads: usize,
    pub test_threads: usize,
    pub comments_per_thread: usize,
    pub question_words: usize,
    pub comment_words: usize,
    /// Words per comment taken from the question in Good comments.
    pub shared_words: usize,
    pub google_dim: usize,
    pub domain_dim: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 1,
            signal: Signal::Lexical,
            train_threads: 200,
            val_threads: 50,
            test_threads: 50,
            comments_per_thread: 10,
            question_words: 10,
            comment_words: 8,
            shared_words: 6,
            google_dim: 8,
            domain_dim: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Vec<Thread>,
    pub val: Vec<Thread>,
    pub test: Vec<Thread>,
    pub google: EmbeddingTable,
    pub domain: EmbeddingTable,
}

const POOL: usize = 400;
const LETTERS: &[u8] = b"bcdfghjklmnprstvz";

/// Pronounceable-enough distinct word of at least five letters.
fn word(kind: u8, i: usize) -> String {
    let mut s = String::new();
    s.push(kind as char);
    let mut n = i;
    for _ in 0..4 {
        s.push(LETTERS[n % LETTERS.len()] as char);
        n /= LETTERS.len();
        s.push('a');
    }
    s
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

struct Vocab {
    question: Vec<String>,
    filler: Vec<String>,
    bad: Vec<String>,
}

fn vocab() -> Vocab {
    Vocab {
        question: (0..POOL).map(|i| word(b'q', i)).collect(),
        filler: (0..POOL / 4).map(|i| word(b'f', i)).collect(),
        bad: (0..POOL).map(|i| word(b'x', i)).collect(),
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String], n: usize) -> Vec<&'a String> {
    pool.choose_multiple(rng, n).collect()
}

fn sentence(words: Vec<String>) -> String {
    format!("{}.", words.join(" "))
}

fn thread(cfg: &SyntheticConfig, v: &Vocab, rng: &mut ChaCha8Rng, id: &str) -> Thread {
    let (qsuffix, csuffix) = match cfg.signal {
        Signal::Lexical => ("", ""),
        Signal::StemOnly => ("ing", "ed"),
    };
    let qwords: Vec<&String> = pick(rng, &v.question, cfg.question_words);
    let question = Question {
        id: id.to_string(),
        subject: String::new(),
        body: sentence(qwords.iter().map(|w| format!("{w}{qsuffix}")).collect()),
        category: "synthetic".into(),
        author_id: "asker".into(),
        date: String::new(),
        attrs: Default::default(),
    };
    let n = cfg.comments_per_thread;
    let n_good = rng.gen_range(2..=n / 2);
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_good).collect();
    labels.shuffle(rng);
    let comments = labels
        .iter()
        .enumerate()
        .map(|(i, &good)| {
            let shared = cfg.shared_words.min(cfg.comment_words);
            let mut words: Vec<String> = if good {
                let mut w: Vec<String> = (0..shared)
                    .map(|_| format!("{}{csuffix}", qwords.choose(rng).expect("nonempty")))
                    .collect();
                w.extend(pick(rng, &v.filler, cfg.comment_words - shared).into_iter().map(|x| format!("{x}{csuffix}")));
                w
            } else {
                let mut w: Vec<String> = pick(rng, &v.bad, shared).into_iter().map(|x| format!("{x}{csuffix}")).collect();
                w.extend(pick(rng, &v.filler, cfg.comment_words - shared).into_iter().map(|x| format!("{x}{csuffix}")));
                w
            };
            words.shuffle(rng);
            Comment {
                id: format!("{id}_C{}", i + 1),
                position: 0,
                author_id: format!("user{}", rng.gen_range(0..50)),
                date: String::new(),
                body: sentence(words),
                gold_label: if good { GoldLabel::Good } else { GoldLabel::Bad },
                attrs: Default::default(),
            }
        })
        .collect();
    Thread::new(question, comments).expect("generated thread is valid")
}

fn table(name: &str, words: &BTreeSet<String>, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingTable {
    let entries: Vec<(String, Vec<f64>)> = words.iter().map(|w| (w.clone(), unit_vector(rng, dim))).collect();
    EmbeddingTable::from_entries(name, entries).expect("distinct words")
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let v = vocab();
    let mut split = |prefix: &str, n: usize| -> Vec<Thread> {
        (0..n).map(|i| thread(cfg, &v, &mut rng, &format!("{prefix}{i}"))).collect()
    };
    let train = split("TR", cfg.train_threads);
    let val = split("VA", cfg.val_threads);
    let test = split("TE", cfg.test_threads);

    let embedded: BTreeSet<String> = match cfg.signal {
        Signal::Lexical => v.question.iter().chain(&v.filler).chain(&v.bad).cloned().collect(),
        Signal::StemOnly => v.question.iter().map(|w| format!("{w}ing")).collect(),
    };
    let google = table("google", &embedded, cfg.google_dim, &mut rng);
    let domain = table("domain", &embedded, cfg.domain_dim, &mut rng);
    SyntheticData {
        train,
        val,
        test,
        google,
        domain,
    }
}
