//! Sentence-level MT evaluation metrics, comparing a hypothesis (the
//! comment) against a single reference (the question).

use std::collections::HashMap;

use crate::textproc::{ngrams, stem_light};

pub const BLEU_ORDER: usize = 4;
pub const NIST_ORDER: usize = 5;
/// Longest block TER will consider shifting.
pub const TER_MAX_SHIFT: usize = 10;

const METEOR_ALPHA: f64 = 0.9;
const METEOR_GAMMA: f64 = 0.5;
const METEOR_BETA: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BleuComponents {
    /// Raw clipped precisions; 0 where `totals[n] == 0`.
    pub precisions: [f64; BLEU_ORDER],
    pub matches: [usize; BLEU_ORDER],
    pub totals: [usize; BLEU_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
    pub length_ratio: f64,
    pub brevity_penalty: f64,
    pub bleu: f64,
}

impl BleuComponents {
    /// Flattened in feature order: p1..p4, m1..m4, t1..t4, hyp_len,
    /// ref_len, ratio, bp.
    pub fn to_features(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for n in 0..BLEU_ORDER {
            out[n] = self.precisions[n];
            out[4 + n] = self.matches[n] as f64;
            out[8 + n] = self.totals[n] as f64;
        }
        out[12] = self.hyp_len as f64;
        out[13] = self.ref_len as f64;
        out[14] = self.length_ratio;
        out[15] = self.brevity_penalty;
        out
    }
}

/// Number of hypothesis n-grams also found in the reference, each type
/// clipped to its reference count.
fn clipped_matches(hyp: &[String], reference: &[String], n: usize) -> usize {
    let h = ngrams(hyp, n).expect("n >= 1");
    let r = ngrams(reference, n).expect("n >= 1");
    h.counts
        .iter()
        .map(|(gram, &c)| c.min(r.get(gram)))
        .sum()
}

/// Smoothed sentence BLEU. Orders with no hypothesis n-grams are left out
/// of the geometric mean; zero precisions elsewhere become `1/(2*total)`.
/// An empty hypothesis scores 0 with a brevity penalty of 0.
pub fn bleu_components(hyp: &[String], reference: &[String]) -> BleuComponents {
    let hyp_len = hyp.len();
    let ref_len = reference.len();
    let mut precisions = [0.0; BLEU_ORDER];
    let mut matches = [0; BLEU_ORDER];
    let mut totals = [0; BLEU_ORDER];
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 1..=BLEU_ORDER {
        let total = (hyp_len + 1).saturating_sub(n);
        let m = clipped_matches(hyp, reference, n);
        totals[n - 1] = total;
        matches[n - 1] = m;
        if total > 0 {
            let p = m as f64 / total as f64;
            precisions[n - 1] = p;
            let smoothed = if m == 0 { 1.0 / (2.0 * total as f64) } else { p };
            log_sum += smoothed.ln();
            orders += 1;
        }
    }
    let length_ratio = if ref_len == 0 {
        0.0
    } else {
        hyp_len as f64 / ref_len as f64
    };
    let (brevity_penalty, bleu) = if hyp_len == 0 {
        (0.0, 0.0)
    } else {
        let bp = if hyp_len < ref_len {
            (1.0 - ref_len as f64 / hyp_len as f64).exp()
        } else {
            1.0
        };
        (bp, bp * (log_sum / orders as f64).exp())
    };
    BleuComponents {
        precisions,
        matches,
        totals,
        hyp_len,
        ref_len,
        length_ratio,
        brevity_penalty,
        bleu: bleu.min(brevity_penalty),
    }
}

/// N-gram counts pooled over one or more references, used for NIST
/// information weights.
#[derive(Debug, Clone, Default)]
pub struct NistStats {
    counts: HashMap<Vec<String>, usize>,
    words: usize,
    max_n: usize,
}

impl NistStats {
    pub fn new(max_n: usize) -> Self {
        NistStats {
            counts: HashMap::new(),
            words: 0,
            max_n,
        }
    }

    pub fn from_references<'a, I>(refs: I, max_n: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut stats = NistStats::new(max_n);
        for r in refs {
            stats.add(r);
        }
        stats
    }

    pub fn add(&mut self, reference: &[String]) {
        self.words += reference.len();
        for n in 1..=self.max_n {
            for w in reference.windows(n) {
                *self.counts.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
    }

    fn count(&self, gram: &[String]) -> usize {
        if gram.is_empty() {
            self.words
        } else {
            self.counts.get(gram).copied().unwrap_or(0)
        }
    }

    /// `log2(count(prefix) / count(gram))`, 0 for unseen grams.
    pub fn info(&self, gram: &[String]) -> f64 {
        let c = self.count(gram);
        if c == 0 {
            return 0.0;
        }
        let prefix = self.count(&gram[..gram.len() - 1]);
        (prefix as f64 / c as f64).log2()
    }
}

/// NIST with information weights taken from the reference itself.
pub fn nist(hyp: &[String], reference: &[String], max_n: usize) -> f64 {
    let stats = NistStats::from_references([reference], max_n);
    nist_with_stats(hyp, reference, max_n, &stats)
}

pub fn nist_with_stats(hyp: &[String], reference: &[String], max_n: usize, stats: &NistStats) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut score = 0.0;
    for n in 1..=max_n {
        let h = ngrams(hyp, n).expect("n >= 1");
        let total = h.total();
        if total == 0 {
            continue;
        }
        let r = ngrams(reference, n).expect("n >= 1");
        let gained: f64 = h
            .counts
            .iter()
            .map(|(gram, &c)| c.min(r.get(gram)) as f64 * stats.info(gram))
            .sum();
        score += gained / total as f64;
    }
    let ratio = (hyp.len() as f64 / reference.len() as f64).min(1.0);
    score * nist_brevity(ratio)
}

/// `exp(beta * ln(ratio)^2)` with beta set so the factor is 0.5 at 2/3.
fn nist_brevity(ratio: f64) -> f64 {
    let beta = 0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2);
    (beta * ratio.ln().powi(2)).exp()
}

/// Unit-cost Levenshtein distance over tokens.
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// For each reference position, the hypothesis position it is exactly
/// matched to along one minimum-cost edit path.
fn exact_alignment(hyp: &[String], reference: &[String]) -> Vec<Option<usize>> {
    let (n, m) = (hyp.len(), reference.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(hyp[i - 1] != reference[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut out = vec![None; m];
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        let same = hyp[i - 1] == reference[j - 1];
        if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
            if same {
                out[j - 1] = Some(i - 1);
            }
            i -= 1;
            j -= 1;
        } else if d[i][j] == d[i - 1][j] + 1 {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out
}

fn apply_shift(hyp: &[String], start: usize, len: usize, dest: usize) -> Vec<String> {
    let seg = &hyp[start..start + len];
    let mut rest: Vec<String> = hyp[..start].to_vec();
    rest.extend_from_slice(&hyp[start + len..]);
    // `dest` is an insertion point in the original indexing.
    let at = if dest > start { dest - len } else { dest };
    let mut out = rest[..at].to_vec();
    out.extend_from_slice(seg);
    out.extend_from_slice(&rest[at..]);
    out
}

/// Result of the greedy TER search.
#[derive(Debug, Clone, PartialEq)]
pub struct TerAlignment {
    pub edits: usize,
    pub shifts: usize,
    pub shifted_hyp: Vec<String>,
}

/// Greedy block-shift search: at each round, try every misaligned
/// hypothesis block (up to [`TER_MAX_SHIFT`] tokens) that exactly matches a
/// reference span, moved next to the hypothesis words aligned with that
/// span's neighbours, and keep the one with the lowest resulting edit
/// distance. Stops when no shift strictly lowers it.
pub fn ter_alignment(hyp: &[String], reference: &[String], allow_shifts: bool) -> TerAlignment {
    let mut cur = hyp.to_vec();
    let mut edits = edit_distance(&cur, reference);
    let mut shifts = 0;
    while allow_shifts && edits > 0 {
        let r2h = exact_alignment(&cur, reference);
        let mut best: Option<(usize, Vec<String>)> = None;
        for start in 0..cur.len() {
            for len in 1..=TER_MAX_SHIFT.min(cur.len() - start) {
                let seg = &cur[start..start + len];
                let spans: Vec<usize> = reference
                    .windows(len)
                    .enumerate()
                    .filter(|(_, w)| *w == seg)
                    .map(|(j, _)| j)
                    .collect();
                if spans.is_empty() {
                    break;
                }
                for j in spans {
                    if (0..len).all(|t| r2h[j + t] == Some(start + t)) {
                        continue;
                    }
                    let after_prev = r2h[..j]
                        .iter()
                        .rev()
                        .find_map(|h| *h)
                        .map_or(0, |h| h + 1);
                    let before_next = r2h[j + len..]
                        .iter()
                        .find_map(|h| *h)
                        .unwrap_or(cur.len());
                    for dest in [after_prev, before_next] {
                        if (start..=start + len).contains(&dest) {
                            continue;
                        }
                        let moved = apply_shift(&cur, start, len, dest);
                        let e = edit_distance(&moved, reference);
                        if best.as_ref().is_none_or(|(b, _)| e < *b) {
                            best = Some((e, moved));
                        }
                    }
                }
            }
        }
        match best {
            Some((e, moved)) if e < edits => {
                edits = e;
                cur = moved;
                shifts += 1;
            }
            _ => break,
        }
    }
    TerAlignment {
        edits,
        shifts,
        shifted_hyp: cur,
    }
}

/// Translation edit rate: `(edits + shifts) / ref_len`. An empty reference
/// divides by 1 instead.
pub fn ter(hyp: &[String], reference: &[String], allow_shifts: bool) -> f64 {
    let denom = reference.len().max(1) as f64;
    if !allow_shifts {
        return edit_distance(hyp, reference) as f64 / denom;
    }
    let a = ter_alignment(hyp, reference, allow_shifts);
    (a.edits + a.shifts) as f64 / denom
}

/// Aligns unaligned tokens by repeatedly taking the longest common run
/// under `key`, earliest hypothesis position first.
fn align_stage<F>(
    hyp: &[String],
    reference: &[String],
    hyp_used: &mut [bool],
    ref_used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
    key: F,
) where
    F: Fn(&str) -> String,
{
    let hk: Vec<String> = hyp.iter().map(|t| key(t)).collect();
    let rk: Vec<String> = reference.iter().map(|t| key(t)).collect();
    loop {
        let mut best = (0, 0, 0);
        for i in 0..hk.len() {
            for j in 0..rk.len() {
                let mut l = 0;
                while i + l < hk.len()
                    && j + l < rk.len()
                    && !hyp_used[i + l]
                    && !ref_used[j + l]
                    && hk[i + l] == rk[j + l]
                {
                    l += 1;
                }
                if l > best.2 {
                    best = (i, j, l);
                }
            }
        }
        let (i, j, l) = best;
        if l == 0 {
            return;
        }
        for t in 0..l {
            hyp_used[i + t] = true;
            ref_used[j + t] = true;
            pairs.push((i + t, j + t));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeteorAlignment {
    pub matches: usize,
    pub chunks: usize,
}

pub fn meteor_alignment(hyp: &[String], reference: &[String]) -> MeteorAlignment {
    let mut hyp_used = vec![false; hyp.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    align_stage(hyp, reference, &mut hyp_used, &mut ref_used, &mut pairs, |t| t.to_string());
    align_stage(hyp, reference, &mut hyp_used, &mut ref_used, &mut pairs, stem_light);
    pairs.sort_unstable();
    let chunks = pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
        + usize::from(!pairs.is_empty());
    MeteorAlignment {
        matches: pairs.len(),
        chunks,
    }
}

/// METEOR with exact and stem matching only (no paraphrase stage).
pub fn meteor_lite(hyp: &[String], reference: &[String]) -> f64 {
    let a = meteor_alignment(hyp, reference);
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / hyp.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (a.chunks as f64 / m).powf(METEOR_BETA);
    fmean * (1.0 - penalty)
}

/// Clipped unigram precision and recall.
pub fn unigram_pr(hyp: &[String], reference: &[String]) -> (f64, f64) {
    let m = clipped_matches(hyp, reference, 1) as f64;
    let p = if hyp.is_empty() { 0.0 } else { m / hyp.len() as f64 };
    let r = if reference.is_empty() {
        0.0
    } else {
        m / reference.len() as f64
    };
    (p, r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricBundle {
    pub bleu: f64,
    pub nist: f64,
    pub ter: f64,
    pub meteor_lite: f64,
    pub unigram_precision: f64,
    pub unigram_recall: f64,
}

impl MetricBundle {
    pub fn to_features(&self) -> [f64; 6] {
        [
            self.bleu,
            self.nist,
            self.ter,
            self.meteor_lite,
            self.unigram_precision,
            self.unigram_recall,
        ]
    }
}

pub fn metric_bundle(hyp: &[String], reference: &[String]) -> MetricBundle {
    metric_bundle_with(hyp, reference, &bleu_components(hyp, reference), None)
}

/// Bundle reusing precomputed BLEU components and optional pooled NIST
/// statistics.
pub fn metric_bundle_with(
    hyp: &[String],
    reference: &[String],
    bleu: &BleuComponents,
    nist_stats: Option<&NistStats>,
) -> MetricBundle {
    let (unigram_precision, unigram_recall) = unigram_pr(hyp, reference);
    MetricBundle {
        bleu: bleu.bleu,
        nist: match nist_stats {
            Some(s) => nist_with_stats(hyp, reference, NIST_ORDER, s),
            None => nist(hyp, reference, NIST_ORDER),
        },
        ter: ter(hyp, reference, true),
        meteor_lite: meteor_lite(hyp, reference),
        unigram_precision,
        unigram_recall,
    }
}

/// One tab-separated line in the `score-metrics` column order.
pub fn score_line(hyp: &[String], reference: &[String]) -> String {
    let b = bleu_components(hyp, reference);
    let m = metric_bundle_with(hyp, reference, &b, None);
    let mut cols = vec![b.bleu];
    cols.extend(b.to_features());
    cols.extend([m.nist, m.ter, m.meteor_lite, m.unigram_precision, m.unigram_recall]);
    cols.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join("\t")
}

pub const SCORE_COLUMNS: [&str; 22] = [
    "bleu", "p1", "p2", "p3", "p4", "m1", "m2", "m3", "m4", "t1", "t2", "t3", "t4", "hyp_len",
    "ref_len", "ratio", "bp", "nist", "ter", "meteor_lite", "uP", "uR",
];
