//! Tokenization, sentence splitting, n-grams, a light stemmer and the
//! surface-pattern counters used by the task features.
//!
//! Pattern definitions (all counted on the raw text, split on whitespace
//! into chunks; trailing `.,;:!?)]"'>` is ignored when matching a chunk):
//!
//! | kind      | rule                                                              |
//! |-----------|-------------------------------------------------------------------|
//! | URL       | chunk starts with `http://`, `https://` or `www.`                 |
//! | Email     | chunk is `local@domain.tld`, every part `[A-Za-z0-9.]+`, tld alnum |
//! | Phone     | chunk made of digits and `-()+`, with at least 7 digits           |
//! | Image     | `<img ...>` tag, or chunk ending in `.jpg/.jpeg/.png/.gif`        |
//! | smileys   | substring counts of `:) :-) :D ;) =)` and `:( :-( :'( =(`         |
//! | runs      | maximal runs of `!` (or `?`) of length 1, 2, or 3 and longer      |
//! | thank     | case-insensitive substring count of `thank`                       |
//!
//! Chunks never span whitespace, so URL, Email and Phone counts are additive
//! over whitespace-separated concatenation.

use std::collections::HashMap;
use std::ops::Deref;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().map(Into::into).collect())
    }
}

const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];
const TRAILING_JUNK: &[char] = &['.', ',', ';', ':', '!', '?', ')', ']', '"', '\'', '>'];

fn is_url(s: &str) -> bool {
    let lower = s.to_ascii_lowercase();
    URL_PREFIXES.iter().any(|p| lower.starts_with(p))
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Lowercases, splits on whitespace and peels leading and trailing
/// punctuation runs off each chunk as separate tokens. URLs and
/// emails stay whole.
pub fn tokenize(text: &str) -> TokenSeq {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for chunk in lower.split_whitespace() {
        let lead_end = chunk
            .char_indices()
            .find(|&(_, c)| !is_punct(c))
            .map_or(chunk.len(), |(i, _)| i);
        if lead_end == chunk.len() {
            out.push(chunk.to_string());
            continue;
        }
        if lead_end > 0 {
            out.push(chunk[..lead_end].to_string());
        }
        let rest = &chunk[lead_end..];
        let core = if is_url(rest) {
            rest.trim_end_matches(TRAILING_JUNK)
        } else {
            rest.trim_end_matches(is_punct)
        };
        out.push(core.to_string());
        if core.len() < rest.len() {
            out.push(rest[core.len()..].to_string());
        }
    }
    TokenSeq(out)
}

/// Splits after any whitespace-delimited word ending in `.`, `!` or `?`.
/// Sentences are re-joined with single spaces.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for word in text.split_whitespace() {
        current.push(word);
        if word.ends_with(['.', '!', '?']) {
            out.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        out.push(current.join(" "));
    }
    out
}

/// Sliding-window n-gram multiset borrowing from the token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts<'a> {
    pub n: usize,
    pub counts: HashMap<&'a [String], usize>,
}

impl<'a> NGramCounts<'a> {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn get(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

pub fn ngrams(tokens: &[String], n: usize) -> Result<NGramCounts<'_>> {
    if n == 0 {
        return Err(Error::Argument("n-gram order must be at least 1".into()));
    }
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    Ok(NGramCounts { n, counts })
}

const SUFFIXES: [&str; 5] = ["ing", "ed", "es", "ly", "s"];

/// Strips the longest suffix among `ing, ed, es, ly, s` whose removal
/// leaves at least three characters.
pub fn stem_light(token: &str) -> String {
    let len = token.chars().count();
    for suffix in SUFFIXES {
        if let Some(rest) = token.strip_suffix(suffix) {
            if len - suffix.chars().count() >= 3 {
                return rest.to_string();
            }
        }
    }
    token.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Url,
    Email,
    Phone,
    Image,
    PositiveSmiley,
    NegativeSmiley,
    /// Runs of `!` of length k; k = 3 collects runs of three or more.
    ExclamationRun(u8),
    InterrogationRun(u8),
    ThankSubstring,
}

pub const POSITIVE_SMILEYS: [&str; 5] = [":)", ":-)", ":D", ";)", "=)"];
pub const NEGATIVE_SMILEYS: [&str; 4] = [":(", ":-(", ":'(", "=("];
const IMAGE_EXTS: [&str; 4] = [".jpg", ".jpeg", ".png", ".gif"];

fn is_email(chunk: &str) -> bool {
    let part_ok = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '.');
    let Some((local, domain)) = chunk.split_once('@') else {
        return false;
    };
    let Some((host, tld)) = domain.rsplit_once('.') else {
        return false;
    };
    part_ok(local) && part_ok(host) && !tld.is_empty() && tld.chars().all(|c| c.is_ascii_alphanumeric())
}

fn is_phone(chunk: &str) -> bool {
    let chunk = chunk.trim_end_matches(['.', ',', ';', ':', '!', '?']);
    let mut digits = 0;
    for c in chunk.chars() {
        match c {
            '0'..='9' => digits += 1,
            '-' | '(' | ')' | '+' => {}
            _ => return false,
        }
    }
    digits >= 7
}

/// Lengths of maximal runs of `target`.
fn runs(text: &str, target: char) -> impl Iterator<Item = usize> + '_ {
    let mut chars = text.chars().peekable();
    std::iter::from_fn(move || loop {
        let c = chars.next()?;
        if c == target {
            let mut len = 1;
            while chars.peek() == Some(&target) {
                chars.next();
                len += 1;
            }
            return Some(len);
        }
    })
}

/// Removes `<img ...>` tags, returning the remainder and the tag count.
fn strip_img_tags(text: &str) -> (String, usize) {
    let lower = text.to_ascii_lowercase();
    let mut out = String::with_capacity(text.len());
    let mut count = 0;
    let mut pos = 0;
    while let Some(start) = lower[pos..].find("<img") {
        let start = pos + start;
        out.push_str(&text[pos..start]);
        count += 1;
        match lower[start..].find('>') {
            Some(end) => pos = start + end + 1,
            None => {
                pos = text.len();
                break;
            }
        }
        out.push(' ');
    }
    out.push_str(&text[pos..]);
    (out, count)
}

pub fn count_pattern(text: &str, kind: PatternKind) -> usize {
    let chunks = || {
        text.split_whitespace()
            .map(|c| c.trim_start_matches(['(', '[', '"', '\'', '<']))
    };
    match kind {
        PatternKind::Url => chunks().filter(|c| is_url(c)).count(),
        PatternKind::Email => chunks()
            .filter(|c| is_email(c.trim_end_matches(TRAILING_JUNK)))
            .count(),
        PatternKind::Phone => chunks().filter(|c| is_phone(c)).count(),
        PatternKind::Image => {
            let (rest, tags) = strip_img_tags(text);
            let files = rest
                .split_whitespace()
                .filter(|c| {
                    let c = c.trim_end_matches(TRAILING_JUNK).to_ascii_lowercase();
                    IMAGE_EXTS.iter().any(|ext| c.ends_with(ext) && c.len() > ext.len())
                })
                .count();
            tags + files
        }
        PatternKind::PositiveSmiley => POSITIVE_SMILEYS
            .iter()
            .map(|s| text.matches(s).count())
            .sum(),
        PatternKind::NegativeSmiley => NEGATIVE_SMILEYS
            .iter()
            .map(|s| text.matches(s).count())
            .sum(),
        PatternKind::ExclamationRun(k) => count_runs(text, '!', k),
        PatternKind::InterrogationRun(k) => count_runs(text, '?', k),
        PatternKind::ThankSubstring => text.to_lowercase().matches("thank").count(),
    }
}

fn count_runs(text: &str, target: char, k: u8) -> usize {
    let k = k as usize;
    runs(text, target)
        .filter(|&len| if k >= 3 { len >= 3 } else { len == k })
        .count()
}

/// A sentence is interrogative when its final punctuation run contains `?`.
pub fn is_interrogative(sentence: &str) -> bool {
    sentence
        .trim_end()
        .chars()
        .rev()
        .take_while(|&c| is_punct(c) && !c.is_whitespace())
        .any(|c| c == '?')
}
