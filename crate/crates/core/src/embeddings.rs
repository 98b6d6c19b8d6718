//! Word-embedding tables, mean pooling, cosine similarity and the
//! precomputed per-text vector sidecar.
//!
//! Table format: an optional header `<vocab_size> <dim>`, then one
//! `<word> v1 .. vd` per line. Sidecar format: `<text-id> v1 .. vd`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VectorSource {
    WordAverage(String),
    SyntaxSidecar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextVector {
    pub values: Vec<f64>,
    pub source: VectorSource,
}

impl TextVector {
    pub fn zeros(dim: usize, source: VectorSource) -> Self {
        TextVector {
            values: vec![0.0; dim],
            source,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub name: String,
    pub dim: usize,
    vocab: HashMap<String, Vec<f64>>,
    /// Rows that replaced an earlier row for the same word.
    pub duplicate_rows: usize,
}

fn parse_values(
    fields: &[&str],
    path: &str,
    line: usize,
) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format {
                    path: path.to_string(),
                    line,
                    message: format!("not a finite number: {f:?}"),
                })
        })
        .collect()
}

impl EmbeddingTable {
    pub fn from_entries<I>(name: &str, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut vocab = HashMap::new();
        let mut dim = None;
        let mut duplicate_rows = 0;
        for (word, vec) in entries {
            let d = *dim.get_or_insert(vec.len());
            if vec.len() != d || d == 0 {
                return Err(Error::Argument(format!(
                    "embedding for {word:?} has dimension {}, expected {d}",
                    vec.len()
                )));
            }
            if vocab.insert(word, vec).is_some() {
                duplicate_rows += 1;
            }
        }
        let dim = dim.ok_or_else(|| Error::Argument("empty embedding table".into()))?;
        Ok(EmbeddingTable {
            name: name.to_string(),
            dim,
            vocab,
            duplicate_rows,
        })
    }

    pub fn parse(name: &str, text: &str, path: &str) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut vocab = HashMap::new();
        let mut duplicate_rows = 0;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 {
                if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    dim = Some(d);
                    continue;
                }
            }
            let values = parse_values(&fields[1..], path, line_no)?;
            let d = *dim.get_or_insert(values.len());
            if values.len() != d || d == 0 {
                return Err(Error::Format {
                    path: path.to_string(),
                    line: line_no,
                    message: format!("expected {d} values, found {}", values.len()),
                });
            }
            if vocab.insert(fields[0].to_string(), values).is_some() {
                duplicate_rows += 1;
            }
        }
        let dim = match dim {
            Some(d) if !vocab.is_empty() => d,
            _ => {
                return Err(Error::Format {
                    path: path.to_string(),
                    line: 0,
                    message: "embedding file has no vectors".into(),
                })
            }
        };
        Ok(EmbeddingTable {
            name: name.to_string(),
            dim,
            vocab,
            duplicate_rows,
        })
    }

    pub fn load(name: &str, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(name, &text, &path.display().to_string())
    }

    /// Text format accepted by [`EmbeddingTable::parse`], words sorted.
    pub fn write<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let mut words: Vec<&String> = self.vocab.keys().collect();
        words.sort();
        writeln!(out, "{} {}", words.len(), self.dim)?;
        for w in words {
            write!(out, "{w}")?;
            for v in &self.vocab[w] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vocab.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Mean of in-vocabulary word vectors; zeros when nothing is known.
    pub fn embed(&self, tokens: &[String]) -> TextVector {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for v in tokens.iter().filter_map(|t| self.get(t)) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            n += 1;
        }
        if n > 0 {
            for a in &mut acc {
                *a /= n as f64;
            }
        }
        TextVector {
            values: acc,
            source: VectorSource::WordAverage(self.name.clone()),
        }
    }

    pub fn oov_count(&self, tokens: &[String]) -> usize {
        tokens.iter().filter(|t| !self.contains(t)).count()
    }
}

pub fn embed_text(tokens: &[String], table: &EmbeddingTable) -> TextVector {
    table.embed(tokens)
}

pub fn oov_count(tokens: &[String], table: &EmbeddingTable) -> usize {
    table.oov_count(tokens)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Precomputed per-text vectors keyed by question or comment id.
#[derive(Debug)]
pub struct SidecarVectors {
    pub dim: usize,
    map: HashMap<String, Vec<f64>>,
    pub duplicate_rows: usize,
    misses: AtomicUsize,
}

impl Clone for SidecarVectors {
    fn clone(&self) -> Self {
        SidecarVectors {
            dim: self.dim,
            map: self.map.clone(),
            duplicate_rows: self.duplicate_rows,
            misses: AtomicUsize::new(self.misses.load(Ordering::Relaxed)),
        }
    }
}

impl SidecarVectors {
    pub fn parse(text: &str, expected_dim: usize, path: &str) -> Result<Self> {
        let mut map = HashMap::new();
        let mut duplicate_rows = 0;
        for (idx, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let values = parse_values(&fields[1..], path, idx + 1)?;
            if values.len() != expected_dim {
                return Err(Error::Format {
                    path: path.to_string(),
                    line: idx + 1,
                    message: format!(
                        "vector for {} has {} values, expected {expected_dim}",
                        fields[0],
                        values.len()
                    ),
                });
            }
            if map.insert(fields[0].to_string(), values).is_some() {
                duplicate_rows += 1;
            }
        }
        Ok(SidecarVectors {
            dim: expected_dim,
            map,
            duplicate_rows,
            misses: AtomicUsize::new(0),
        })
    }

    pub fn load(path: &Path, expected_dim: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("syntax sidecar {}: {e}", path.display()))
        })?;
        Self::parse(&text, expected_dim, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Vector for `id`, or zeros (counted as a miss) when absent.
    pub fn get(&self, id: &str) -> TextVector {
        match self.map.get(id) {
            Some(v) => TextVector {
                values: v.clone(),
                source: VectorSource::SyntaxSidecar,
            },
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                TextVector::zeros(self.dim, VectorSource::SyntaxSidecar)
            }
        }
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

pub fn load_sidecar_vectors(path: &Path, expected_dim: usize) -> Result<SidecarVectors> {
    SidecarVectors::load(path, expected_dim)
}

pub fn load_table(name: &str, path: &Path) -> Result<EmbeddingTable> {
    EmbeddingTable::load(name, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::parse("t", "a 1 0\nb 0 1\n", "mem").unwrap()
    }

    #[test]
    fn load_examples() {
        let t = EmbeddingTable::parse("g", "x 1 2 3\ny 4 5 6\n", "f").unwrap();
        assert_eq!((t.len(), t.dim), (2, 3));
        match EmbeddingTable::parse("g", "x 1 2 3\ny 4 5\n", "f") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let t = EmbeddingTable::parse("g", "1000 3\nx 1 2 3\n", "f").unwrap();
        assert_eq!(t.dim, 3);
        match EmbeddingTable::parse("g", "2 3\nx 1 2\n", "f") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(EmbeddingTable::parse("g", "", "f").is_err());
        let t = EmbeddingTable::parse("g", "x 1\nx 2\n", "f").unwrap();
        assert_eq!(t.duplicate_rows, 1);
        assert_eq!(t.get("x").unwrap(), &[2.0]);
    }

    #[test]
    fn write_roundtrip() {
        let t = EmbeddingTable::parse("g", "y 0.1 -2\nx 1e-300 3\n", "f").unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("2 2\nx "));
        let back = EmbeddingTable::parse("g", &text, "f").unwrap();
        assert_eq!(back.get("x"), t.get("x"));
        assert_eq!(back.get("y"), t.get("y"));
    }

    #[test]
    fn embed_examples() {
        let t = table();
        assert_eq!(t.embed(&toks("a b")).values, vec![0.5, 0.5]);
        assert_eq!(t.embed(&toks("zz qq")).values, vec![0.0, 0.0]);
        let t2 = EmbeddingTable::parse("t", "a 2 4\n", "m").unwrap();
        assert_eq!(t2.embed(&toks("a a")).values, vec![2.0, 4.0]);
        assert_eq!(
            t.embed(&toks("a")).source,
            VectorSource::WordAverage("t".into())
        );
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn oov_examples() {
        let t = table();
        assert_eq!(t.oov_count(&toks("a b")), 0);
        assert_eq!(t.oov_count(&toks("a zz")), 1);
        assert_eq!(t.oov_count(&[]), 0);
    }

    #[test]
    fn sidecar_examples() {
        let line = |id: &str| format!("{id} {}\n", vec!["0.5"; 25].join(" "));
        let text = format!("{}{}", line("Q1"), line("C1"));
        let s = SidecarVectors::parse(&text, 25, "f").unwrap();
        assert_eq!(s.len(), 2);
        let again = format!("{text}{}", line("Q1"));
        assert_eq!(SidecarVectors::parse(&again, 25, "f").unwrap().duplicate_rows, 1);
        assert!(SidecarVectors::parse(&text, 24, "f").is_err());
        assert_eq!(s.get("nope").values, vec![0.0; 25]);
        assert_eq!(s.misses(), 1);
        assert!(matches!(
            SidecarVectors::load(Path::new("/nonexistent/sidecar.txt"), 25),
            Err(Error::Config(_))
        ));
    }

    fn vecs() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..6)
    }

    proptest! {
        #[test]
        fn embed_norm_bounded(vs in vecs()) {
            let entries: Vec<_> = vs.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.clone())).collect();
            let t = EmbeddingTable::from_entries("p", entries).unwrap();
            let words: Vec<String> = (0..vs.len()).map(|i| format!("w{i}")).collect();
            let max_norm = vs.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
            let e = t.embed(&words);
            prop_assert!(e.norm() <= max_norm + 1e-9);
            let mut rev = words.clone();
            rev.reverse();
            let r = t.embed(&rev);
            for (a, b) in e.values.iter().zip(&r.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cosine_symmetric_bounded(u in prop::collection::vec(-1e3f64..1e3, 4), v in prop::collection::vec(-1e3f64..1e3, 4)) {
            let a = cosine(&u, &v).unwrap();
            prop_assert_eq!(a, cosine(&v, &u).unwrap());
            prop_assert!(a.abs() <= 1.0 + 1e-12);
        }
    }
}
