//! Tokenization and tf-idf document vectors.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

/// Lowercased alphanumeric runs of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).into_iter().map(|t| t.token).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub token: String,
}

/// Lowercasing can emit combining marks (`İ` becomes `i` + U+0307); those
/// are dropped so a token re-tokenizes to itself.
fn fold(run: &str) -> String {
    run.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric())
        .collect()
}

/// Tokens with their byte range in the original text.
pub(crate) fn token_spans(text: &str) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(TokenSpan {
                start: s,
                end: i,
                token: fold(&text[s..i]),
            });
        }
    }
    if let Some(s) = start {
        out.push(TokenSpan {
            start: s,
            end: text.len(),
            token: fold(&text[s..]),
        });
    }
    out.retain(|t| !t.token.is_empty());
    out
}

/// Removes a leading `---` delimited YAML block. The result is always a
/// suffix of the input.
pub fn strip_front_matter(text: &str) -> &str {
    match split_front_matter(text) {
        Some((_, body)) => body,
        None => text,
    }
}

/// Splits `---\n<yaml>\n---\n<body>`; `None` when the text has no front matter.
pub fn split_front_matter(text: &str) -> Option<(&str, &str)> {
    let rest = text.strip_prefix("---")?;
    let rest = rest
        .strip_prefix("\r\n")
        .or_else(|| rest.strip_prefix('\n'))?;
    let mut offset = 0;
    for line in rest.split_inclusive('\n') {
        if line.trim_end_matches(['\r', '\n']) == "---" {
            let yaml = &rest[..offset];
            let body = &rest[offset + line.len()..];
            return Some((yaml, body));
        }
        offset += line.len();
    }
    None
}

/// Document frequencies over a corpus snapshot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    doc_count: usize,
    doc_freq: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut stats = CorpusStats::default();
        for d in docs {
            stats.add_document(d);
        }
        stats
    }

    pub fn add_document(&mut self, doc: &str) {
        self.doc_count += 1;
        let distinct: HashSet<String> = tokenize(doc).into_iter().collect();
        for t in distinct {
            *self.doc_freq.entry(t).or_default() += 1;
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// Smoothed inverse document frequency, `ln((N + 1) / (df + 1)) + 1`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.doc_freq(term) as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    }

    /// Raw term counts scaled by idf.
    pub fn vectorize(&self, text: &str) -> DocumentVector {
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokenize(text) {
            *counts.entry(t).or_default() += 1.0;
        }
        let terms = counts
            .into_iter()
            .map(|(t, tf)| {
                let w = tf * self.idf(&t);
                (t, w)
            })
            .collect();
        DocumentVector::from_weights(terms)
    }
}

/// Sparse non-negative term weights with a cached Euclidean norm.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocumentVector {
    terms: BTreeMap<String, f64>,
    norm: f64,
}

impl DocumentVector {
    pub fn from_weights(terms: BTreeMap<String, f64>) -> Self {
        let terms: BTreeMap<String, f64> = terms.into_iter().filter(|(_, w)| *w > 0.0).collect();
        let norm = terms.values().map(|w| w * w).sum::<f64>().sqrt();
        DocumentVector { terms, norm }
    }

    pub fn terms(&self) -> &BTreeMap<String, f64> {
        &self.terms
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.terms.get(term).copied().unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Unit-length copy; the empty vector stays empty.
    pub fn normalized(&self) -> DocumentVector {
        if self.norm == 0.0 {
            return DocumentVector::default();
        }
        let terms = self
            .terms
            .iter()
            .map(|(t, w)| (t.clone(), w / self.norm))
            .collect();
        DocumentVector::from_weights(terms)
    }

    /// Mean of the unit-normalized vectors.
    pub fn centroid<'a, I>(vectors: I) -> DocumentVector
    where
        I: IntoIterator<Item = &'a DocumentVector>,
    {
        let mut sum: BTreeMap<String, f64> = BTreeMap::new();
        let mut n = 0usize;
        for v in vectors {
            n += 1;
            for (t, w) in v.normalized().terms {
                *sum.entry(t).or_default() += w;
            }
        }
        if n == 0 {
            return DocumentVector::default();
        }
        for w in sum.values_mut() {
            *w /= n as f64;
        }
        DocumentVector::from_weights(sum)
    }
}

/// `dot(a, b) / (|a| |b|)`, or 0 when either vector is empty.
pub fn cosine_similarity(a: &DocumentVector, b: &DocumentVector) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.terms.len() <= b.terms.len() {
        (a, b)
    } else {
        (b, a)
    };
    let dot: f64 = small
        .terms
        .iter()
        .filter_map(|(t, w)| large.terms.get(t).map(|v| w * v))
        .sum();
    (dot / (a.norm * b.norm)).clamp(0.0, 1.0)
}
