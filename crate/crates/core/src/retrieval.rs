//! Nearest-content retrieval over one attribute's sentences.
//!
//! Two distances are available: `1 - cosine` between TF-IDF vectors of the
//! content tokens, and Euclidean distance between content encodings produced
//! by a trained encoder. Both indexes are exact flat scans; results are
//! ordered by ascending distance with ties broken by corpus position.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{AttributeLabel, Sentence};
use crate::error::{Error, Result};
use crate::splitter::MarkedSentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TfIdf,
    Embedding,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::TfIdf => "tfidf",
            Metric::Embedding => "embedding",
        }
    }
}

impl core::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(Metric::TfIdf),
            "embedding" => Ok(Metric::Embedding),
            other => Err(Error::InvalidConfig(alloc::format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit<'a> {
    /// Position in the indexed corpus.
    pub index: usize,
    pub entry: &'a MarkedSentence,
    pub distance: f64,
}

/// Hits in ascending distance order.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult<'a> {
    pub hits: Vec<Hit<'a>>,
}

impl<'a> RetrievalResult<'a> {
    pub fn best(&self) -> Option<&Hit<'a>> {
        self.hits.first()
    }
}

/// Common query surface of both index kinds.
pub trait ContentIndex {
    fn metric(&self) -> Metric;

    fn attribute(&self) -> &AttributeLabel;

    fn entries(&self) -> &[MarkedSentence];

    /// Distance from `content` to every indexed entry, in corpus order.
    fn distances(&self, content: &Sentence) -> Result<Vec<f64>>;

    fn len(&self) -> usize {
        self.entries().len()
    }

    fn is_empty(&self) -> bool {
        self.entries().is_empty()
    }

    /// The `k` nearest entries (all of them when `k` exceeds the index size).
    fn query(&self, content: &Sentence, k: usize) -> Result<RetrievalResult<'_>> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let distances = self.distances(content)?;
        let order = top_k(&distances, k.max(1));
        let entries = self.entries();
        Ok(RetrievalResult {
            hits: order
                .into_iter()
                .map(|index| Hit {
                    index,
                    entry: &entries[index],
                    distance: distances[index],
                })
                .collect(),
        })
    }
}

fn by_distance_then_index(distances: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b))
}

/// Indices of the `k` smallest distances, ties by ascending index.
pub fn top_k(distances: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    let cmp = by_distance_then_index(distances);
    if k < order.len() {
        order.select_nth_unstable_by(k, &cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(&cmp);
    order
}

/// TF-IDF vectors over the content of every indexed sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfIndex {
    attribute: AttributeLabel,
    terms: BTreeMap<String, usize>,
    idf: Vec<f64>,
    docs: Vec<Vec<(usize, f64)>>,
    norms_sq: Vec<f64>,
    entries: Vec<MarkedSentence>,
}

impl TfIdfIndex {
    pub fn build(attribute: AttributeLabel, entries: Vec<MarkedSentence>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for entry in &entries {
            let mut seen: Vec<&str> = entry.content.tokens().iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = entries.len() as f64;
        let mut terms = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (id, (term, count)) in df.into_iter().enumerate() {
            terms.insert(String::from(term), id);
            idf.push(libm::log(n / count as f64));
        }
        let mut index = TfIdfIndex {
            attribute,
            terms,
            idf,
            docs: Vec::new(),
            norms_sq: Vec::new(),
            entries: Vec::new(),
        };
        index.docs = entries.iter().map(|e| index.vectorize(&e.content)).collect();
        index.norms_sq = index.docs.iter().map(|d| dot(d, d)).collect();
        index.entries = entries;
        Ok(index)
    }

    /// Reassembles a persisted index; the vectors are recomputed from the entries.
    pub fn from_parts(
        attribute: AttributeLabel,
        idf: Vec<(String, f64)>,
        entries: Vec<MarkedSentence>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut terms = BTreeMap::new();
        let mut weights = Vec::with_capacity(idf.len());
        for (term, w) in idf {
            if terms.insert(term, weights.len()).is_some() {
                return Err(Error::InvalidConfig("duplicate term in index".into()));
            }
            weights.push(w);
        }
        // Term ids must follow spelling order for the summation order to match `build`.
        let mut index = TfIdfIndex {
            attribute,
            idf: Vec::with_capacity(weights.len()),
            terms: BTreeMap::new(),
            docs: Vec::new(),
            norms_sq: Vec::new(),
            entries: Vec::new(),
        };
        for (id, (term, old)) in terms.into_iter().enumerate() {
            index.idf.push(weights[old]);
            index.terms.insert(term, id);
        }
        index.docs = entries.iter().map(|e| index.vectorize(&e.content)).collect();
        index.norms_sq = index.docs.iter().map(|d| dot(d, d)).collect();
        index.entries = entries;
        Ok(index)
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.terms.get(term).map(|&id| self.idf[id])
    }

    /// `(term, idf)` in spelling order.
    pub fn idf_table(&self) -> Vec<(&str, f64)> {
        self.terms
            .iter()
            .map(|(t, &id)| (t.as_str(), self.idf[id]))
            .collect()
    }

    /// Sparse `(term id, weight)` vector of the `doc`-th entry, sorted by term.
    pub fn vector(&self, doc: usize) -> &[(usize, f64)] {
        &self.docs[doc]
    }

    /// Raw term frequency times idf; tokens unknown to the index are dropped.
    pub fn vectorize(&self, content: &Sentence) -> Vec<(usize, f64)> {
        let mut tf: BTreeMap<usize, u32> = BTreeMap::new();
        for token in content.tokens() {
            if let Some(&id) = self.terms.get(token) {
                *tf.entry(id).or_default() += 1;
            }
        }
        tf.into_iter()
            .map(|(id, count)| (id, count as f64 * self.idf[id]))
            .collect()
    }
}

fn dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

/// `1 - cos(q, d)`, with cosine against a zero vector taken as 0.
pub fn cosine_distance(dot: f64, q_sq: f64, d_sq: f64) -> f64 {
    if q_sq == 0.0 || d_sq == 0.0 {
        return 1.0;
    }
    (1.0 - dot / libm::sqrt(q_sq * d_sq)).max(0.0)
}

impl ContentIndex for TfIdfIndex {
    fn metric(&self) -> Metric {
        Metric::TfIdf
    }

    fn attribute(&self) -> &AttributeLabel {
        &self.attribute
    }

    fn entries(&self) -> &[MarkedSentence] {
        &self.entries
    }

    fn distances(&self, content: &Sentence) -> Result<Vec<f64>> {
        let q = self.vectorize(content);
        let q_sq = dot(&q, &q);
        Ok(self
            .docs
            .iter()
            .zip(&self.norms_sq)
            .map(|(d, &d_sq)| cosine_distance(dot(&q, d), q_sq, d_sq))
            .collect())
    }
}

/// Maps a content sequence to a fixed-size vector.
pub trait ContentEncoder {
    fn dim(&self) -> usize;

    fn encode_content(&self, content: &Sentence) -> Vec<f64>;
}

impl<T: ContentEncoder + ?Sized> ContentEncoder for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn encode_content(&self, content: &Sentence) -> Vec<f64> {
        (**self).encode_content(content)
    }
}

/// Content encodings of every indexed sentence, queried by Euclidean distance.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex<E> {
    attribute: AttributeLabel,
    encoder: E,
    vectors: Vec<Vec<f64>>,
    entries: Vec<MarkedSentence>,
}

impl<E: ContentEncoder> EmbeddingIndex<E> {
    pub fn build(attribute: AttributeLabel, entries: Vec<MarkedSentence>, encoder: E) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let vectors = entries.iter().map(|e| encoder.encode_content(&e.content)).collect();
        Self::from_parts(attribute, entries, vectors, encoder)
    }

    /// Pairs stored vectors with an encoder, checking every dimension.
    pub fn from_parts(
        attribute: AttributeLabel,
        entries: Vec<MarkedSentence>,
        vectors: Vec<Vec<f64>>,
        encoder: E,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if vectors.len() != entries.len() {
            return Err(Error::LengthMismatch {
                left: vectors.len(),
                right: entries.len(),
            });
        }
        let dim = encoder.dim();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "embedding index",
                expected: dim,
                found: v.len(),
            });
        }
        Ok(EmbeddingIndex {
            attribute,
            encoder,
            vectors,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

impl<E: ContentEncoder> ContentIndex for EmbeddingIndex<E> {
    fn metric(&self) -> Metric {
        Metric::Embedding
    }

    fn attribute(&self) -> &AttributeLabel {
        &self.attribute
    }

    fn entries(&self) -> &[MarkedSentence] {
        &self.entries
    }

    fn distances(&self, content: &Sentence) -> Result<Vec<f64>> {
        let q = self.encoder.encode_content(content);
        if q.len() != self.vectors[0].len() {
            return Err(Error::DimensionMismatch {
                what: "query encoding",
                expected: self.vectors[0].len(),
                found: q.len(),
            });
        }
        Ok(self.vectors.iter().map(|v| euclidean(&q, v)).collect())
    }
}
