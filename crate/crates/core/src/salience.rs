//! N-gram counting and attribute-marker extraction.
//!
//! The salience of an n-gram `u` for attribute `v` is its smoothed frequency
//! ratio against all other attributes:
//!
//! ```text
//! s(u, v) = (count(u, D_v) + lambda) / (sum_{v' != v} count(u, D_v') + lambda)
//! ```
//!
//! `u` is a marker for `v` when `s(u, v) > gamma`.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::cmp::Ordering;
use core::fmt;

use crate::corpus::{AttributeLabel, LabeledCorpus, Sentence};
use crate::error::{Error, Result};

/// A contiguous token span of length `1..=n_max`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NGram(Vec<String>);

impl NGram {
    pub fn new<I, T>(tokens: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        NGram(tokens.into_iter().map(Into::into).collect())
    }

    /// Parses a space-joined n-gram.
    pub fn parse(text: &str) -> Self {
        NGram(text.split_whitespace().map(ToOwned::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Borrow<[String]> for NGram {
    fn borrow(&self) -> &[String] {
        &self.0
    }
}

impl From<&[String]> for NGram {
    fn from(tokens: &[String]) -> Self {
        NGram(tokens.to_vec())
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&Sentence::from_tokens(self.0.iter().map(String::as_str)), f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SalienceConfig {
    /// Additive smoothing applied to numerator and denominator.
    pub lambda: f64,
    /// Markers must score strictly above this.
    pub gamma: f64,
    /// Longest span considered.
    pub n_max: usize,
    /// Minimum occurrences in the marker's own attribute.
    pub min_count: u64,
}

impl Default for SalienceConfig {
    fn default() -> Self {
        SalienceConfig {
            lambda: 1.0,
            gamma: 15.0,
            n_max: 4,
            min_count: 1,
        }
    }
}

impl SalienceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be a positive real".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig("gamma must be positive".into()));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidConfig("n_max must be at least 1".into()));
        }
        if self.min_count == 0 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-attribute n-gram occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    n_max: usize,
    attributes: Vec<AttributeLabel>,
    counts: Vec<BTreeMap<NGram, u64>>,
}

impl NGramCounts {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn attributes(&self) -> &[AttributeLabel] {
        &self.attributes
    }

    pub fn count(&self, ngram: &[String], attribute: usize) -> u64 {
        self.counts[attribute].get(ngram).copied().unwrap_or(0)
    }

    /// Occurrences of `ngram` in every attribute except `attribute`.
    pub fn count_elsewhere(&self, ngram: &[String], attribute: usize) -> u64 {
        (0..self.counts.len())
            .filter(|&a| a != attribute)
            .map(|a| self.count(ngram, a))
            .sum()
    }

    /// Number of counted length-`n` spans in `attribute`.
    pub fn total_of_length(&self, attribute: usize, n: usize) -> u64 {
        self.counts[attribute]
            .iter()
            .filter(|(g, _)| g.len() == n)
            .map(|(_, &c)| c)
            .sum()
    }

    pub fn iter(&self, attribute: usize) -> impl Iterator<Item = (&NGram, u64)> + '_ {
        self.counts[attribute].iter().map(|(g, &c)| (g, c))
    }
}

/// Counts every within-sentence span of length `1..=n_max`, once per occurrence.
pub fn count_ngrams(corpus: &LabeledCorpus, n_max: usize) -> NGramCounts {
    let mut counts: Vec<BTreeMap<NGram, u64>> =
        corpus.attributes().iter().map(|_| BTreeMap::new()).collect();
    for (attribute, sentence) in corpus.iter() {
        let table = &mut counts[attribute];
        let tokens = sentence.tokens();
        for start in 0..tokens.len() {
            for len in 1..=n_max.min(tokens.len() - start) {
                let span = &tokens[start..start + len];
                match table.get_mut(span) {
                    Some(c) => *c += 1,
                    None => {
                        table.insert(NGram::from(span), 1);
                    }
                }
            }
        }
    }
    NGramCounts {
        n_max,
        attributes: corpus.attributes().to_vec(),
        counts,
    }
}

/// Smoothed salience from raw counts.
#[inline]
pub fn salience_from_counts(own: u64, elsewhere: u64, lambda: f64) -> f64 {
    (own as f64 + lambda) / (elsewhere as f64 + lambda)
}

/// Salience of `ngram` for attribute index `attribute`.
pub fn salience(ngram: &[String], attribute: usize, counts: &NGramCounts, lambda: f64) -> f64 {
    salience_from_counts(
        counts.count(ngram, attribute),
        counts.count_elsewhere(ngram, attribute),
        lambda,
    )
}

/// Per-attribute marker table: n-gram to salience.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerLexicon {
    attributes: Vec<AttributeLabel>,
    n_max: usize,
    entries: Vec<BTreeMap<NGram, f64>>,
}

impl MarkerLexicon {
    /// An empty lexicon over `attributes`.
    pub fn empty(attributes: Vec<AttributeLabel>, n_max: usize) -> Self {
        let entries = attributes.iter().map(|_| BTreeMap::new()).collect();
        MarkerLexicon {
            attributes,
            n_max: n_max.max(1),
            entries,
        }
    }

    /// Thresholds precomputed counts. Used directly by test-time gamma sweeps.
    pub fn from_counts(counts: &NGramCounts, config: &SalienceConfig) -> Result<Self> {
        config.validate()?;
        if counts.attributes.len() < 2 {
            return Err(Error::TooFewAttributes(counts.attributes.len()));
        }
        let mut lexicon = MarkerLexicon::empty(counts.attributes.clone(), config.n_max);
        for (attribute, table) in counts.counts.iter().enumerate() {
            for (ngram, &own) in table {
                if ngram.len() > config.n_max || own < config.min_count {
                    continue;
                }
                let score = salience_from_counts(
                    own,
                    counts.count_elsewhere(ngram.tokens(), attribute),
                    config.lambda,
                );
                if score > config.gamma {
                    lexicon.entries[attribute].insert(ngram.clone(), score);
                }
            }
        }
        lexicon.keep_single_owner();
        Ok(lexicon)
    }

    /// Builds a lexicon from explicit `(attribute index, ngram, salience)` rows.
    pub fn from_entries<I>(attributes: Vec<AttributeLabel>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, NGram, f64)>,
    {
        let mut lexicon = MarkerLexicon::empty(attributes, 1);
        for (attribute, ngram, score) in rows {
            if ngram.is_empty() {
                return Err(Error::InvalidConfig("empty marker n-gram".into()));
            }
            let slot = lexicon
                .entries
                .get_mut(attribute)
                .ok_or_else(|| Error::InvalidConfig("marker attribute out of range".into()))?;
            lexicon.n_max = lexicon.n_max.max(ngram.len());
            slot.insert(ngram, score);
        }
        Ok(lexicon)
    }

    // With gamma < 1 an n-gram can clear the threshold for two attributes; keep the stronger.
    fn keep_single_owner(&mut self) {
        for a in 0..self.entries.len() {
            for b in a + 1..self.entries.len() {
                let shared: Vec<NGram> = self.entries[a]
                    .keys()
                    .filter(|g| self.entries[b].contains_key(g.tokens()))
                    .cloned()
                    .collect();
                for g in shared {
                    if self.entries[a][&g] >= self.entries[b][&g] {
                        self.entries[b].remove(&g);
                    } else {
                        self.entries[a].remove(&g);
                    }
                }
            }
        }
    }

    pub fn attributes(&self) -> &[AttributeLabel] {
        &self.attributes
    }

    pub fn attribute_index(&self, label: &AttributeLabel) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::UnknownAttribute(alloc::string::ToString::to_string(label)))
    }

    /// Longest marker length the lexicon can contain.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, attribute: usize, ngram: &[String]) -> Option<f64> {
        self.entries[attribute].get(ngram).copied()
    }

    pub fn contains(&self, attribute: usize, ngram: &[String]) -> bool {
        self.entries[attribute].contains_key(ngram)
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn attribute_len(&self, attribute: usize) -> usize {
        self.entries[attribute].len()
    }

    /// Markers of one attribute in lexicographic order.
    pub fn markers(&self, attribute: usize) -> impl Iterator<Item = (&NGram, f64)> + '_ {
        self.entries[attribute].iter().map(|(g, &s)| (g, s))
    }

    /// Markers of one attribute by descending salience, then shorter first, then spelling.
    pub fn ranked(&self, attribute: usize) -> Vec<(&NGram, f64)> {
        let mut rows: Vec<(&NGram, f64)> = self.markers(attribute).collect();
        rows.sort_by(|a, b| rank_order((a.0, a.1), (b.0, b.1)));
        rows
    }

    /// Every entry as `(attribute index, ngram, salience)`: attributes in order, each ranked.
    pub fn rows(&self) -> Vec<(usize, &NGram, f64)> {
        (0..self.attributes.len())
            .flat_map(|a| self.ranked(a).into_iter().map(move |(g, s)| (a, g, s)))
            .collect()
    }
}

fn rank_order(a: (&NGram, f64), b: (&NGram, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| a.0.len().cmp(&b.0.len()))
        .then_with(|| a.0.cmp(b.0))
}

/// Counts n-grams and keeps those whose salience exceeds `gamma`.
pub fn extract_markers(corpus: &LabeledCorpus, config: &SalienceConfig) -> Result<MarkerLexicon> {
    config.validate()?;
    if corpus.attributes().len() < 2 {
        return Err(Error::TooFewAttributes(corpus.attributes().len()));
    }
    MarkerLexicon::from_counts(&count_ngrams(corpus, config.n_max), config)
}
