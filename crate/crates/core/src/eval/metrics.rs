//! BLEU, content/marker overlap rates against human rewrites, and rank correlation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{AttributeLabel, Sentence};
use crate::error::{Error, Result};
use crate::salience::MarkerLexicon;
use crate::splitter::split;

const BLEU_ORDER: usize = 4;

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and hypothesis n-gram totals for orders 1..=4.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; BLEU_ORDER],
    pub totals: [usize; BLEU_ORDER],
    pub hypothesis_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn of(hypothesis: &Sentence, reference: &Sentence) -> Self {
        let mut stats = BleuStats {
            hypothesis_len: hypothesis.len(),
            reference_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=BLEU_ORDER {
            let hyp = ngram_counts(hypothesis.tokens(), n);
            let reference = ngram_counts(reference.tokens(), n);
            stats.totals[n - 1] = hyp.values().sum();
            stats.matches[n - 1] = hyp
                .iter()
                .map(|(g, c)| (*c).min(reference.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..BLEU_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hypothesis_len += other.hypothesis_len;
        self.reference_len += other.reference_len;
    }

    /// BLEU-4 on a 0–100 scale.
    ///
    /// A zero precision of order n >= 2 is replaced by `1 / (total_n + 1)`; a zero
    /// unigram precision gives 0. The brevity penalty is `exp(1 - r/c)` when `c < r`.
    pub fn score(&self) -> f64 {
        if self.matches[0] == 0 || self.hypothesis_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..BLEU_ORDER {
            let p = if self.matches[n] == 0 {
                1.0 / (self.totals[n] as f64 + 1.0)
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            };
            log_sum += libm::log(p);
        }
        let c = self.hypothesis_len as f64;
        let r = self.reference_len as f64;
        let bp = if c < r { libm::exp(1.0 - r / c) } else { 1.0 };
        100.0 * bp * libm::exp(log_sum / BLEU_ORDER as f64)
    }
}

/// Corpus-level BLEU-4 of aligned outputs against single references.
pub fn bleu(outputs: &[Sentence], references: &[Sentence]) -> Result<f64> {
    if outputs.len() != references.len() {
        return Err(Error::LengthMismatch {
            left: outputs.len(),
            right: references.len(),
        });
    }
    if outputs.is_empty() {
        return Err(Error::EmptyInput("outputs"));
    }
    let mut total = BleuStats::default();
    for (h, r) in outputs.iter().zip(references) {
        total.add(&BleuStats::of(h, r));
    }
    Ok(total.score())
}

/// Fixed English stopword list used by the overlap rates.
///
/// This is the 179-word English list distributed with NLTK.
pub const ENGLISH_STOPWORDS_VERSION: &str = "en-v1";

pub const ENGLISH_STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll",
    "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's",
    "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs",
    "themselves", "what", "which", "who", "whom", "this", "that", "that'll", "these", "those", "am",
    "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do", "does",
    "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while",
    "of", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during",
    "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off",
    "over", "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor",
    "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don",
    "don't", "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "aren't", "couldn", "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
    "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't",
    "needn", "needn't", "shan", "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren",
    "weren't", "won", "won't", "wouldn", "wouldn't",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: Vec<String>,
}

impl Stopwords {
    pub fn new<I, T>(words: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let mut words: Vec<String> = words.into_iter().map(Into::into).collect();
        words.sort();
        words.dedup();
        Stopwords { words }
    }

    pub fn english() -> Self {
        Stopwords::new(ENGLISH_STOPWORDS.iter().copied())
    }

    pub fn none() -> Self {
        Stopwords { words: Vec::new() }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.binary_search_by(|w| w.as_str().cmp(word)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn content_bag<'a>(tokens: impl IntoIterator<Item = &'a String>, stopwords: &Stopwords) -> BTreeMap<&'a str, usize> {
    let mut bag = BTreeMap::new();
    for t in tokens {
        if !stopwords.contains(t) {
            *bag.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    bag
}

/// `|a ∩ b| / |a|` over non-stopword multisets, `None` when `a` has no non-stopwords.
pub fn overlap_fraction<'a, 'b>(
    a: impl IntoIterator<Item = &'a String>,
    b: impl IntoIterator<Item = &'b String>,
    stopwords: &Stopwords,
) -> Option<f64> {
    let a = content_bag(a, stopwords);
    let size: usize = a.values().sum();
    if size == 0 {
        return None;
    }
    let b = content_bag(b, stopwords);
    let shared: usize = a.iter().map(|(w, c)| (*c).min(b.get(w).copied().unwrap_or(0))).sum();
    Some(shared as f64 / size as f64)
}

/// A test sentence with its source attribute and a human rewrite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    pub source: Sentence,
    pub source_attribute: AttributeLabel,
    pub reference: Sentence,
}

/// An averaged rate together with how many records were skipped for
/// having nothing to measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapRate {
    /// `None` when every record was skipped.
    pub value: Option<f64>,
    pub used: usize,
    pub skipped: usize,
}

fn average(fractions: impl Iterator<Item = Option<f64>>) -> OverlapRate {
    let mut rate = OverlapRate {
        value: None,
        used: 0,
        skipped: 0,
    };
    let mut sum = 0.0;
    for f in fractions {
        match f {
            Some(v) => {
                sum += v;
                rate.used += 1;
            }
            None => rate.skipped += 1,
        }
    }
    if rate.used > 0 {
        rate.value = Some(sum / rate.used as f64);
    }
    rate
}

/// Mean fraction of content words that the reference keeps.
pub fn s_c(records: &[ReferenceRecord], lexicon: &MarkerLexicon, stopwords: &Stopwords) -> Result<OverlapRate> {
    let mut fractions = Vec::with_capacity(records.len());
    for r in records {
        let marked = split(&r.source, &r.source_attribute, lexicon)?;
        fractions.push(overlap_fraction(marked.content.tokens(), r.reference.tokens(), stopwords));
    }
    Ok(average(fractions.into_iter()))
}

/// One minus the mean fraction of marker words that the reference keeps.
pub fn s_a(records: &[ReferenceRecord], lexicon: &MarkerLexicon, stopwords: &Stopwords) -> Result<OverlapRate> {
    let mut fractions = Vec::with_capacity(records.len());
    for r in records {
        let marked = split(&r.source, &r.source_attribute, lexicon)?;
        let marker_tokens = marked.markers.iter().flat_map(|m| m.ngram.tokens());
        fractions.push(overlap_fraction(marker_tokens, r.reference.tokens(), stopwords));
    }
    let mut rate = average(fractions.into_iter());
    rate.value = rate.value.map(|v| 1.0 - v);
    Ok(rate)
}

/// Ranks starting at 1, tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// Returns `Ok(None)` when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput("spearman needs at least two pairs"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("spearman input"));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean) * (x - mean);
        vb += (y - mean) * (y - mean);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / libm::sqrt(va * vb)).clamp(-1.0, 1.0)))
}
