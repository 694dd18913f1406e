//! Separating a sentence into content and source-attribute markers.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{AttributeLabel, Sentence};
use crate::error::Result;
use crate::salience::{MarkerLexicon, NGram};

/// One deleted marker and where it sat in the original sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSpan {
    pub ngram: NGram,
    pub start: usize,
    pub salience: f64,
}

impl MarkerSpan {
    pub fn end(&self) -> usize {
        self.start + self.ngram.len()
    }
}

/// A sentence decomposed into content plus disjoint marker spans sorted by start.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSentence {
    pub original: Sentence,
    pub source_attribute: AttributeLabel,
    pub content: Sentence,
    pub markers: Vec<MarkerSpan>,
}

impl MarkedSentence {
    /// Re-inserts every marker at its recorded position.
    pub fn reassemble(&self) -> Sentence {
        let mut tokens: Vec<&str> = Vec::with_capacity(self.original.len());
        let mut content = self.content.tokens().iter();
        for marker in &self.markers {
            while tokens.len() < marker.start {
                match content.next() {
                    Some(t) => tokens.push(t),
                    None => break,
                }
            }
            tokens.extend(marker.ngram.tokens().iter().map(String::as_str));
        }
        tokens.extend(content.map(String::as_str));
        Sentence::from_tokens(tokens)
    }

    pub fn marker_ngrams(&self) -> Vec<NGram> {
        self.markers.iter().map(|m| m.ngram.clone()).collect()
    }

    /// Indices into `content` before which each marker was removed.
    pub fn slot_positions(&self) -> Vec<usize> {
        let mut removed = 0;
        self.markers
            .iter()
            .map(|m| {
                let slot = m.start - removed;
                removed += m.ngram.len();
                slot
            })
            .collect()
    }
}

/// Deletes the `source` attribute's markers from `sentence`.
pub fn split(
    sentence: &Sentence,
    source: &AttributeLabel,
    lexicon: &MarkerLexicon,
) -> Result<MarkedSentence> {
    let attribute = lexicon.attribute_index(source)?;
    Ok(split_by_index(sentence, attribute, lexicon))
}

/// [`split`] with the attribute already resolved to its lexicon index.
pub fn split_by_index(sentence: &Sentence, attribute: usize, lexicon: &MarkerLexicon) -> MarkedSentence {
    let markers = select_markers(sentence.tokens(), attribute, lexicon);
    let mut content = Vec::with_capacity(sentence.len());
    let mut next = 0;
    for m in &markers {
        content.extend(sentence.tokens()[next..m.start].iter().map(String::as_str));
        next = m.end();
    }
    content.extend(sentence.tokens()[next..].iter().map(String::as_str));
    MarkedSentence {
        original: sentence.clone(),
        source_attribute: lexicon.attributes()[attribute].clone(),
        content: Sentence::from_tokens(content),
        markers,
    }
}

/// Leaves the sentence untouched: all of it is content.
pub fn passthrough_split(sentence: &Sentence, neutral: &AttributeLabel) -> MarkedSentence {
    MarkedSentence {
        original: sentence.clone(),
        source_attribute: neutral.clone(),
        content: sentence.clone(),
        markers: Vec::new(),
    }
}

/// Every lexicon span of `attribute` occurring in `tokens`, as `(start, len, salience)`.
pub fn candidate_spans(tokens: &[String], attribute: usize, lexicon: &MarkerLexicon) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for len in 1..=lexicon.n_max().min(tokens.len() - start) {
            if let Some(s) = lexicon.get(attribute, &tokens[start..start + len]) {
                out.push((start, len, s));
            }
        }
    }
    out
}

// Disjoint spans with maximum total salience (weighted interval scheduling).
// best[i] is the optimum over tokens[..i]; totals accumulate left to right.
fn select_markers(tokens: &[String], attribute: usize, lexicon: &MarkerLexicon) -> Vec<MarkerSpan> {
    let n = tokens.len();
    let mut ending_at: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 1];
    for (start, len, s) in candidate_spans(tokens, attribute, lexicon) {
        ending_at[start + len].push((start, s));
    }
    let mut best = vec![0.0f64; n + 1];
    let mut choice: Vec<Option<(usize, f64)>> = vec![None; n + 1];
    for end in 1..=n {
        best[end] = best[end - 1];
        // Longest span first so that exact ties favour skipping, then longer spans.
        for &(start, s) in &ending_at[end] {
            let total = best[start] + s;
            if total > best[end] {
                best[end] = total;
                choice[end] = Some((start, s));
            }
        }
    }
    let mut spans = Vec::new();
    let mut end = n;
    while end > 0 {
        match choice[end] {
            Some((start, salience)) => {
                spans.push(MarkerSpan {
                    ngram: NGram::from(&tokens[start..end]),
                    start,
                    salience,
                });
                end = start;
            }
            None => end -= 1,
        }
    }
    spans.reverse();
    spans
}

/// Levenshtein distance over tokens with unit costs.
pub fn word_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut row = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            row[j + 1] = substitute.min(prev[j + 1] + 1).min(row[j] + 1);
        }
        core::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}
