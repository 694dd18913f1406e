//! Labeled corpora, tokenization and vocabularies.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Name of one attribute value, e.g. `positive` or `romantic`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeLabel(String);

impl AttributeLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(alloc::format!(
                "attribute label `{name}` must be non-empty and contain no whitespace"
            )));
        }
        Ok(AttributeLabel(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AttributeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A tokenized sentence. Tokens are non-empty and contain no whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn from_tokens<I, T>(tokens: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Sentence { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(token)?;
        }
        Ok(())
    }
}

impl From<&str> for Sentence {
    fn from(line: &str) -> Self {
        tokenize(line)
    }
}

/// Splits on whitespace and lowercases. Input is expected to be pre-tokenized.
pub fn tokenize(line: &str) -> Sentence {
    Sentence {
        tokens: line.split_whitespace().map(str::to_lowercase).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(alloc::format!("unknown split `{other}`"))),
        }
    }
}

/// Sentences grouped by attribute, one (possibly empty) list per attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    split: Split,
    attributes: Vec<AttributeLabel>,
    sentences: Vec<Vec<Sentence>>,
}

impl LabeledCorpus {
    pub fn new(split: Split, attributes: Vec<AttributeLabel>) -> Result<Self> {
        for (i, a) in attributes.iter().enumerate() {
            if attributes[..i].contains(a) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "attribute `{a}` listed twice"
                )));
            }
        }
        let sentences = attributes.iter().map(|_| Vec::new()).collect();
        Ok(LabeledCorpus {
            split,
            attributes,
            sentences,
        })
    }

    /// Convenience constructor from `(label, lines)` pairs; lines are tokenized and blanks skipped.
    pub fn from_lines<'a, I, L>(split: Split, groups: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, L)>,
        L: IntoIterator<Item = &'a str>,
    {
        let mut labels = Vec::new();
        let mut lists = Vec::new();
        for (label, lines) in groups {
            labels.push(AttributeLabel::new(label)?);
            lists.push(
                lines
                    .into_iter()
                    .map(tokenize)
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>(),
            );
        }
        let mut corpus = LabeledCorpus::new(split, labels)?;
        corpus.sentences = lists;
        Ok(corpus)
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn attributes(&self) -> &[AttributeLabel] {
        &self.attributes
    }

    pub fn attribute_index(&self, label: &AttributeLabel) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::UnknownAttribute(label.to_string()))
    }

    pub fn push(&mut self, attribute: usize, sentence: Sentence) {
        self.sentences[attribute].push(sentence);
    }

    pub fn sentences(&self, attribute: usize) -> &[Sentence] {
        &self.sentences[attribute]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sentences.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(attribute index, sentence)` pairs, attribute by attribute.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Sentence)> + '_ {
        self.sentences
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |s| (a, s)))
    }
}

/// Padding id.
pub const PAD: u32 = 0;
/// Sentence-start id.
pub const START: u32 = 1;
/// Sentence-end id.
pub const END: u32 = 2;
/// Unknown-token id.
pub const UNK: u32 = 3;

/// Spellings of the reserved symbols, indexed by id.
pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Token/id bijection. Ids 0..=3 are `<pad>`, `<s>`, `</s>`, `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        for symbol in RESERVED {
            vocab.add_token(symbol);
        }
        vocab
    }
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its ordered token list (reserved symbols first).
    pub fn from_ordered(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len()
            || tokens.iter().zip(RESERVED).any(|(t, r)| t != r)
        {
            return Err(Error::InvalidConfig(
                "vocabulary must start with the four reserved symbols".into(),
            ));
        }
        let mut vocab = Vocabulary {
            tokens: Vec::with_capacity(tokens.len()),
            index: BTreeMap::new(),
        };
        for token in tokens {
            if vocab.index.contains_key(&token) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "duplicate vocabulary entry `{token}`"
                )));
            }
            vocab.add_token(&token);
        }
        Ok(vocab)
    }

    /// Appends `token` if absent and returns its id.
    pub fn add_token(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Result<&str> {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::IdOutOfRange {
                id,
                len: self.tokens.len(),
            })
    }

    pub fn encode(&self, sentence: &Sentence) -> Vec<u32> {
        sentence.tokens().iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<Sentence> {
        let tokens = ids
            .iter()
            .map(|&id| self.token(id).map(ToString::to_string))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sentence { tokens })
    }
}

/// Keeps tokens seen at least `min_count` times, most frequent first, ties by spelling.
pub fn build_vocab(corpus: &LabeledCorpus, min_count: usize) -> Vocabulary {
    build_vocab_from(corpus.iter().map(|(_, s)| s), min_count)
}

/// Same ordering rule as [`build_vocab`], over any sentence stream.
pub fn build_vocab_from<'a, I>(sentences: I, min_count: usize) -> Vocabulary
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let min_count = min_count.max(1);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for sentence in sentences {
        for token in sentence.tokens() {
            *counts.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && !RESERVED.contains(&t))
        .collect();
    // BTreeMap order is lexicographic, so a stable sort keeps ties in spelling order.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    let mut vocab = Vocabulary::default();
    for (token, _) in ranked {
        vocab.add_token(token);
    }
    vocab
}
