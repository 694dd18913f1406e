//! The four transfer systems and the request pipeline that drives them.

mod neural;
mod noise;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{AttributeLabel, LabeledCorpus, Sentence};
use crate::error::{Error, Result};
use crate::neural::SentenceScorer;
use crate::retrieval::{ContentIndex, EmbeddingIndex, Metric, TfIdfIndex};
use crate::salience::{MarkerLexicon, NGram};
use crate::splitter::MarkedSentence;

pub use neural::{
    build_training_set, delete_and_retrieve_candidates, pick_candidate, split_for, train,
    transfer_delete_and_retrieve, transfer_delete_only, Candidate, Conditioning, Seq2SeqModel,
    TrainingExample, SEPARATOR,
};
pub use noise::{noise_markers, MarkerNeighbors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemKind {
    RetrieveOnly,
    TemplateBased,
    DeleteOnly,
    DeleteAndRetrieve,
}

impl SystemKind {
    pub const ALL: [SystemKind; 4] = [
        SystemKind::RetrieveOnly,
        SystemKind::TemplateBased,
        SystemKind::DeleteOnly,
        SystemKind::DeleteAndRetrieve,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::RetrieveOnly => "retrieve-only",
            SystemKind::TemplateBased => "template",
            SystemKind::DeleteOnly => "delete-only",
            SystemKind::DeleteAndRetrieve => "delete-and-retrieve",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, SystemKind::DeleteOnly | SystemKind::DeleteAndRetrieve)
    }

    pub fn needs_index(self) -> bool {
        self != SystemKind::DeleteOnly
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown system {s:?}")))
    }
}

/// A sentence to rewrite from `source` to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRequest {
    pub sentence: Sentence,
    pub source: AttributeLabel,
    pub target: AttributeLabel,
}

impl TransferRequest {
    pub fn new(sentence: Sentence, source: AttributeLabel, target: AttributeLabel) -> Result<Self> {
        if source == target {
            return Err(Error::SameAttribute(String::from(source.as_str())));
        }
        Ok(TransferRequest {
            sentence,
            source,
            target,
        })
    }
}

/// Splits every `attribute` sentence of `corpus` and indexes the contents.
///
/// The embedding metric encodes contents with `encoder`.
pub fn build_index<'a>(
    corpus: &LabeledCorpus,
    attribute: &AttributeLabel,
    lexicon: &MarkerLexicon,
    no_delete: &[AttributeLabel],
    metric: Metric,
    encoder: Option<&'a Seq2SeqModel>,
) -> Result<Box<dyn ContentIndex + Sync + 'a>> {
    let idx = corpus.attribute_index(attribute)?;
    let entries = corpus
        .sentences(idx)
        .iter()
        .map(|s| split_for(s, attribute, lexicon, no_delete))
        .collect::<Result<Vec<_>>>()?;
    match metric {
        Metric::TfIdf => Ok(Box::new(TfIdfIndex::build(attribute.clone(), entries)?)),
        Metric::Embedding => {
            let encoder = encoder.ok_or(Error::Unsupported("embedding retrieval needs a trained generator"))?;
            Ok(Box::new(EmbeddingIndex::build(attribute.clone(), entries, encoder)?))
        }
    }
}

/// Returns the nearest target-attribute sentence unchanged.
pub fn transfer_retrieve_only<I: ContentIndex + ?Sized>(source: &MarkedSentence, index: &I) -> Result<Sentence> {
    let hits = index.query(&source.content, 1)?;
    let best = hits.best().ok_or(Error::EmptyIndex)?;
    Ok(best.entry.original.clone())
}

/// Puts `markers` into the source's marker slots, left to right.
///
/// Slots past the end of `markers` are left empty and surplus markers are dropped.
pub fn fill_template(source: &MarkedSentence, markers: &[NGram]) -> Sentence {
    let slots = source.slot_positions();
    let content = source.content.tokens();
    let mut tokens: Vec<&str> = Vec::with_capacity(content.len() + markers.len());
    let mut next = 0;
    for (slot, marker) in slots.iter().zip(markers.iter().map(Some).chain(core::iter::repeat(None))) {
        while next < *slot && next < content.len() {
            tokens.push(&content[next]);
            next += 1;
        }
        if let Some(m) = marker {
            tokens.extend(m.tokens().iter().map(String::as_str));
        }
    }
    tokens.extend(content[next..].iter().map(String::as_str));
    Sentence::from_tokens(tokens)
}

/// Fills the source's marker slots with the nearest target sentence's markers.
pub fn transfer_template<I: ContentIndex + ?Sized>(source: &MarkedSentence, index: &I) -> Result<Sentence> {
    let hits = index.query(&source.content, 1)?;
    let best = hits.best().ok_or(Error::EmptyIndex)?;
    Ok(fill_template(source, &best.entry.marker_ngrams()))
}

/// Intermediate values of one transfer, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutcome {
    pub output: Sentence,
    pub split: MarkedSentence,
    /// The neighbour whose sentence or markers were used, if any.
    pub retrieved: Option<Sentence>,
    pub target_markers: Vec<NGram>,
    pub candidates: Vec<Candidate>,
}

/// Everything needed to serve transfer requests towards one target attribute.
///
/// `index` holds the target attribute's split training sentences and
/// `model`/`lm` are required by the neural systems.
#[derive(Clone, Copy)]
pub struct TransferSystem<'a> {
    pub kind: SystemKind,
    pub lexicon: &'a MarkerLexicon,
    pub no_delete: &'a [AttributeLabel],
    pub index: Option<&'a (dyn ContentIndex + Sync)>,
    pub model: Option<&'a Seq2SeqModel>,
    pub lm: Option<&'a (dyn SentenceScorer + Sync)>,
    pub k: usize,
    pub beam: usize,
}

impl fmt::Debug for TransferSystem<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransferSystem")
            .field("kind", &self.kind)
            .field("index", &self.index.map(|i| i.attribute()))
            .field("k", &self.k)
            .field("beam", &self.beam)
            .finish_non_exhaustive()
    }
}

impl<'a> TransferSystem<'a> {
    fn index(&self) -> Result<&'a (dyn ContentIndex + Sync)> {
        self.index.ok_or(Error::Unsupported("system needs a retrieval index"))
    }

    fn model(&self) -> Result<&'a Seq2SeqModel> {
        let model = self.model.ok_or(Error::Unsupported("system needs a trained generator"))?;
        if model.kind() != self.kind {
            return Err(Error::Unsupported("generator was trained for a different system"));
        }
        Ok(model)
    }

    pub fn transfer(&self, request: &TransferRequest) -> Result<TransferOutcome> {
        if request.source == request.target {
            return Err(Error::SameAttribute(String::from(request.source.as_str())));
        }
        if let Some(index) = self.index {
            if index.attribute() != &request.target {
                return Err(Error::InvalidConfig(alloc::format!(
                    "index holds {} sentences, request targets {}",
                    index.attribute(),
                    request.target
                )));
            }
        }
        let split = split_for(&request.sentence, &request.source, self.lexicon, self.no_delete)?;
        let mut outcome = TransferOutcome {
            output: Sentence::default(),
            split,
            retrieved: None,
            target_markers: Vec::new(),
            candidates: Vec::new(),
        };
        match self.kind {
            SystemKind::RetrieveOnly | SystemKind::TemplateBased => {
                let hits = self.index()?.query(&outcome.split.content, 1)?;
                let best = hits.best().ok_or(Error::EmptyIndex)?;
                outcome.retrieved = Some(best.entry.original.clone());
                outcome.target_markers = best.entry.marker_ngrams();
                outcome.output = if self.kind == SystemKind::RetrieveOnly {
                    best.entry.original.clone()
                } else {
                    fill_template(&outcome.split, &outcome.target_markers)
                };
            }
            SystemKind::DeleteOnly => {
                outcome.output = transfer_delete_only(&outcome.split, &request.target, self.model()?, self.beam)?;
            }
            SystemKind::DeleteAndRetrieve => {
                let lm = self.lm.ok_or(Error::Unsupported("system needs a language model"))?;
                let candidates =
                    delete_and_retrieve_candidates(&outcome.split, self.model()?, self.index()?, lm, self.k, self.beam)?;
                let best = pick_candidate(&candidates).ok_or(Error::EmptyIndex)?;
                outcome.output = candidates[best].output.clone();
                outcome.retrieved = Some(candidates[best].retrieved.clone());
                outcome.target_markers = candidates[best].markers.clone();
                outcome.candidates = candidates;
            }
        }
        Ok(outcome)
    }
}
