//! Text attribute transfer by deleting attribute markers, retrieving similar
//! target-attribute sentences and generating a rewrite.
//!
//! The pipeline has three steps:
//!
//! 1. **Delete.** [`salience::extract_markers`] finds n-grams whose smoothed
//!    relative frequency under one attribute exceeds a threshold, and
//!    [`splitter::split`] removes those markers from a sentence, leaving its
//!    content.
//! 2. **Retrieve.** [`retrieval`] finds the target-attribute sentence whose
//!    content is closest to the source content (TF-IDF cosine or Euclidean
//!    distance between learned content encodings).
//! 3. **Generate.** [`systems`] implements the four generators: verbatim
//!    retrieval, template slot filling, and two GRU encoder-decoders
//!    conditioned either on a target attribute embedding or on the retrieved
//!    sentence's markers.
//!
//! [`neural`] is the small numerical engine behind the generators and the
//! language-model reranker, and [`eval`] carries the automatic metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, corpus
//! loading and the command line live in the `drg` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod neural;
pub mod retrieval;
pub mod salience;
pub mod splitter;
pub mod systems;

pub use corpus::{AttributeLabel, LabeledCorpus, Sentence, Split, Vocabulary};
pub use error::{Error, Result};
pub use salience::{MarkerLexicon, NGram, SalienceConfig};
pub use splitter::{MarkedSentence, MarkerSpan};
pub use systems::{SystemKind, TransferRequest};
