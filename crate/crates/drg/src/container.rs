//! Binary files for trained models and retrieval indexes.
//!
//! Every file has the same layout, all integers little-endian:
//!
//! | field          | encoding                                          |
//! |----------------|---------------------------------------------------|
//! | magic          | 8 bytes, one per file kind (see [`FileKind`])     |
//! | format version | `u32`, currently [`FORMAT_VERSION`]               |
//! | metadata       | `u64` length, then UTF-8 TOML                     |
//! | payload        | `u64` length, then UTF-8 text (index entries)     |
//! | tensor count   | `u64`                                             |
//! | each tensor    | `u64` rows, `u64` cols, rows * cols `f64` values  |
//!
//! The metadata carries dimensions, the ordered vocabulary, the attribute
//! list and the configuration that produced the file. Tensors follow the
//! traversal order of [`Parameters::tensors`]. Loading checks the magic,
//! the version and every tensor shape.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use drg_core::corpus::{AttributeLabel, Sentence, Vocabulary};
use drg_core::eval::{Classifier, ClassifierDims, ClassifierParams};
use drg_core::neural::lm::LmDims;
use drg_core::neural::{seeded, LanguageModel, LmParams, Parameters, Seq2SeqDims, Seq2SeqParams, Tensor};
use drg_core::retrieval::{ContentEncoder, ContentIndex, EmbeddingIndex, Metric, TfIdfIndex};
use drg_core::salience::NGram;
use drg_core::splitter::{MarkedSentence, MarkerSpan};
use drg_core::systems::{Seq2SeqModel, SystemKind};

use crate::error::{Error, Result};
use crate::text::write_file;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Generator,
    LanguageModel,
    Classifier,
    Index,
}

impl FileKind {
    pub fn magic(self) -> &'static [u8; 8] {
        match self {
            FileKind::Generator => b"DRGMODEL",
            FileKind::LanguageModel => b"DRGLANGM",
            FileKind::Classifier => b"DRGCLASS",
            FileKind::Index => b"DRGINDEX",
        }
    }
}

/// A decoded file before its tensors are given a meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct Container<M> {
    pub metadata: M,
    pub payload: String,
    pub tensors: Vec<Tensor>,
}

fn encode<M: Serialize>(kind: FileKind, metadata: &M, payload: &str, tensors: &[&Tensor]) -> Result<Vec<u8>> {
    let meta = toml::to_string(metadata).map_err(|e| Error::Usage(format!("cannot encode metadata: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(kind.magic());
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for block in [meta.as_bytes(), payload.as_bytes()] {
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        out.extend_from_slice(block);
    }
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_container<M: Serialize>(
    path: &Path,
    kind: FileKind,
    metadata: &M,
    payload: &str,
    tensors: &[&Tensor],
) -> Result<()> {
    let bytes = encode(kind, metadata, payload, tensors)?;
    write_file(path, |w| w.write_all(&bytes))
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::format(self.path, format!("truncated file while reading {what}")));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let n = self.u64(what)?;
        usize::try_from(n).map_err(|_| Error::format(self.path, format!("{what} too large")))
    }

    fn text(&mut self, what: &str) -> Result<String> {
        let n = self.len(what)?;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::format(self.path, format!("{what} is not UTF-8")))
    }
}

pub fn read_container<M: DeserializeOwned>(path: &Path, kind: FileKind) -> Result<Container<M>> {
    let bytes = fs::read(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    let mut c = Cursor { path, bytes: &bytes };
    if c.take(8, "magic")? != kind.magic() {
        return Err(Error::format(path, format!("not a {kind:?} file")));
    }
    let version = u32::from_le_bytes(c.take(4, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported format version {version}")));
    }
    let meta = c.text("metadata")?;
    let metadata = toml::from_str(&meta).map_err(|e| Error::format(path, format!("bad metadata: {e}")))?;
    let payload = c.text("payload")?;
    let count = c.len("tensor count")?;
    let mut tensors = Vec::new();
    for i in 0..count {
        let rows = c.len("tensor shape")?;
        let cols = c.len("tensor shape")?;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::format(path, format!("tensor {i} too large")))?;
        let data = c
            .take(n, "tensor data")?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push(Tensor::from_vec(rows, cols, data)?);
    }
    if !c.bytes.is_empty() {
        return Err(Error::format(path, "trailing bytes after the last tensor"));
    }
    Ok(Container {
        metadata,
        payload,
        tensors,
    })
}

/// Copies `tensors` into `params`, requiring the same count and shapes.
pub fn fill_parameters<P: Parameters>(path: &Path, params: &mut P, tensors: Vec<Tensor>) -> Result<()> {
    let mut slots = params.tensors_mut();
    if slots.len() != tensors.len() {
        return Err(Error::format(
            path,
            format!("expected {} tensors, found {}", slots.len(), tensors.len()),
        ));
    }
    for (i, (slot, t)) in slots.iter_mut().zip(tensors).enumerate() {
        if slot.shape() != t.shape() {
            return Err(Error::format(
                path,
                format!("tensor {i} has shape {:?}, expected {:?}", t.shape(), slot.shape()),
            ));
        }
        **slot = t;
    }
    Ok(())
}

fn labels(path: &Path, names: &[String]) -> Result<Vec<AttributeLabel>> {
    names
        .iter()
        .map(|n| AttributeLabel::new(n.as_str()).map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

fn vocabulary(path: &Path, tokens: Vec<String>, expected: usize) -> Result<Vocabulary> {
    let vocab = Vocabulary::from_ordered(tokens).map_err(|e| Error::format(path, e.to_string()))?;
    if vocab.len() != expected {
        return Err(Error::format(
            path,
            format!("vocabulary has {} entries, dims say {expected}", vocab.len()),
        ));
    }
    Ok(vocab)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GeneratorMeta {
    system: String,
    vocab_size: usize,
    embedding: usize,
    hidden: usize,
    maxout_pieces: usize,
    attributes: Vec<String>,
    vocab: Vec<String>,
    config: String,
}

pub fn save_generator(path: &Path, model: &Seq2SeqModel, config: &str) -> Result<()> {
    let d = model.params.dims;
    let meta = GeneratorMeta {
        system: model.kind().as_str().into(),
        vocab_size: d.vocab,
        embedding: d.embedding,
        hidden: d.hidden,
        maxout_pieces: d.maxout_pieces,
        attributes: model.attributes.iter().map(|a| a.as_str().into()).collect(),
        vocab: model.vocab.tokens().to_vec(),
        config: config.into(),
    };
    write_container(path, FileKind::Generator, &meta, "", &model.params.tensors())
}

pub fn load_generator(path: &Path) -> Result<Seq2SeqModel> {
    let c: Container<GeneratorMeta> = read_container(path, FileKind::Generator)?;
    let m = c.metadata;
    let kind: SystemKind = m.system.parse().map_err(|e: drg_core::Error| Error::format(path, e.to_string()))?;
    let conditioning = match kind {
        SystemKind::DeleteOnly => drg_core::neural::ConditioningKind::AttributeEmbedding,
        SystemKind::DeleteAndRetrieve => drg_core::neural::ConditioningKind::MarkerEncoder,
        _ => return Err(Error::format(path, format!("{kind} has no trained generator"))),
    };
    let attributes = labels(path, &m.attributes)?;
    let dims = Seq2SeqDims {
        vocab: m.vocab_size,
        embedding: m.embedding,
        hidden: m.hidden,
        maxout_pieces: m.maxout_pieces,
        attributes: attributes.len(),
    };
    if dims.maxout_pieces == 0 {
        return Err(Error::format(path, "maxout needs at least one piece"));
    }
    let vocab = vocabulary(path, m.vocab, m.vocab_size)?;
    let mut params = Seq2SeqParams::new(dims, conditioning, 1.0, &mut seeded(0));
    fill_parameters(path, &mut params, c.tensors)?;
    Ok(Seq2SeqModel {
        vocab,
        attributes,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LmMeta {
    attribute: String,
    vocab_size: usize,
    embedding: usize,
    hidden: usize,
    vocab: Vec<String>,
    config: String,
}

pub fn save_language_model(path: &Path, lm: &LanguageModel, attribute: &AttributeLabel, config: &str) -> Result<()> {
    let d = lm.params.dims;
    let meta = LmMeta {
        attribute: attribute.as_str().into(),
        vocab_size: d.vocab,
        embedding: d.embedding,
        hidden: d.hidden,
        vocab: lm.vocab.tokens().to_vec(),
        config: config.into(),
    };
    write_container(path, FileKind::LanguageModel, &meta, "", &lm.params.tensors())
}

/// The model and the attribute it was trained on.
pub fn load_language_model(path: &Path) -> Result<(LanguageModel, AttributeLabel)> {
    let c: Container<LmMeta> = read_container(path, FileKind::LanguageModel)?;
    let m = c.metadata;
    let attribute = labels(path, std::slice::from_ref(&m.attribute))?.remove(0);
    let dims = LmDims {
        vocab: m.vocab_size,
        embedding: m.embedding,
        hidden: m.hidden,
    };
    let vocab = vocabulary(path, m.vocab, m.vocab_size)?;
    let mut params = LmParams::new(dims, 1.0, &mut seeded(0));
    fill_parameters(path, &mut params, c.tensors)?;
    Ok((LanguageModel { vocab, params }, attribute))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassifierMeta {
    vocab_size: usize,
    embedding: usize,
    hidden: usize,
    attributes: Vec<String>,
    vocab: Vec<String>,
    config: String,
}

pub fn save_classifier(path: &Path, classifier: &Classifier, config: &str) -> Result<()> {
    let d = classifier.params.dims;
    let meta = ClassifierMeta {
        vocab_size: d.vocab,
        embedding: d.embedding,
        hidden: d.hidden,
        attributes: classifier.attributes.iter().map(|a| a.as_str().into()).collect(),
        vocab: classifier.vocab.tokens().to_vec(),
        config: config.into(),
    };
    write_container(path, FileKind::Classifier, &meta, "", &classifier.params.tensors())
}

pub fn load_classifier(path: &Path) -> Result<Classifier> {
    let c: Container<ClassifierMeta> = read_container(path, FileKind::Classifier)?;
    let m = c.metadata;
    let attributes = labels(path, &m.attributes)?;
    let dims = ClassifierDims {
        vocab: m.vocab_size,
        embedding: m.embedding,
        hidden: m.hidden,
        attributes: attributes.len(),
    };
    let vocab = vocabulary(path, m.vocab, m.vocab_size)?;
    let mut params = ClassifierParams::new(dims, 1.0, &mut seeded(0));
    fill_parameters(path, &mut params, c.tensors)?;
    Ok(Classifier {
        vocab,
        attributes,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexMeta {
    attribute: String,
    metric: String,
    entries: usize,
    /// Encoding size for the embedding metric, 0 otherwise.
    dim: usize,
    /// TF-IDF terms in the order of the idf tensor.
    terms: Vec<String>,
    config: String,
}

// One entry per line: `original<TAB>start:len:salience|...`.
fn entry_line(e: &MarkedSentence) -> String {
    let spans: Vec<String> = e
        .markers
        .iter()
        .map(|m| format!("{}:{}:{}", m.start, m.ngram.len(), m.salience))
        .collect();
    format!("{}\t{}", e.original, spans.join("|"))
}

fn parse_entry(path: &Path, line_no: usize, line: &str, attribute: &AttributeLabel) -> Result<MarkedSentence> {
    let bad = |msg: &str| Error::line(path, line_no, msg.to_string());
    let (original, spans) = line.split_once('\t').ok_or_else(|| bad("expected original<TAB>spans"))?;
    let original = Sentence::from_tokens(original.split(' ').filter(|t| !t.is_empty()));
    let tokens = original.tokens();
    let mut markers = Vec::new();
    let mut content = Vec::new();
    let mut next = 0;
    for span in spans.split('|').filter(|s| !s.is_empty()) {
        let mut parts = span.splitn(3, ':');
        let (Some(start), Some(len), Some(salience)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("malformed marker span"));
        };
        let start: usize = start.parse().map_err(|_| bad("bad span start"))?;
        let len: usize = len.parse().map_err(|_| bad("bad span length"))?;
        let salience: f64 = salience.parse().map_err(|_| bad("bad span salience"))?;
        if start < next || len == 0 || start + len > tokens.len() {
            return Err(bad("marker span out of order or out of range"));
        }
        content.extend_from_slice(&tokens[next..start]);
        markers.push(MarkerSpan {
            ngram: NGram::from(&tokens[start..start + len]),
            start,
            salience,
        });
        next = start + len;
    }
    content.extend_from_slice(&tokens[next..]);
    Ok(MarkedSentence {
        source_attribute: attribute.clone(),
        content: Sentence::from_tokens(content),
        markers,
        original,
    })
}

/// Writes the entries and either the idf table or the content encodings.
///
/// The embedding metric needs the `encoder` the index was built with.
pub fn save_index(path: &Path, index: &dyn ContentIndex, encoder: Option<&Seq2SeqModel>, config: &str) -> Result<()> {
    let entries = index.entries();
    let payload: String = entries.iter().map(|e| entry_line(e) + "\n").collect();
    let mut meta = IndexMeta {
        attribute: index.attribute().as_str().into(),
        metric: index.metric().as_str().into(),
        entries: entries.len(),
        dim: 0,
        terms: Vec::new(),
        config: config.into(),
    };
    let tensor = match index.metric() {
        Metric::TfIdf => {
            let rebuilt = TfIdfIndex::build(index.attribute().clone(), entries.to_vec())?;
            let table = rebuilt.idf_table();
            meta.terms = table.iter().map(|(t, _)| t.to_string()).collect();
            Tensor::from_vec(table.len(), 1, table.iter().map(|(_, w)| *w).collect())?
        }
        Metric::Embedding => {
            let encoder = encoder.ok_or_else(|| Error::Usage("saving an embedding index needs its encoder".into()))?;
            meta.dim = encoder.dim();
            let mut data = Vec::with_capacity(entries.len() * meta.dim);
            for e in entries {
                data.extend(encoder.encode_content(&e.content));
            }
            Tensor::from_vec(entries.len(), meta.dim, data)?
        }
    };
    write_container(path, FileKind::Index, &meta, &payload, &[&tensor])
}

/// Loads an index; the embedding metric queries through `encoder`, whose size must match.
pub fn load_index<'m>(
    path: &Path,
    encoder: Option<&'m Seq2SeqModel>,
) -> Result<Box<dyn ContentIndex + Sync + 'm>> {
    let c: Container<IndexMeta> = read_container(path, FileKind::Index)?;
    let m = c.metadata;
    let attribute = labels(path, std::slice::from_ref(&m.attribute))?.remove(0);
    let metric: Metric = m.metric.parse().map_err(|e: drg_core::Error| Error::format(path, e.to_string()))?;
    let entries = c
        .payload
        .lines()
        .enumerate()
        .map(|(i, l)| parse_entry(path, i + 1, l, &attribute))
        .collect::<Result<Vec<_>>>()?;
    if entries.len() != m.entries {
        return Err(Error::format(path, format!("expected {} entries, found {}", m.entries, entries.len())));
    }
    let tensor = match <[Tensor; 1]>::try_from(c.tensors) {
        Ok([t]) => t,
        Err(_) => return Err(Error::format(path, "expected one tensor")),
    };
    match metric {
        Metric::TfIdf => {
            if tensor.shape() != (m.terms.len(), 1) {
                return Err(Error::format(path, "idf table does not match the term list"));
            }
            let idf = m.terms.into_iter().zip(tensor.data().iter().copied()).collect();
            Ok(Box::new(TfIdfIndex::from_parts(attribute, idf, entries)?))
        }
        Metric::Embedding => {
            let encoder = encoder.ok_or_else(|| Error::Usage("embedding index needs the trained generator".into()))?;
            if tensor.shape() != (entries.len(), m.dim) || m.dim != encoder.dim() {
                return Err(Error::format(
                    path,
                    format!("stored encodings are {:?}, generator encodes {} values", tensor.shape(), encoder.dim()),
                ));
            }
            let vectors = (0..tensor.rows()).map(|r| tensor.row(r).to_vec()).collect();
            Ok(Box::new(EmbeddingIndex::from_parts(attribute, entries, vectors, encoder)?))
        }
    }
}

/// The configuration echoed into any of these files.
pub fn config_echo(path: &Path) -> Result<String> {
    #[derive(Deserialize)]
    struct Echo {
        config: String,
    }
    let bytes = fs::read(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    let kind = [FileKind::Generator, FileKind::LanguageModel, FileKind::Classifier, FileKind::Index]
        .into_iter()
        .find(|k| bytes.starts_with(k.magic()))
        .ok_or_else(|| Error::format(path, "unknown file kind"))?;
    let c: Container<Echo> = read_container(path, kind)?;
    Ok(c.metadata.config)
}
