use alloc::vec::Vec;

use crate::corpus::{build_vocab_from, AttributeLabel, LabeledCorpus, Sentence, Vocabulary, END, START};
use crate::error::{Error, Result};
use crate::neural::{
    beam_search, fit, lm_perplexity, max_decode_len, seeded, BeamConfig, Condition, ConditioningKind,
    EpochRecord, NeuralConfig, Rng, Seq2SeqDims, Seq2SeqExample, Seq2SeqParams, SentenceScorer, TrainingLog,
};
use crate::retrieval::{ContentEncoder, ContentIndex};
use crate::salience::{MarkerLexicon, NGram};
use crate::splitter::{passthrough_split, split_by_index, MarkedSentence};

use super::noise::{noise_markers, MarkerNeighbors};
use super::SystemKind;

/// Token joining consecutive markers in a marker-conditioning sequence.
pub const SEPARATOR: &str = "<sep>";

/// What the decoder is conditioned on besides the content.
#[derive(Debug, Clone, PartialEq)]
pub enum Conditioning {
    Attribute(AttributeLabel),
    Markers(Vec<NGram>),
}

/// One reconstruction pair `(content, conditioning) -> original sentence`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub content: Sentence,
    pub conditioning: Conditioning,
    pub target: Sentence,
}

/// A trained generator with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub vocab: Vocabulary,
    pub attributes: Vec<AttributeLabel>,
    pub params: Seq2SeqParams,
}

fn conditioning_kind(kind: SystemKind) -> Result<ConditioningKind> {
    match kind {
        SystemKind::DeleteOnly => Ok(ConditioningKind::AttributeEmbedding),
        SystemKind::DeleteAndRetrieve => Ok(ConditioningKind::MarkerEncoder),
        _ => Err(Error::Unsupported("only the neural systems are trained")),
    }
}

impl Seq2SeqModel {
    pub fn kind(&self) -> SystemKind {
        match self.params.kind {
            ConditioningKind::AttributeEmbedding => SystemKind::DeleteOnly,
            ConditioningKind::MarkerEncoder => SystemKind::DeleteAndRetrieve,
        }
    }

    /// Marker n-grams joined by the separator token.
    pub fn marker_ids(&self, markers: &[NGram]) -> Vec<u32> {
        let sep = self.vocab.id(SEPARATOR);
        let mut ids = Vec::new();
        for (i, m) in markers.iter().enumerate() {
            if i > 0 {
                ids.push(sep);
            }
            ids.extend(m.tokens().iter().map(|t| self.vocab.id(t)));
        }
        ids
    }

    pub fn encode_condition(&self, conditioning: &Conditioning) -> Result<Condition> {
        match (conditioning, self.params.kind) {
            (Conditioning::Attribute(label), ConditioningKind::AttributeEmbedding) => {
                let idx = self
                    .attributes
                    .iter()
                    .position(|a| a == label)
                    .ok_or_else(|| Error::UnknownAttribute(label.as_str().into()))?;
                Ok(Condition::Attribute(idx))
            }
            (Conditioning::Markers(markers), ConditioningKind::MarkerEncoder) => {
                Ok(Condition::Markers(self.marker_ids(markers)))
            }
            _ => Err(Error::Unsupported("conditioning does not match the model kind")),
        }
    }

    pub fn encode_example(&self, example: &TrainingExample) -> Result<Seq2SeqExample> {
        Ok(Seq2SeqExample {
            content: self.vocab.encode(&example.content),
            condition: self.encode_condition(&example.conditioning)?,
            target: self.vocab.encode(&example.target),
        })
    }

    /// Beam-decodes a sentence for `content` under `conditioning`.
    pub fn generate(&self, content: &Sentence, conditioning: &Conditioning, beam: usize) -> Result<Sentence> {
        let condition = self.encode_condition(conditioning)?;
        let ids = self.vocab.encode(content);
        let session = self.params.decoder(&ids, &condition);
        let decoded = beam_search(&session, START, END, BeamConfig::new(beam, max_decode_len(ids.len())));
        self.vocab.decode(&decoded.tokens)
    }
}

impl ContentEncoder for Seq2SeqModel {
    fn dim(&self) -> usize {
        self.params.dims.hidden
    }

    fn encode_content(&self, content: &Sentence) -> Vec<f64> {
        self.params.encode_content(&self.vocab.encode(content))
    }
}

/// Splits a sentence, or keeps it whole when its attribute is exempt from deletion.
pub fn split_for(
    sentence: &Sentence,
    attribute: &AttributeLabel,
    lexicon: &MarkerLexicon,
    no_delete: &[AttributeLabel],
) -> Result<MarkedSentence> {
    if no_delete.contains(attribute) {
        return Ok(passthrough_split(sentence, attribute));
    }
    let idx = lexicon.attribute_index(attribute)?;
    Ok(split_by_index(sentence, idx, lexicon))
}

/// Reconstruction pairs for every sentence of `corpus`.
///
/// Delete-and-retrieve markers are noised with probability `noise`.
pub fn build_training_set(
    kind: SystemKind,
    corpus: &LabeledCorpus,
    lexicon: &MarkerLexicon,
    no_delete: &[AttributeLabel],
    noise: f64,
    rng: &mut Rng,
) -> Result<Vec<TrainingExample>> {
    conditioning_kind(kind)?;
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidConfig("noise probability must lie in [0, 1]".into()));
    }
    let mut tables: Vec<Option<MarkerNeighbors>> = Vec::new();
    for label in corpus.attributes() {
        let table = match (kind, lexicon.attribute_index(label)) {
            (SystemKind::DeleteAndRetrieve, Ok(i)) if noise > 0.0 => Some(MarkerNeighbors::new(lexicon, i)),
            _ => None,
        };
        tables.push(table);
    }
    let mut out = Vec::with_capacity(corpus.len());
    for (a, sentence) in corpus.iter() {
        let label = &corpus.attributes()[a];
        let marked = split_for(sentence, label, lexicon, no_delete)?;
        let conditioning = match kind {
            SystemKind::DeleteOnly => Conditioning::Attribute(label.clone()),
            _ => {
                let markers = marked.marker_ngrams();
                Conditioning::Markers(match &tables[a] {
                    Some(table) => noise_markers(&markers, table, noise, rng),
                    None => markers,
                })
            }
        };
        out.push(TrainingExample {
            content: marked.content,
            conditioning,
            target: sentence.clone(),
        });
    }
    Ok(out)
}

/// Trains a generator for `kind` on reconstruction pairs.
///
/// The vocabulary comes from the training targets; the delete-and-retrieve
/// model also gets the separator token.
pub fn train<F: FnMut(&EpochRecord)>(
    kind: SystemKind,
    attributes: &[AttributeLabel],
    train: &[TrainingExample],
    dev: &[TrainingExample],
    config: &NeuralConfig,
    seed: u64,
    on_epoch: F,
) -> Result<(Seq2SeqModel, TrainingLog)> {
    let conditioning = conditioning_kind(kind)?;
    if train.is_empty() {
        return Err(Error::EmptyInput("generator training set"));
    }
    let mut vocab = build_vocab_from(train.iter().map(|e| &e.target), config.vocab_min_count);
    if conditioning == ConditioningKind::MarkerEncoder {
        vocab.add_token(SEPARATOR);
    }
    let dims = Seq2SeqDims {
        vocab: vocab.len(),
        embedding: config.embedding_dim,
        hidden: config.hidden_dim,
        maxout_pieces: config.maxout_pieces,
        attributes: attributes.len(),
    };
    let mut rng = seeded(seed);
    let params = Seq2SeqParams::new(dims, conditioning, config.init_scale, &mut rng);
    let mut model = Seq2SeqModel {
        vocab,
        attributes: attributes.to_vec(),
        params,
    };
    let encode = |set: &[TrainingExample], m: &Seq2SeqModel| -> Result<Vec<Seq2SeqExample>> {
        set.iter().map(|e| m.encode_example(e)).collect()
    };
    let train_ids = encode(train, &model)?;
    let dev_ids = encode(dev, &model)?;
    let (params, log) = fit(model.params.clone(), &train_ids, &dev_ids, &config.train, &mut rng, on_epoch)?;
    model.params = params;
    Ok((model, log))
}

/// Decodes from the source content conditioned on the target attribute.
pub fn transfer_delete_only(
    source: &MarkedSentence,
    target: &AttributeLabel,
    model: &Seq2SeqModel,
    beam: usize,
) -> Result<Sentence> {
    model.generate(&source.content, &Conditioning::Attribute(target.clone()), beam)
}

/// A candidate produced from one retrieved sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub rank: usize,
    pub retrieved: Sentence,
    pub markers: Vec<NGram>,
    pub output: Sentence,
    pub perplexity: f64,
}

/// Generates one candidate per retrieved neighbour (top `k`), each
/// conditioned on that neighbour's target markers, and scores it by
/// perplexity under `lm`. Candidates are returned in retrieval order.
pub fn delete_and_retrieve_candidates<I, S>(
    source: &MarkedSentence,
    model: &Seq2SeqModel,
    index: &I,
    lm: &S,
    k: usize,
    beam: usize,
) -> Result<Vec<Candidate>>
where
    I: ContentIndex + ?Sized,
    S: SentenceScorer + ?Sized,
{
    let hits = index.query(&source.content, k)?;
    hits.hits
        .iter()
        .enumerate()
        .map(|(rank, hit)| {
            let markers = hit.entry.marker_ngrams();
            let output = model.generate(&source.content, &Conditioning::Markers(markers.clone()), beam)?;
            let perplexity = lm_perplexity(lm, &output);
            Ok(Candidate {
                rank,
                retrieved: hit.entry.original.clone(),
                markers,
                output,
                perplexity,
            })
        })
        .collect()
}

/// Index of the lowest-perplexity candidate; ties go to the better-ranked one.
pub fn pick_candidate(candidates: &[Candidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        match best {
            Some(b) if !(c.perplexity < candidates[b].perplexity) => {}
            _ if c.perplexity.is_nan() => {}
            _ => best = Some(i),
        }
    }
    best.or(if candidates.is_empty() { None } else { Some(0) })
}

/// Full delete-and-retrieve transfer: the lowest-perplexity candidate.
pub fn transfer_delete_and_retrieve<I, S>(
    source: &MarkedSentence,
    model: &Seq2SeqModel,
    index: &I,
    lm: &S,
    k: usize,
    beam: usize,
) -> Result<Sentence>
where
    I: ContentIndex + ?Sized,
    S: SentenceScorer + ?Sized,
{
    let mut candidates = delete_and_retrieve_candidates(source, model, index, lm, k, beam)?;
    let best = pick_candidate(&candidates).ok_or(Error::EmptyIndex)?;
    Ok(candidates.swap_remove(best).output)
}
