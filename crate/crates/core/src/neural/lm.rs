//! Left-to-right GRU language model used to rerank generated candidates.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Sentence, Vocabulary, END, START};

use super::gru::{GruCache, GruParams};
use super::layers::{log_softmax, softmax_cross_entropy, Affine};
use super::model::{LossStat, Objective, Parameters};
use super::tensor::Tensor;
use super::Rng;

/// Anything that can score a sentence token by token.
pub trait SentenceScorer {
    /// `ln p(y_t | y_<t)` for every token of `sentence` followed by the end symbol.
    fn token_log_probs(&self, sentence: &Sentence) -> Vec<f64>;
}

/// `exp(-(1/T) sum_t ln p(y_t | y_<t))`, where the `T` terms include the end symbol.
pub fn lm_perplexity<S: SentenceScorer + ?Sized>(lm: &S, sentence: &Sentence) -> f64 {
    let lps = lm.token_log_probs(sentence);
    let mean = lps.iter().sum::<f64>() / lps.len() as f64;
    libm::exp(-mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmDims {
    pub vocab: usize,
    pub embedding: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmParams {
    pub dims: LmDims,
    pub embedding: Tensor,
    pub gru: GruParams,
    pub output: Affine,
}

impl LmParams {
    pub fn new(dims: LmDims, init_scale: f64, rng: &mut Rng) -> Self {
        LmParams {
            dims,
            embedding: Tensor::uniform(dims.vocab, dims.embedding, init_scale, rng),
            gru: GruParams::uniform(dims.embedding, dims.hidden, init_scale, rng),
            output: Affine::uniform(dims.hidden, dims.vocab, init_scale, rng),
        }
    }

    /// Log-probabilities of `ids` followed by `</s>`.
    pub fn sequence_log_probs(&self, ids: &[u32]) -> Vec<f64> {
        let mut h = vec![0.0; self.dims.hidden];
        let mut previous = START;
        let mut out = Vec::with_capacity(ids.len() + 1);
        for &target in ids.iter().chain(core::iter::once(&END)) {
            h = self.gru.forward(self.embedding.row(previous as usize), &h).h;
            out.push(log_softmax(&self.output.forward(&h))[target as usize]);
            previous = target;
        }
        out
    }

    fn forward_backward(&self, ids: &[u32], grads: Option<&mut LmParams>) -> LossStat {
        let mut h = vec![0.0; self.dims.hidden];
        let mut previous = START;
        let mut steps: Vec<(u32, GruCache, Vec<f64>)> = Vec::with_capacity(ids.len() + 1);
        let mut total = 0.0;
        for &target in ids.iter().chain(core::iter::once(&END)) {
            let cache = self.gru.forward(self.embedding.row(previous as usize), &h);
            let (loss, dlogits) = softmax_cross_entropy(&self.output.forward(&cache.h), target as usize);
            total += loss;
            h.clone_from(&cache.h);
            steps.push((previous, cache, dlogits));
            previous = target;
        }
        let stat = LossStat {
            total,
            count: steps.len(),
        };
        let Some(grads) = grads else {
            return stat;
        };
        let mut dh = vec![0.0; self.dims.hidden];
        let mut dx = vec![0.0; self.dims.embedding];
        for (previous, cache, dlogits) in steps.iter().rev() {
            self.output.backward(&cache.h, dlogits, &mut grads.output, &mut dh);
            let mut dh_prev = vec![0.0; self.dims.hidden];
            dx.iter_mut().for_each(|v| *v = 0.0);
            self.gru.backward(cache, &dh, &mut grads.gru, &mut dx, &mut dh_prev);
            grads
                .embedding
                .row_mut(*previous as usize)
                .iter_mut()
                .zip(&dx)
                .for_each(|(g, d)| *g += d);
            dh = dh_prev;
        }
        stat
    }
}

impl Parameters for LmParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding];
        out.extend(self.gru.tensors());
        out.extend(self.output.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding];
        out.extend(self.gru.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

impl Objective for LmParams {
    type Example = Vec<u32>;

    fn loss(&self, example: &Vec<u32>) -> LossStat {
        self.forward_backward(example, None)
    }

    fn accumulate_gradient(&self, example: &Vec<u32>, grads: &mut Self) -> LossStat {
        self.forward_backward(example, Some(grads))
    }
}

/// A trained language model together with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    pub vocab: Vocabulary,
    pub params: LmParams,
}

impl SentenceScorer for LanguageModel {
    fn token_log_probs(&self, sentence: &Sentence) -> Vec<f64> {
        self.params.sequence_log_probs(&self.vocab.encode(sentence))
    }
}

/// Trains a language model on one attribute's sentences.
///
/// The vocabulary is built from `train` with `config.vocab_min_count`.
/// Same seed and data give bit-identical parameters.
pub fn train_lm<F: FnMut(&super::train::EpochRecord)>(
    train: &[Sentence],
    dev: &[Sentence],
    config: &super::NeuralConfig,
    seed: u64,
    on_epoch: F,
) -> crate::error::Result<(LanguageModel, super::train::TrainingLog)> {
    if train.is_empty() {
        return Err(crate::error::Error::EmptyInput("language model training corpus"));
    }
    let vocab = crate::corpus::build_vocab_from(train, config.vocab_min_count);
    let mut rng = super::seeded(seed);
    let dims = LmDims {
        vocab: vocab.len(),
        embedding: config.embedding_dim,
        hidden: config.hidden_dim,
    };
    let params = LmParams::new(dims, config.init_scale, &mut rng);
    let encode = |s: &[Sentence]| s.iter().map(|x| vocab.encode(x)).collect::<Vec<_>>();
    let (train_ids, dev_ids) = (encode(train), encode(dev));
    let (params, log) = super::train::fit(params, &train_ids, &dev_ids, &config.train, &mut rng, on_epoch)?;
    Ok((LanguageModel { vocab, params }, log))
}
