//! Bidirectional GRU attribute classifier with average pooling.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{build_vocab, AttributeLabel, LabeledCorpus, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::neural::gru::GruCache;
use crate::neural::layers::{softmax, softmax_cross_entropy};
use crate::neural::tensor::Tensor;
use crate::neural::{
    fit, seeded, Affine, EpochRecord, GruParams, LossStat, NeuralConfig, Objective, Parameters, Rng,
    TrainingLog,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierDims {
    pub vocab: usize,
    pub embedding: usize,
    pub hidden: usize,
    pub attributes: usize,
}

/// Embedding table, forward and backward GRUs, and an affine output over
/// the mean of the concatenated per-step states.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub dims: ClassifierDims,
    pub embedding: Tensor,
    pub forward: GruParams,
    pub backward: GruParams,
    pub output: Affine,
}

struct Pass {
    fwd: Vec<GruCache>,
    bwd: Vec<GruCache>,
    pooled: Vec<f64>,
}

impl ClassifierParams {
    pub fn new(dims: ClassifierDims, init_scale: f64, rng: &mut Rng) -> Self {
        ClassifierParams {
            dims,
            embedding: Tensor::uniform(dims.vocab, dims.embedding, init_scale, rng),
            forward: GruParams::uniform(dims.embedding, dims.hidden, init_scale, rng),
            backward: GruParams::uniform(dims.embedding, dims.hidden, init_scale, rng),
            output: Affine::uniform(2 * dims.hidden, dims.attributes, init_scale, rng),
        }
    }

    fn run(&self, gru: &GruParams, ids: impl Iterator<Item = u32>) -> Vec<GruCache> {
        let mut h = vec![0.0; self.dims.hidden];
        let mut caches = Vec::new();
        for id in ids {
            let cache = gru.forward(self.embedding.row(id as usize), &h);
            h.clone_from(&cache.h);
            caches.push(cache);
        }
        caches
    }

    fn pass(&self, ids: &[u32]) -> Pass {
        let hidden = self.dims.hidden;
        let fwd = self.run(&self.forward, ids.iter().copied());
        let bwd = self.run(&self.backward, ids.iter().rev().copied());
        let mut pooled = vec![0.0; 2 * hidden];
        if !ids.is_empty() {
            let scale = 1.0 / ids.len() as f64;
            for c in &fwd {
                pooled[..hidden].iter_mut().zip(&c.h).for_each(|(p, h)| *p += scale * h);
            }
            for c in &bwd {
                pooled[hidden..].iter_mut().zip(&c.h).for_each(|(p, h)| *p += scale * h);
            }
        }
        Pass { fwd, bwd, pooled }
    }

    pub fn logits(&self, ids: &[u32]) -> Vec<f64> {
        self.output.forward(&self.pass(ids).pooled)
    }

    fn backprop_direction(
        &self,
        gru: &GruParams,
        grad_gru: &mut GruParams,
        grad_embedding: &mut Tensor,
        caches: &[GruCache],
        ids: &[u32],
        d_step: &[f64],
    ) {
        let mut dh = vec![0.0; self.dims.hidden];
        let mut dx = vec![0.0; self.dims.embedding];
        for (cache, &id) in caches.iter().zip(ids).rev() {
            dh.iter_mut().zip(d_step).for_each(|(a, b)| *a += b);
            let mut dh_prev = vec![0.0; self.dims.hidden];
            dx.iter_mut().for_each(|v| *v = 0.0);
            gru.backward(cache, &dh, grad_gru, &mut dx, &mut dh_prev);
            grad_embedding
                .row_mut(id as usize)
                .iter_mut()
                .zip(&dx)
                .for_each(|(g, d)| *g += d);
            dh = dh_prev;
        }
    }
}

impl Parameters for ClassifierParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding];
        out.extend(self.forward.tensors());
        out.extend(self.backward.tensors());
        out.extend(self.output.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding];
        out.extend(self.forward.tensors_mut());
        out.extend(self.backward.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

impl Objective for ClassifierParams {
    /// Token ids and the gold attribute index.
    type Example = (Vec<u32>, usize);

    fn loss(&self, (ids, label): &Self::Example) -> LossStat {
        LossStat {
            total: softmax_cross_entropy(&self.logits(ids), *label).0,
            count: 1,
        }
    }

    fn accumulate_gradient(&self, (ids, label): &Self::Example, grads: &mut Self) -> LossStat {
        let pass = self.pass(ids);
        let (loss, dlogits) = softmax_cross_entropy(&self.output.forward(&pass.pooled), *label);
        let mut dpooled = vec![0.0; pass.pooled.len()];
        self.output.backward(&pass.pooled, &dlogits, &mut grads.output, &mut dpooled);
        if !ids.is_empty() {
            let hidden = self.dims.hidden;
            let scale = 1.0 / ids.len() as f64;
            let d_fwd: Vec<f64> = dpooled[..hidden].iter().map(|d| d * scale).collect();
            let d_bwd: Vec<f64> = dpooled[hidden..].iter().map(|d| d * scale).collect();
            let reversed: Vec<u32> = ids.iter().rev().copied().collect();
            self.backprop_direction(
                &self.forward,
                &mut grads.forward,
                &mut grads.embedding,
                &pass.fwd,
                ids,
                &d_fwd,
            );
            self.backprop_direction(
                &self.backward,
                &mut grads.backward,
                &mut grads.embedding,
                &pass.bwd,
                &reversed,
                &d_bwd,
            );
        }
        LossStat { total: loss, count: 1 }
    }
}

/// A trained classifier with its vocabulary and attribute order.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub vocab: Vocabulary,
    pub attributes: Vec<AttributeLabel>,
    pub params: ClassifierParams,
}

impl Classifier {
    /// Posterior over attributes, in attribute order.
    pub fn probabilities(&self, sentence: &Sentence) -> Vec<f64> {
        softmax(&self.params.logits(&self.vocab.encode(sentence)))
    }

    /// Index of the most probable attribute; ties go to the lower index.
    pub fn predict(&self, sentence: &Sentence) -> usize {
        let logits = self.params.logits(&self.vocab.encode(sentence));
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn predict_label(&self, sentence: &Sentence) -> &AttributeLabel {
        &self.attributes[self.predict(sentence)]
    }

    pub fn attribute_index(&self, label: &AttributeLabel) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::UnknownAttribute(label.as_str().into()))
    }

    /// Fraction of `corpus` sentences assigned their own attribute.
    pub fn accuracy(&self, corpus: &LabeledCorpus) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::EmptyInput("evaluation corpus"));
        }
        let mut correct = 0usize;
        for (a, sentence) in corpus.iter() {
            let gold = self.attribute_index(&corpus.attributes()[a])?;
            correct += usize::from(self.predict(sentence) == gold);
        }
        Ok(correct as f64 / corpus.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierLog {
    pub training: TrainingLog,
    pub dev_accuracy: Option<f64>,
}

fn encode(vocab: &Vocabulary, corpus: &LabeledCorpus, attributes: &[AttributeLabel]) -> Result<Vec<(Vec<u32>, usize)>> {
    corpus
        .iter()
        .map(|(a, s)| {
            let label = &corpus.attributes()[a];
            let idx = attributes
                .iter()
                .position(|x| x == label)
                .ok_or_else(|| Error::UnknownAttribute(label.as_str().into()))?;
            Ok((vocab.encode(s), idx))
        })
        .collect()
}

/// Trains on `train`, early-stopping on `dev` when it is non-empty.
pub fn train_classifier<F: FnMut(&EpochRecord)>(
    train: &LabeledCorpus,
    dev: Option<&LabeledCorpus>,
    config: &NeuralConfig,
    seed: u64,
    on_epoch: F,
) -> Result<(Classifier, ClassifierLog)> {
    let attributes = train.attributes().to_vec();
    if attributes.len() < 2 {
        return Err(Error::TooFewAttributes(attributes.len()));
    }
    if train.is_empty() {
        return Err(Error::EmptyInput("classifier training corpus"));
    }
    let vocab = build_vocab(train, config.vocab_min_count);
    let dims = ClassifierDims {
        vocab: vocab.len(),
        embedding: config.embedding_dim,
        hidden: config.hidden_dim,
        attributes: attributes.len(),
    };
    let mut rng = seeded(seed);
    let params = ClassifierParams::new(dims, config.init_scale, &mut rng);
    let train_ids = encode(&vocab, train, &attributes)?;
    let dev_ids = match dev {
        Some(d) => encode(&vocab, d, &attributes)?,
        None => Vec::new(),
    };
    let (params, training) = fit(params, &train_ids, &dev_ids, &config.train, &mut rng, on_epoch)?;
    let classifier = Classifier {
        vocab,
        attributes,
        params,
    };
    let dev_accuracy = match dev {
        Some(d) if !d.is_empty() => Some(classifier.accuracy(d)?),
        _ => None,
    };
    Ok((classifier, ClassifierLog { training, dev_accuracy }))
}

/// Fraction of `outputs` the classifier assigns to `target`.
pub fn classifier_score(outputs: &[Sentence], target: &AttributeLabel, classifier: &Classifier) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyInput("outputs"));
    }
    let t = classifier.attribute_index(target)?;
    let hits = outputs.iter().filter(|s| classifier.predict(s) == t).count();
    Ok(hits as f64 / outputs.len() as f64)
}

/// Like [`classifier_score`] with a target per output.
pub fn classifier_score_per_target(
    outputs: &[Sentence],
    targets: &[AttributeLabel],
    classifier: &Classifier,
) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyInput("outputs"));
    }
    if outputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: outputs.len(),
            right: targets.len(),
        });
    }
    let mut hits = 0usize;
    for (s, t) in outputs.iter().zip(targets) {
        hits += usize::from(classifier.predict(s) == classifier.attribute_index(t)?);
    }
    Ok(hits as f64 / outputs.len() as f64)
}
