//! GRU encoder-decoder with a maxout output layer.
//!
//! The content sequence is encoded by one GRU. A second conditioning vector
//! comes either from a learned attribute embedding or from a second GRU run
//! over a marker sequence. The two are concatenated into the conditioning
//! vector `c`; the decoder starts from `tanh(W_init c + b_init)` and receives
//! `[embedding(previous token); c]` as input at every step. Logits come from a
//! maxout layer over the decoder state.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{END, PAD, START};

use super::beam::StepModel;
use super::gru::{GruCache, GruParams};
use super::layers::{softmax_cross_entropy, log_softmax, Affine, Maxout};
use super::model::{LossStat, Objective, Parameters};
use super::tensor::Tensor;
use super::Rng;

/// Where the second half of the conditioning vector comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditioningKind {
    /// One learned vector per attribute.
    AttributeEmbedding,
    /// Final state of a GRU over a marker sequence.
    MarkerEncoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seq2SeqDims {
    pub vocab: usize,
    pub embedding: usize,
    pub hidden: usize,
    pub maxout_pieces: usize,
    pub attributes: usize,
}

impl Seq2SeqDims {
    pub fn conditioning(&self) -> usize {
        2 * self.hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Attribute(usize),
    Markers(Vec<u32>),
}

/// Encoded training pair: target is decoded after `<s>` and followed by `</s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqExample {
    pub content: Vec<u32>,
    pub condition: Condition,
    pub target: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqParams {
    pub dims: Seq2SeqDims,
    pub kind: ConditioningKind,
    /// Shared by both encoders and the decoder.
    pub embedding: Tensor,
    pub content_encoder: GruParams,
    pub marker_encoder: Option<GruParams>,
    pub attribute_embedding: Option<Tensor>,
    pub init: Affine,
    pub decoder: GruParams,
    pub output: Maxout,
}

impl Seq2SeqParams {
    /// All parameters drawn from `uniform(-init_scale, init_scale)`.
    pub fn new(dims: Seq2SeqDims, kind: ConditioningKind, init_scale: f64, rng: &mut Rng) -> Self {
        let Seq2SeqDims {
            vocab,
            embedding,
            hidden,
            maxout_pieces,
            attributes,
        } = dims;
        let embedding_table = Tensor::uniform(vocab, embedding, init_scale, rng);
        let content_encoder = GruParams::uniform(embedding, hidden, init_scale, rng);
        let (marker_encoder, attribute_embedding) = match kind {
            ConditioningKind::MarkerEncoder => {
                (Some(GruParams::uniform(embedding, hidden, init_scale, rng)), None)
            }
            ConditioningKind::AttributeEmbedding => {
                (None, Some(Tensor::uniform(attributes, hidden, init_scale, rng)))
            }
        };
        let init = Affine::uniform(dims.conditioning(), hidden, init_scale, rng);
        let decoder = GruParams::uniform(embedding + dims.conditioning(), hidden, init_scale, rng);
        let output = Maxout::uniform(hidden, vocab, maxout_pieces, init_scale, rng);
        Seq2SeqParams {
            dims,
            kind,
            embedding: embedding_table,
            content_encoder,
            marker_encoder,
            attribute_embedding,
            init,
            decoder,
            output,
        }
    }

    fn embed(&self, id: u32) -> &[f64] {
        self.embedding.row(id as usize)
    }

    fn run_encoder(&self, gru: &GruParams, ids: &[u32]) -> (Vec<GruCache>, Vec<f64>) {
        let mut h = vec![0.0; self.dims.hidden];
        let mut caches = Vec::with_capacity(ids.len());
        for &id in ids {
            let cache = gru.forward(self.embed(id), &h);
            h.clone_from(&cache.h);
            caches.push(cache);
        }
        (caches, h)
    }

    /// Final content-encoder state (zeros for empty content).
    pub fn encode_content(&self, content: &[u32]) -> Vec<f64> {
        self.run_encoder(&self.content_encoder, content).1
    }

    /// The concatenated conditioning vector for `content` and `condition`.
    pub fn conditioning(&self, content: &[u32], condition: &Condition) -> Vec<f64> {
        let mut c = self.encode_content(content);
        c.extend(self.second_half(condition).1);
        c
    }

    fn second_half(&self, condition: &Condition) -> (Vec<GruCache>, Vec<f64>) {
        match (condition, &self.attribute_embedding, &self.marker_encoder) {
            (Condition::Attribute(a), Some(table), _) => (Vec::new(), table.row(*a).to_vec()),
            (Condition::Markers(ids), _, Some(gru)) => self.run_encoder(gru, ids),
            // Mismatched conditioning yields an all-zero half.
            _ => (Vec::new(), vec![0.0; self.dims.hidden]),
        }
    }

    fn initial_decoder_state(&self, conditioning: &[f64]) -> Vec<f64> {
        self.init.forward(conditioning).into_iter().map(libm::tanh).collect()
    }

    fn decoder_input(&self, previous: u32, conditioning: &[f64]) -> Vec<f64> {
        let mut x = self.embed(previous).to_vec();
        x.extend_from_slice(conditioning);
        x
    }

    /// Log-probabilities of the next token; `<pad>` and `<s>` are masked.
    pub fn next_log_probs(&self, h: &[f64]) -> Vec<f64> {
        let (logits, _) = self.output.forward(h);
        let mut lp = log_softmax(&logits);
        lp[PAD as usize] = f64::NEG_INFINITY;
        lp[START as usize] = f64::NEG_INFINITY;
        lp
    }

    /// A decoding session for one conditioning vector.
    pub fn decoder<'a>(&'a self, content: &[u32], condition: &Condition) -> DecoderSession<'a> {
        DecoderSession {
            params: self,
            conditioning: self.conditioning(content, condition),
        }
    }

    fn backprop_encoder(
        &self,
        gru: &GruParams,
        grad_gru: &mut GruParams,
        grad_embedding: &mut Tensor,
        ids: &[u32],
        caches: &[GruCache],
        d_final: &[f64],
    ) {
        let n = self.dims.hidden;
        let mut dh = d_final.to_vec();
        let mut dx = vec![0.0; self.dims.embedding];
        for (cache, &id) in caches.iter().zip(ids).rev() {
            let mut dh_prev = vec![0.0; n];
            dx.iter_mut().for_each(|v| *v = 0.0);
            gru.backward(cache, &dh, grad_gru, &mut dx, &mut dh_prev);
            grad_embedding.row_mut(id as usize).iter_mut().zip(&dx).for_each(|(g, d)| *g += d);
            dh = dh_prev;
        }
    }

    fn forward_backward(&self, example: &Seq2SeqExample, grads: Option<&mut Seq2SeqParams>) -> LossStat {
        let hidden = self.dims.hidden;
        let (content_caches, content_h) = self.run_encoder(&self.content_encoder, &example.content);
        let (marker_caches, second) = self.second_half(&example.condition);
        let mut conditioning = content_h;
        conditioning.extend_from_slice(&second);

        let h0 = self.initial_decoder_state(&conditioning);
        let mut h = h0.clone();
        let mut previous = START;
        let mut steps = Vec::with_capacity(example.target.len() + 1);
        let mut total = 0.0;
        for &target in example.target.iter().chain(core::iter::once(&END)) {
            let cache = self.decoder.forward(&self.decoder_input(previous, &conditioning), &h);
            let (logits, winner) = self.output.forward(&cache.h);
            let (loss, dlogits) = softmax_cross_entropy(&logits, target as usize);
            total += loss;
            h.clone_from(&cache.h);
            steps.push((previous, cache, winner, dlogits));
            previous = target;
        }
        let stat = LossStat {
            total,
            count: steps.len(),
        };
        let Some(grads) = grads else {
            return stat;
        };

        let cond_dim = conditioning.len();
        let emb_dim = self.dims.embedding;
        let mut d_conditioning = vec![0.0; cond_dim];
        let mut dh = vec![0.0; hidden];
        let mut dx = vec![0.0; emb_dim + cond_dim];
        for (previous, cache, winner, dlogits) in steps.iter().rev() {
            self.output.backward(&cache.h, winner, dlogits, &mut grads.output, &mut dh);
            let mut dh_prev = vec![0.0; hidden];
            dx.iter_mut().for_each(|v| *v = 0.0);
            self.decoder.backward(cache, &dh, &mut grads.decoder, &mut dx, &mut dh_prev);
            grads
                .embedding
                .row_mut(*previous as usize)
                .iter_mut()
                .zip(&dx[..emb_dim])
                .for_each(|(g, d)| *g += d);
            d_conditioning.iter_mut().zip(&dx[emb_dim..]).for_each(|(g, d)| *g += d);
            dh = dh_prev;
        }

        let d_pre: Vec<f64> = dh.iter().zip(&h0).map(|(d, h)| d * (1.0 - h * h)).collect();
        self.init.backward(&conditioning, &d_pre, &mut grads.init, &mut d_conditioning);

        let (d_content, d_second) = d_conditioning.split_at(hidden);
        self.backprop_encoder(
            &self.content_encoder,
            &mut grads.content_encoder,
            &mut grads.embedding,
            &example.content,
            &content_caches,
            d_content,
        );
        match (&example.condition, &self.marker_encoder) {
            (Condition::Markers(ids), Some(gru)) => {
                let grad_gru = grads.marker_encoder.as_mut().expect("gradient buffer matches model");
                self.backprop_encoder(gru, grad_gru, &mut grads.embedding, ids, &marker_caches, d_second);
            }
            (Condition::Attribute(a), _) => {
                if let Some(table) = grads.attribute_embedding.as_mut() {
                    table.row_mut(*a).iter_mut().zip(d_second).for_each(|(g, d)| *g += d);
                }
            }
            _ => {}
        }
        stat
    }
}

impl Parameters for Seq2SeqParams {
    /// Order: embedding, content encoder, marker encoder or attribute
    /// embedding, init projection, decoder, maxout pieces.
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding];
        out.extend(self.content_encoder.tensors());
        if let Some(gru) = &self.marker_encoder {
            out.extend(gru.tensors());
        }
        if let Some(table) = &self.attribute_embedding {
            out.push(table);
        }
        out.extend(self.init.tensors());
        out.extend(self.decoder.tensors());
        out.extend(self.output.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding];
        out.extend(self.content_encoder.tensors_mut());
        if let Some(gru) = &mut self.marker_encoder {
            out.extend(gru.tensors_mut());
        }
        if let Some(table) = &mut self.attribute_embedding {
            out.push(table);
        }
        out.extend(self.init.tensors_mut());
        out.extend(self.decoder.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

impl Objective for Seq2SeqParams {
    type Example = Seq2SeqExample;

    fn loss(&self, example: &Seq2SeqExample) -> LossStat {
        self.forward_backward(example, None)
    }

    fn accumulate_gradient(&self, example: &Seq2SeqExample, grads: &mut Self) -> LossStat {
        self.forward_backward(example, Some(grads))
    }
}

/// Decoder bound to a fixed conditioning vector; the state is the hidden vector.
#[derive(Debug, Clone)]
pub struct DecoderSession<'a> {
    params: &'a Seq2SeqParams,
    conditioning: Vec<f64>,
}

impl StepModel for DecoderSession<'_> {
    type State = Vec<f64>;

    fn initial_state(&self) -> Vec<f64> {
        self.params.initial_decoder_state(&self.conditioning)
    }

    fn step(&self, state: &Vec<f64>, previous: u32) -> (Vec<f64>, Vec<f64>) {
        let x = self.params.decoder_input(previous, &self.conditioning);
        let h = self.params.decoder.forward(&x, state).h;
        let lp = self.params.next_log_probs(&h);
        (h, lp)
    }
}
