//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use drg_core::corpus::{AttributeLabel, LabeledCorpus, Sentence, Split};
use drg_core::neural::{log_softmax, Decoded, StepModel};
use drg_core::salience::NGram;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn label(s: &str) -> AttributeLabel {
    AttributeLabel::new(s).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A decoder whose next-token distribution is a pseudo-random function of
/// the whole prefix, so every path has its own distribution.
#[derive(Debug, Clone)]
pub struct ToyDecoder {
    pub seed: u64,
    pub vocab: usize,
    /// Tokens that always get `-inf`.
    pub masked: Vec<u32>,
    pub temperature: f64,
}

fn mix(mut h: u64, v: u64) -> u64 {
    h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    h.wrapping_mul(0xff51_afd7_ed55_8ccd)
}

impl StepModel for ToyDecoder {
    type State = Vec<u32>;

    fn initial_state(&self) -> Vec<u32> {
        Vec::new()
    }

    fn step(&self, state: &Vec<u32>, previous: u32) -> (Vec<u32>, Vec<f64>) {
        let mut prefix = state.clone();
        prefix.push(previous);
        let key = prefix.iter().fold(self.seed, |h, &t| mix(h, t as u64 + 1));
        let mut r = rng(key);
        let logits: Vec<f64> = (0..self.vocab).map(|_| r.gen_range(-3.0..3.0) * self.temperature).collect();
        let mut lp = log_softmax(&logits);
        for &m in &self.masked {
            lp[m as usize] = f64::NEG_INFINITY;
        }
        (prefix, lp)
    }
}

/// Best sequence ending in `end` within `max_len` generated tokens, found by
/// enumerating every path. Ties keep the first path in enumeration order.
pub fn exhaustive_best<M: StepModel>(model: &M, start: u32, end: u32, vocab: usize, max_len: usize) -> Option<Decoded> {
    let mut best: Option<Decoded> = None;
    let mut stack = vec![(Vec::<u32>::new(), 0.0f64, model.initial_state())];
    while let Some((tokens, lp, state)) = stack.pop() {
        if tokens.len() >= max_len {
            continue;
        }
        let previous = tokens.last().copied().unwrap_or(start);
        let (next, lps) = model.step(&state, previous);
        for t in 0..vocab as u32 {
            let l = lps[t as usize];
            if !l.is_finite() {
                continue;
            }
            if t == end {
                let score = lp + l;
                if best.as_ref().is_none_or(|b| score > b.log_prob) {
                    best = Some(Decoded {
                        tokens: tokens.clone(),
                        log_prob: score,
                        finished: true,
                    });
                }
            } else {
                let mut ext = tokens.clone();
                ext.push(t);
                stack.push((ext, lp + l, next.clone()));
            }
        }
    }
    best
}

/// Adadelta on one scalar, written out step by step.
pub fn adadelta_reference(grads: &[f64], x0: f64, rho: f64, eps: f64) -> Vec<f64> {
    let (mut eg, mut ex, mut x) = (0.0f64, 0.0f64, x0);
    let mut out = Vec::new();
    for &g in grads {
        eg = rho * eg + (1.0 - rho) * g * g;
        let rms_update = (ex + eps).sqrt();
        let rms_grad = (eg + eps).sqrt();
        let dx = -(rms_update / rms_grad) * g;
        ex = rho * ex + (1.0 - rho) * dx * dx;
        x += dx;
        out.push(x);
    }
    out
}

/// Synthetic two-attribute corpus with known marker n-grams.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub corpus: LabeledCorpus,
    /// Planted markers per attribute, in attribute order.
    pub planted: Vec<Vec<NGram>>,
    pub background: Vec<String>,
}

pub const PLANTED_PER_ATTRIBUTE: usize = 12;

/// Every sentence carries exactly one planted marker of its attribute at a
/// random position inside background words drawn uniformly from a shared
/// vocabulary. Half of the markers are unigrams over dedicated words; the
/// other half are bigrams over background words, so their parts are not salient.
pub fn planted_corpus(per_attribute: usize, seed: u64) -> PlantedCorpus {
    let mut r = rng(seed);
    let background: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
    let attrs = ["neg", "pos"];
    let mut planted: Vec<Vec<NGram>> = Vec::new();
    for (a, name) in attrs.iter().enumerate() {
        let mut markers = Vec::new();
        for i in 0..PLANTED_PER_ATTRIBUTE / 2 {
            markers.push(NGram::parse(&format!("{name}{i}")));
        }
        for i in 0..PLANTED_PER_ATTRIBUTE / 2 {
            // Disjoint background pairs per attribute.
            let x = 2 * (i + a * PLANTED_PER_ATTRIBUTE);
            markers.push(NGram::new([background[x].clone(), background[x + 1].clone()]));
        }
        planted.push(markers);
    }
    let all_bigrams: Vec<&NGram> = planted.iter().flatten().filter(|m| m.len() == 2).collect();
    let mut corpus = LabeledCorpus::new(Split::Train, attrs.iter().map(|a| label(a)).collect()).unwrap();
    for (a, markers) in planted.iter().enumerate() {
        for s in 0..per_attribute {
            let marker = &markers[s % markers.len()];
            let tokens = loop {
                let len = r.gen_range(5..=10);
                let words: Vec<String> = (0..len).map(|_| background.choose(&mut r).unwrap().clone()).collect();
                let has_bigram = words
                    .windows(2)
                    .any(|w| all_bigrams.iter().any(|b| b.tokens() == w));
                if has_bigram {
                    continue;
                }
                let at = r.gen_range(0..=words.len());
                let mut t = words[..at].to_vec();
                t.extend(marker.tokens().iter().cloned());
                t.extend(words[at..].iter().cloned());
                // Reject if the insertion itself created a foreign planted bigram.
                let foreign = t.windows(2).any(|w| {
                    all_bigrams.iter().any(|b| b.tokens() == w && *b != marker)
                });
                if !foreign {
                    break t;
                }
            };
            corpus.push(a, Sentence::from_tokens(tokens));
        }
    }
    PlantedCorpus {
        corpus,
        planted,
        background,
    }
}

/// Whether `tokens` contains `ngram` as a contiguous run.
pub fn contains_ngram(tokens: &[String], ngram: &NGram) -> bool {
    tokens.windows(ngram.len()).any(|w| w == ngram.tokens())
}

/// A small corpus the generators can memorize: two attributes, 25 sentences each.
pub fn overfit_corpus() -> LabeledCorpus {
    let subjects = ["the food", "our waiter", "the room", "this place", "the price"];
    let neg = ["was awful", "was rude", "felt dirty", "is terrible", "seemed bland"];
    let pos = ["was great", "was friendly", "felt clean", "is amazing", "seemed tasty"];
    let tails = ["today", "again", "tonight", "overall", "honestly"];
    let mut corpus = LabeledCorpus::new(Split::Train, vec![label("neg"), label("pos")]).unwrap();
    for (a, verbs) in [neg, pos].iter().enumerate() {
        for i in 0..25 {
            let s = format!("{} {} {}", subjects[i % 5], verbs[(i / 5 + i) % 5], tails[i / 5]);
            corpus.push(a, Sentence::from(s.as_str()));
        }
    }
    corpus
}

/// `(outputs, references, value)`; values come from a separate Python
/// implementation using exact fractions for the precisions.
pub const BLEU_CASES: &[(&[&str], &[&str], f64)] = &[
    (&["the the cat"], &["the cat sat"], 63.89431042462724),
    (&["the cat sat on the mat"], &["the cat sat on the mat"], 100.0),
    (&["the cat sat on the mat"], &["a cat sat on a mat"], 35.93041119630843),
    (&["a"], &["a b c d e"], 1.8315638888734178),
    (&["a b c d e f"], &["a b c"], 33.437015248821105),
    (
        &["the quick brown fox jumps over the lazy dog"],
        &["the quick brown dog jumps over the lazy fox"],
        45.96613576124592,
    ),
    (&["food was great", "service was slow"], &["food was good", "the service was slow"], 63.289270782060825),
    (&["i love this place ."], &["i do n't like this place ."], 30.77772945160715),
    (&["the staff was friendly and helpful"], &["the staff was rude and unhelpful"], 35.93041119630843),
    (&["x y z"], &["x y z w"], 71.65313105737893),
    (&["it it it it"], &["it is it"], 37.99178428257963),
    (&["great great great"], &["great food"], 48.549177170732335),
    (
        &["we sat down and got quick service ."],
        &["we sit down and we got some really slow and lazy service ."],
        14.305463413380368,
    ),
    (&["one two three four five", "six seven"], &["one two three four", "six seven eight"], 69.1441569283882),
    (&["a b a b a b"], &["a b a b"], 50.813274815461476),
    (
        &["the food is bland", "the room is dirty", "my waiter was rude"],
        &["the food is tasty", "the room is clean", "my waiter was kind"],
        49.99999999999999,
    ),
    (&["c d"], &["a b c d"], 36.787944117144235),
    (&["a b c d", "e"], &["a b c d", "f"], 94.57416090031758),
    (
        &["this is the best game i have played"],
        &["this is the worst game i have come across in a long time"],
        21.025853118419704,
    ),
    (&["p q r s t u v"], &["p q r s t u v w x y"], 65.14390575310556),
];

/// Straight-line BLEU over string-keyed counts.
pub fn bleu_oracle(outputs: &[&str], references: &[&str]) -> f64 {
    let mut matched = [0u64; 4];
    let mut total = [0u64; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in outputs.iter().zip(references) {
        let h: Vec<&str> = h.split(' ').collect();
        let rf: Vec<&str> = rf.split(' ').collect();
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            let count = |toks: &[&str]| {
                let mut m: HashMap<String, u64> = HashMap::new();
                for i in 0..(toks.len() + 1).saturating_sub(n) {
                    *m.entry(toks[i..i + n].join("\u{1}")).or_default() += 1;
                }
                m
            };
            let (hc, rc) = (count(&h), count(&rf));
            total[n - 1] += hc.values().sum::<u64>();
            matched[n - 1] += hc.iter().map(|(g, v)| (*v).min(*rc.get(g).unwrap_or(&0))).sum::<u64>();
        }
    }
    if matched[0] == 0 {
        return 0.0;
    }
    let mut log_p = 0.0;
    for n in 0..4 {
        let p = if matched[n] == 0 {
            1.0 / (total[n] + 1) as f64
        } else {
            matched[n] as f64 / total[n] as f64
        };
        log_p += p.ln() / 4.0;
    }
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * log_p.exp()
}
