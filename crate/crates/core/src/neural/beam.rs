//! Beam search and greedy decoding over any left-to-right step model.

use alloc::vec::Vec;
use core::cmp::Ordering;

/// A decoder that, given its state and the previous token, yields the next
/// state and log-probabilities over the whole vocabulary. Tokens that must
/// never be produced carry `-inf`.
pub trait StepModel {
    type State: Clone;

    fn initial_state(&self) -> Self::State;

    fn step(&self, state: &Self::State, previous: u32) -> (Self::State, Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub beam: usize,
    /// Maximum number of generated tokens, the end symbol included.
    pub max_len: usize,
    /// Rank finished hypotheses by log-probability per token instead of the sum.
    pub length_normalize: bool,
}

impl BeamConfig {
    pub fn new(beam: usize, max_len: usize) -> Self {
        BeamConfig {
            beam,
            max_len,
            length_normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis<S> {
    /// Generated ids, without the start symbol; ends with the end symbol when finished.
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    pub state: S,
    pub finished: bool,
}

/// Outcome of decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Generated ids without start or end symbols.
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    /// False when no hypothesis produced the end symbol within `max_len`.
    pub finished: bool,
}

fn score<S>(h: &BeamHypothesis<S>, normalize: bool) -> f64 {
    if normalize && !h.tokens.is_empty() {
        h.log_prob / h.tokens.len() as f64
    } else {
        h.log_prob
    }
}

fn into_decoded<S>(h: BeamHypothesis<S>, end: u32) -> Decoded {
    let mut tokens = h.tokens;
    if h.finished && tokens.last() == Some(&end) {
        tokens.pop();
    }
    Decoded {
        tokens,
        log_prob: h.log_prob,
        finished: h.finished,
    }
}

/// Keeps the `beam` best partial sequences per step. A hypothesis that emits
/// `end` leaves the beam and is finished; decoding stops when the beam is
/// empty, `max_len` is reached, or (without length normalization) the best
/// finished score can no longer be beaten. Candidate ties are broken by
/// parent rank and then by token id.
pub fn beam_search<M: StepModel>(model: &M, start: u32, end: u32, config: BeamConfig) -> Decoded {
    let beam = config.beam.max(1);
    let mut live = alloc::vec![BeamHypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.initial_state(),
        finished: false,
    }];
    let mut finished: Vec<BeamHypothesis<M::State>> = Vec::new();

    for _ in 0..config.max_len {
        let mut candidates: Vec<(f64, usize, u32)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (parent, hyp) in live.iter().enumerate() {
            let previous = hyp.tokens.last().copied().unwrap_or(start);
            let (state, log_probs) = model.step(&hyp.state, previous);
            next_states.push(state);
            for (token, &lp) in log_probs.iter().enumerate() {
                if lp.is_finite() {
                    candidates.push((hyp.log_prob + lp, parent, token as u32));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        candidates.truncate(beam);

        let mut next_live = Vec::with_capacity(beam);
        for (log_prob, parent, token) in candidates {
            let mut tokens = live[parent].tokens.clone();
            tokens.push(token);
            let hyp = BeamHypothesis {
                tokens,
                log_prob,
                state: next_states[parent].clone(),
                finished: token == end,
            };
            if hyp.finished {
                finished.push(hyp);
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
        if live.is_empty() {
            break;
        }
        if !config.length_normalize {
            let best_done = finished.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            // Scores only decrease as sequences grow.
            if best_done >= live[0].log_prob {
                break;
            }
        }
    }

    let pick = |pool: Vec<BeamHypothesis<M::State>>| {
        pool.into_iter().reduce(|best, h| {
            match score(&h, config.length_normalize).total_cmp(&score(&best, config.length_normalize)) {
                Ordering::Greater => h,
                _ => best,
            }
        })
    };
    match pick(finished) {
        Some(h) => into_decoded(h, end),
        None => pick(live).map_or(
            Decoded {
                tokens: Vec::new(),
                log_prob: f64::NEG_INFINITY,
                finished: false,
            },
            |h| into_decoded(h, end),
        ),
    }
}

/// Picks the most probable token at every step (lowest id on ties).
pub fn greedy_decode<M: StepModel>(model: &M, start: u32, end: u32, max_len: usize) -> Decoded {
    let mut state = model.initial_state();
    let mut previous = start;
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    for _ in 0..max_len {
        let (next, log_probs) = model.step(&state, previous);
        let (token, lp) = log_probs
            .iter()
            .enumerate()
            .filter(|(_, lp)| lp.is_finite())
            .fold((usize::MAX, f64::NEG_INFINITY), |best, (i, &lp)| {
                if lp > best.1 {
                    (i, lp)
                } else {
                    best
                }
            });
        if token == usize::MAX {
            break;
        }
        log_prob += lp;
        if token as u32 == end {
            return Decoded {
                tokens,
                log_prob,
                finished: true,
            };
        }
        tokens.push(token as u32);
        state = next;
        previous = token as u32;
    }
    Decoded {
        tokens,
        log_prob,
        finished: false,
    }
}
