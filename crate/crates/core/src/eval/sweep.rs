use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::corpus::{AttributeLabel, LabeledCorpus, Sentence};
use crate::error::{Error, Result};
use crate::neural::SentenceScorer;
use crate::retrieval::{ContentIndex, Metric};
use crate::salience::{count_ngrams, MarkerLexicon, SalienceConfig};
use crate::systems::{build_index, Seq2SeqModel, SystemKind, TransferRequest, TransferSystem};

use super::classifier::{classifier_score_per_target, Classifier};
use super::metrics::bleu;

/// What BLEU was measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BleuBasis {
    References,
    Sources,
}

impl BleuBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            BleuBasis::References => "reference",
            BleuBasis::Sources => "source",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gamma: f64,
    pub classifier_score: f64,
    pub bleu: f64,
    pub bleu_basis: BleuBasis,
    /// Total markers in the lexicon derived at this threshold.
    pub lexicon_size: usize,
}

/// A fixed set of trained components to re-run at several thresholds.
pub struct SweepSetup<'a> {
    /// Corpus the lexicon statistics and retrieval indexes come from.
    pub train: &'a LabeledCorpus,
    /// Salience settings; `gamma` is replaced at every point.
    pub salience: SalienceConfig,
    pub kind: SystemKind,
    pub metric: Metric,
    pub no_delete: &'a [AttributeLabel],
    pub model: Option<&'a Seq2SeqModel>,
    /// Language model per target attribute, needed by delete-and-retrieve.
    pub lms: &'a [(AttributeLabel, &'a (dyn SentenceScorer + Sync))],
    pub classifier: &'a Classifier,
    pub k: usize,
    pub beam: usize,
}

impl core::fmt::Debug for SweepSetup<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SweepSetup")
            .field("salience", &self.salience)
            .field("kind", &self.kind)
            .field("metric", &self.metric)
            .field("k", &self.k)
            .field("beam", &self.beam)
            .finish_non_exhaustive()
    }
}

/// Transfers every request with the lexicon derived at each threshold and
/// scores the outputs. Points are returned in ascending `gamma` order.
///
/// BLEU is measured against `references` when given, otherwise against the sources.
pub fn tradeoff_sweep(
    setup: &SweepSetup<'_>,
    requests: &[TransferRequest],
    references: Option<&[Sentence]>,
    gammas: &[f64],
) -> Result<Vec<SweepPoint>> {
    if requests.is_empty() {
        return Err(Error::EmptyInput("transfer requests"));
    }
    if let Some(r) = references {
        if r.len() != requests.len() {
            return Err(Error::LengthMismatch {
                left: requests.len(),
                right: r.len(),
            });
        }
    }
    if gammas.iter().any(|g| g.is_nan()) {
        return Err(Error::InvalidConfig("gamma must not be NaN".into()));
    }
    let mut gammas = gammas.to_vec();
    gammas.sort_by(f64::total_cmp);

    setup.salience.validate()?;
    let counts = count_ngrams(setup.train, setup.salience.n_max);
    let sources: Vec<Sentence> = requests.iter().map(|r| r.sentence.clone()).collect();
    let targets: Vec<AttributeLabel> = requests.iter().map(|r| r.target.clone()).collect();
    let (basis, against) = match references {
        Some(r) => (BleuBasis::References, r),
        None => (BleuBasis::Sources, sources.as_slice()),
    };

    let mut points = Vec::with_capacity(gammas.len());
    for gamma in gammas {
        let config = SalienceConfig {
            gamma,
            ..setup.salience.clone()
        };
        let lexicon = MarkerLexicon::from_counts(&counts, &config)?;
        let outputs = run_requests(setup, &lexicon, requests)?;
        points.push(SweepPoint {
            gamma,
            classifier_score: classifier_score_per_target(&outputs, &targets, setup.classifier)?,
            bleu: bleu(&outputs, against)?,
            bleu_basis: basis,
            lexicon_size: lexicon.len(),
        });
    }
    Ok(points)
}

fn run_requests(setup: &SweepSetup<'_>, lexicon: &MarkerLexicon, requests: &[TransferRequest]) -> Result<Vec<Sentence>> {
    let mut indexes: BTreeMap<&AttributeLabel, Box<dyn ContentIndex + Sync + '_>> = BTreeMap::new();
    if setup.kind.needs_index() {
        for r in requests {
            if !indexes.contains_key(&r.target) {
                let index = build_index(setup.train, &r.target, lexicon, setup.no_delete, setup.metric, setup.model)?;
                indexes.insert(&r.target, index);
            }
        }
    }
    requests
        .iter()
        .map(|r| {
            let lm = setup.lms.iter().find(|(a, _)| a == &r.target).map(|(_, lm)| *lm);
            let system = TransferSystem {
                kind: setup.kind,
                lexicon,
                no_delete: setup.no_delete,
                index: indexes.get(&r.target).map(|b| &**b as &(dyn ContentIndex + Sync)),
                model: setup.model,
                lm,
                k: setup.k,
                beam: setup.beam,
            };
            Ok(system.transfer(r)?.output)
        })
        .collect()
}
