//! Automatic evaluation of transfer outputs.

pub mod classifier;
pub mod metrics;
pub mod sweep;

use alloc::vec::Vec;

use crate::corpus::{AttributeLabel, Sentence};
use crate::error::{Error, Result};
use crate::salience::MarkerLexicon;
use crate::systems::TransferRequest;

pub use classifier::{
    classifier_score, classifier_score_per_target, train_classifier, Classifier, ClassifierDims, ClassifierLog,
    ClassifierParams,
};
pub use metrics::{
    average_ranks, bleu, overlap_fraction, s_a, s_c, spearman, BleuStats, OverlapRate, ReferenceRecord, Stopwords,
    ENGLISH_STOPWORDS, ENGLISH_STOPWORDS_VERSION,
};
pub use sweep::{tradeoff_sweep, BleuBasis, SweepPoint, SweepSetup};

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecord {
    pub input: Sentence,
    pub output: Sentence,
    pub reference: Option<Sentence>,
    pub target: AttributeLabel,
    pub predicted: AttributeLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classifier_score: f64,
    /// Against references, when supplied.
    pub bleu: Option<f64>,
    pub bleu_vs_source: f64,
    pub s_c: Option<OverlapRate>,
    pub s_a: Option<OverlapRate>,
    pub examples: Vec<ExampleRecord>,
    pub sweep: Vec<SweepPoint>,
}

/// Scores aligned transfer outputs.
///
/// S_c and S_a need both references and the evaluation lexicon.
pub fn evaluate(
    requests: &[TransferRequest],
    outputs: &[Sentence],
    references: Option<&[Sentence]>,
    classifier: &Classifier,
    overlap: Option<(&MarkerLexicon, &Stopwords)>,
) -> Result<EvalReport> {
    if requests.len() != outputs.len() {
        return Err(Error::LengthMismatch {
            left: requests.len(),
            right: outputs.len(),
        });
    }
    if let Some(r) = references {
        if r.len() != outputs.len() {
            return Err(Error::LengthMismatch {
                left: outputs.len(),
                right: r.len(),
            });
        }
    }
    let targets: Vec<AttributeLabel> = requests.iter().map(|r| r.target.clone()).collect();
    let sources: Vec<Sentence> = requests.iter().map(|r| r.sentence.clone()).collect();
    let classifier_score = classifier_score_per_target(outputs, &targets, classifier)?;
    let bleu_vs_source = bleu(outputs, &sources)?;
    let bleu_ref = references.map(|r| bleu(outputs, r)).transpose()?;

    let (mut s_c_rate, mut s_a_rate) = (None, None);
    if let (Some(refs), Some((lexicon, stopwords))) = (references, overlap) {
        let records: Vec<ReferenceRecord> = requests
            .iter()
            .zip(refs)
            .map(|(q, r)| ReferenceRecord {
                source: q.sentence.clone(),
                source_attribute: q.source.clone(),
                reference: r.clone(),
            })
            .collect();
        s_c_rate = Some(s_c(&records, lexicon, stopwords)?);
        s_a_rate = Some(s_a(&records, lexicon, stopwords)?);
    }

    let examples = requests
        .iter()
        .zip(outputs)
        .enumerate()
        .map(|(i, (q, out))| ExampleRecord {
            input: q.sentence.clone(),
            output: out.clone(),
            reference: references.map(|r| r[i].clone()),
            target: q.target.clone(),
            predicted: classifier.predict_label(out).clone(),
        })
        .collect();

    Ok(EvalReport {
        classifier_score,
        bleu: bleu_ref,
        bleu_vs_source,
        s_c: s_c_rate,
        s_a: s_a_rate,
        examples,
        sweep: Vec::new(),
    })
}
