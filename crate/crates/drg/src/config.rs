//! Run configuration, read from a TOML file and overridden by flags.
//!
//! ```toml
//! seed = 7
//! attributes = ["negative", "positive"]
//!
//! [data.train]
//! negative = "data/sentiment.train.0"
//! positive = "data/sentiment.train.1"
//!
//! [salience]
//! gamma = 15.0
//!
//! [system]
//! kind = "delete-and-retrieve"
//! ```
//!
//! Every key has a default; relative paths are taken from the directory of
//! the configuration file. `patience = 0` and `clip_norm = 0.0` switch those
//! features off.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use drg_core::corpus::{AttributeLabel, Split};
use drg_core::neural::{AdadeltaConfig, NeuralConfig, TrainConfig};
use drg_core::retrieval::Metric;
use drg_core::salience::SalienceConfig;
use drg_core::systems::SystemKind;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Single-threaded transfer and evaluation.
    pub deterministic: bool,
    pub attributes: Vec<String>,
    /// Attributes whose sentences are never split (all content).
    pub no_delete: Vec<String>,
    pub data: DataPaths,
    pub salience: SalienceSection,
    pub generator: NeuralSection,
    pub language_model: NeuralSection,
    pub classifier: NeuralSection,
    pub system: SystemSection,
    pub artifacts: Artifacts,
}

/// Attribute name to file, per split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub train: BTreeMap<String, PathBuf>,
    pub dev: BTreeMap<String, PathBuf>,
    pub test: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SalienceSection {
    pub lambda: f64,
    pub gamma: f64,
    pub n_max: usize,
    pub min_count: u64,
}

impl Default for SalienceSection {
    fn default() -> Self {
        let d = SalienceConfig::default();
        SalienceSection {
            lambda: d.lambda,
            gamma: d.gamma,
            n_max: d.n_max,
            min_count: d.min_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralSection {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub maxout_pieces: usize,
    pub init_scale: f64,
    pub vocab_min_count: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub rho: f64,
    pub eps: f64,
    /// Marker replacement probability while training delete-and-retrieve.
    pub noise: f64,
}

impl Default for NeuralSection {
    fn default() -> Self {
        let d = NeuralConfig::default();
        NeuralSection {
            embedding_dim: d.embedding_dim,
            hidden_dim: d.hidden_dim,
            maxout_pieces: d.maxout_pieces,
            init_scale: d.init_scale,
            vocab_min_count: d.vocab_min_count,
            max_epochs: d.train.max_epochs,
            batch_size: d.train.batch_size,
            patience: d.train.patience.unwrap_or(0),
            clip_norm: d.train.clip_norm.unwrap_or(0.0),
            rho: d.train.optimizer.rho,
            eps: d.train.optimizer.eps,
            noise: 0.1,
        }
    }
}

impl NeuralSection {
    pub fn neural_config(&self, beam: usize) -> NeuralConfig {
        NeuralConfig {
            embedding_dim: self.embedding_dim,
            hidden_dim: self.hidden_dim,
            maxout_pieces: self.maxout_pieces,
            init_scale: self.init_scale,
            vocab_min_count: self.vocab_min_count,
            beam,
            train: TrainConfig {
                max_epochs: self.max_epochs,
                batch_size: self.batch_size,
                patience: (self.patience > 0).then_some(self.patience),
                clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
                optimizer: AdadeltaConfig {
                    rho: self.rho,
                    eps: self.eps,
                    ..AdadeltaConfig::default()
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub kind: String,
    pub beam: usize,
    pub k: usize,
    pub metric: String,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            kind: SystemKind::DeleteAndRetrieve.as_str().into(),
            beam: 10,
            k: 10,
            metric: Metric::TfIdf.as_str().into(),
        }
    }
}

/// Output locations. `{attribute}` in `language_model` is replaced by the attribute name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Artifacts {
    pub lexicon: PathBuf,
    pub generator: PathBuf,
    pub language_model: PathBuf,
    pub classifier: PathBuf,
    /// Report files share this prefix: `.txt`, `.kv` and `.examples.tsv`.
    pub report: PathBuf,
}

impl Default for Artifacts {
    fn default() -> Self {
        Artifacts {
            lexicon: "markers.tsv".into(),
            generator: "generator.bin".into(),
            language_model: "lm.{attribute}.bin".into(),
            classifier: "classifier.bin".into(),
            report: "report".into(),
        }
    }
}

/// Flag values that replace configuration keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub system: Option<String>,
    pub beam: Option<usize>,
    pub k: Option<usize>,
    pub deterministic: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads `path` and anchors relative paths at its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::parse(&text).map_err(|e| Error::format(path, e))?;
        if let Some(dir) = path.parent() {
            config.anchor(dir);
        }
        Ok(config)
    }

    fn anchor(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for split in [&mut self.data.train, &mut self.data.dev, &mut self.data.test] {
            split.values_mut().for_each(fix);
        }
        let a = &mut self.artifacts;
        for p in [&mut a.lexicon, &mut a.generator, &mut a.language_model, &mut a.classifier, &mut a.report] {
            fix(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(gamma) = o.gamma {
            self.salience.gamma = gamma;
        }
        if let Some(system) = &o.system {
            self.system.kind = system.clone();
        }
        if let Some(beam) = o.beam {
            self.system.beam = beam;
        }
        if let Some(k) = o.k {
            self.system.k = k;
        }
        self.deterministic |= o.deterministic;
    }

    /// The configuration as TOML, echoed into every artifact.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn attribute_labels(&self) -> Result<Vec<AttributeLabel>> {
        if self.attributes.len() < 2 {
            return Err(Error::Usage("the configuration must list at least two attributes".into()));
        }
        let labels = self
            .attributes
            .iter()
            .map(|a| AttributeLabel::new(a.as_str()))
            .collect::<drg_core::Result<Vec<_>>>()?;
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::Usage(format!("attribute `{a}` is listed twice")));
            }
        }
        Ok(labels)
    }

    pub fn label(&self, name: &str) -> Result<AttributeLabel> {
        self.attribute_labels()?
            .into_iter()
            .find(|a| a.as_str() == name)
            .ok_or_else(|| Error::Usage(format!("attribute `{name}` is not in the configuration")))
    }

    pub fn no_delete_labels(&self) -> Result<Vec<AttributeLabel>> {
        self.no_delete.iter().map(|a| self.label(a)).collect()
    }

    /// Files of `split` in attribute order; an attribute without a file is an error.
    pub fn corpus_files(&self, split: Split) -> Result<Vec<(AttributeLabel, PathBuf)>> {
        let table = match split {
            Split::Train => &self.data.train,
            Split::Dev => &self.data.dev,
            Split::Test => &self.data.test,
        };
        if let Some(unknown) = table.keys().find(|k| !self.attributes.contains(k)) {
            return Err(Error::Usage(format!("data.{split} names unknown attribute `{unknown}`", split = split.as_str())));
        }
        self.attribute_labels()?
            .into_iter()
            .map(|a| {
                let path = table.get(a.as_str()).cloned().ok_or_else(|| {
                    Error::Usage(format!("no {} file configured for attribute `{a}`", split.as_str()))
                })?;
                Ok((a, path))
            })
            .collect()
    }

    pub fn has_split(&self, split: Split) -> bool {
        match split {
            Split::Train => !self.data.train.is_empty(),
            Split::Dev => !self.data.dev.is_empty(),
            Split::Test => !self.data.test.is_empty(),
        }
    }

    pub fn salience_config(&self) -> SalienceConfig {
        SalienceConfig {
            lambda: self.salience.lambda,
            gamma: self.salience.gamma,
            n_max: self.salience.n_max,
            min_count: self.salience.min_count,
        }
    }

    pub fn system_kind(&self) -> Result<SystemKind> {
        self.system.kind.parse().map_err(|_| {
            let names: Vec<&str> = SystemKind::ALL.iter().map(|k| k.as_str()).collect();
            Error::Usage(format!("unknown system `{}`; expected one of {}", self.system.kind, names.join(", ")))
        })
    }

    pub fn metric(&self) -> Result<Metric> {
        self.system
            .metric
            .parse()
            .map_err(|_| Error::Usage(format!("unknown retrieval metric `{}`", self.system.metric)))
    }

    pub fn language_model_path(&self, attribute: &AttributeLabel) -> PathBuf {
        let template = self.artifacts.language_model.to_string_lossy();
        PathBuf::from(template.replace("{attribute}", attribute.as_str()))
    }
}
