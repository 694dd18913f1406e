//! The `drg` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use drg_core::corpus::{AttributeLabel, LabeledCorpus, Sentence, Split};
use drg_core::eval::{evaluate, train_classifier, tradeoff_sweep, Stopwords, SweepSetup};
use drg_core::neural::{seeded, train_lm, EpochRecord, LanguageModel, SentenceScorer};
use drg_core::retrieval::ContentIndex;
use drg_core::salience::{extract_markers, MarkerLexicon};
use drg_core::systems::{
    build_index, build_training_set, train, SystemKind, TransferOutcome, TransferRequest,
    TransferSystem,
};

use crate::config::{Overrides, RunConfig};
use crate::container::{
    load_classifier, load_generator, load_index, load_language_model, save_classifier, save_generator, save_index,
    save_language_model,
};
use crate::error::{Error, Result};
use crate::report::{sweep_key_values, sweep_table, with_suffix, write_reports};
use crate::text::{
    intermediate_record, load_corpus, load_lexicon, read_aligned, save_lexicon, write_file, write_sentences,
};

#[derive(Debug, Parser)]
#[command(name = "drg", version, about = "Rewrite sentences to a target attribute by deleting, retrieving and generating")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every command.
#[derive(Debug, Args)]
pub struct Shared {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Marker salience threshold.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,

    /// retrieve-only, template, delete-only or delete-and-retrieve.
    #[arg(long, global = true)]
    pub system: Option<String>,

    #[arg(long, global = true)]
    pub beam: Option<usize>,

    /// Retrieved neighbours reranked by delete-and-retrieve.
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Transfer and evaluate on a single thread.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract attribute markers from the training corpus.
    ExtractMarkers {
        /// Lexicon file (defaults to artifacts.lexicon).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Markers printed per attribute.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Train the generator of a neural system.
    Train {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one language model per attribute.
    TrainLm {
        /// Train only this attribute's model.
        #[arg(long)]
        attribute: Option<String>,
        /// Output file, with --attribute only.
        #[arg(long, requires = "attribute")]
        out: Option<PathBuf>,
    },
    /// Train the attribute classifier used for evaluation.
    TrainClassifier {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite every line of a file.
    Transfer {
        #[command(flatten)]
        direction: Direction,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Write the split, retrieval and output of every line here.
        #[arg(long)]
        dump_intermediate: Option<PathBuf>,
        /// Load the retrieval index instead of building it.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Save the retrieval index used.
        #[arg(long)]
        save_index: Option<PathBuf>,
    },
    /// Score transfer outputs.
    Eval {
        #[command(flatten)]
        direction: Direction,
        /// Source sentences, one per line.
        #[arg(long)]
        input: PathBuf,
        /// Outputs aligned with the input.
        #[arg(long)]
        outputs: PathBuf,
        /// Human references aligned with the input.
        #[arg(long)]
        references: Option<PathBuf>,
        /// Report path prefix (defaults to artifacts.report).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-run transfer at several thresholds and score each run.
    Sweep {
        #[command(flatten)]
        direction: Direction,
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        #[arg(long)]
        references: Option<PathBuf>,
        /// Report path prefix (defaults to artifacts.report).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Direction {
    /// Source attribute.
    #[arg(long = "from")]
    pub source: String,
    /// Target attribute; may be left out with two attributes.
    #[arg(long = "to")]
    pub target: Option<String>,
}

impl Direction {
    fn resolve(&self, config: &RunConfig) -> Result<(AttributeLabel, AttributeLabel)> {
        let source = config.label(&self.source)?;
        let target = match &self.target {
            Some(t) => config.label(t)?,
            None => {
                let others: Vec<AttributeLabel> =
                    config.attribute_labels()?.into_iter().filter(|a| a != &source).collect();
                match <[AttributeLabel; 1]>::try_from(others) {
                    Ok([t]) => t,
                    Err(_) => return Err(Error::Usage("--to is required with more than two attributes".into())),
                }
            }
        };
        if source == target {
            return Err(Error::Usage("--from and --to name the same attribute".into()));
        }
        Ok((source, target))
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("drg: {}", line.trim_start_matches("error: "));
            return 1;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("drg: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn load_config(shared: &Shared) -> Result<RunConfig> {
    let mut config = match &shared.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(&Overrides {
        seed: shared.seed,
        gamma: shared.gamma,
        system: shared.system.clone(),
        beam: shared.beam,
        k: shared.k,
        deterministic: shared.deterministic,
    });
    Ok(config)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = load_config(&cli.shared)?;
    let threads = if config.deterministic { 1 } else { 0 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::ExtractMarkers { out, top } => cmd_extract_markers(&config, out.as_deref(), *top),
        Command::Train { out } => cmd_train(&config, out.as_deref()),
        Command::TrainLm { attribute, out } => cmd_train_lm(&config, attribute.as_deref(), out.as_deref()),
        Command::TrainClassifier { out } => cmd_train_classifier(&config, out.as_deref()),
        Command::Transfer {
            direction,
            input,
            output,
            dump_intermediate,
            index,
            save_index,
        } => cmd_transfer(
            &config,
            direction,
            input,
            output,
            dump_intermediate.as_deref(),
            index.as_deref(),
            save_index.as_deref(),
        ),
        Command::Eval {
            direction,
            input,
            outputs,
            references,
            report,
        } => cmd_eval(&config, direction, input, outputs, references.as_deref(), report.as_deref()),
        Command::Sweep {
            direction,
            input,
            gammas,
            references,
            report,
        } => cmd_sweep(&config, direction, input, gammas, references.as_deref(), report.as_deref()),
    })
}

fn corpus(config: &RunConfig, split: Split) -> Result<LabeledCorpus> {
    let corpus = load_corpus(split, &config.corpus_files(split)?)?;
    let sizes: Vec<String> = corpus
        .attributes()
        .iter()
        .zip(corpus.sizes())
        .map(|(a, n)| format!("{a}={n}"))
        .collect();
    eprintln!("loaded {} corpus: {}", split.as_str(), sizes.join(" "));
    Ok(corpus)
}

fn dev_corpus(config: &RunConfig) -> Result<Option<LabeledCorpus>> {
    if config.has_split(Split::Dev) {
        corpus(config, Split::Dev).map(Some)
    } else {
        Ok(None)
    }
}

/// The configured lexicon file, or a fresh extraction when it does not exist yet.
fn lexicon(config: &RunConfig, train: &LabeledCorpus) -> Result<MarkerLexicon> {
    let path = &config.artifacts.lexicon;
    if path.exists() {
        load_lexicon(path, train.attributes())
    } else {
        eprintln!("no lexicon at {}, extracting markers", path.display());
        Ok(extract_markers(train, &config.salience_config())?)
    }
}

fn progress(name: &str) -> impl FnMut(&EpochRecord) + '_ {
    move |r: &EpochRecord| match r.dev_loss {
        Some(d) => eprintln!("{name} epoch {} train_loss {:.6} dev_loss {:.6}", r.epoch, r.train_loss, d),
        None => eprintln!("{name} epoch {} train_loss {:.6}", r.epoch, r.train_loss),
    }
}

pub fn cmd_extract_markers(config: &RunConfig, out: Option<&Path>, top: usize) -> Result<()> {
    let train = corpus(config, Split::Train)?;
    let lexicon = extract_markers(&train, &config.salience_config())?;
    let path = out.unwrap_or(&config.artifacts.lexicon);
    save_lexicon(path, &lexicon, Some(&config.to_toml()))?;
    for (a, label) in lexicon.attributes().iter().enumerate() {
        println!("{label}: {} markers", lexicon.attribute_len(a));
        for (ngram, s) in lexicon.ranked(a).into_iter().take(top) {
            println!("  {s:>10.3}  {ngram}");
        }
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn neural_kind(config: &RunConfig) -> Result<SystemKind> {
    let kind = config.system_kind()?;
    if !kind.is_neural() {
        return Err(Error::Usage(format!("{kind} has no generator to train")));
    }
    Ok(kind)
}

pub fn cmd_train(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let kind = neural_kind(config)?;
    let train_corpus = corpus(config, Split::Train)?;
    let lexicon = lexicon(config, &train_corpus)?;
    let no_delete = config.no_delete_labels()?;
    let noise = if kind == SystemKind::DeleteAndRetrieve { config.generator.noise } else { 0.0 };
    let mut rng = seeded(config.seed);
    let examples = build_training_set(kind, &train_corpus, &lexicon, &no_delete, noise, &mut rng)?;
    let dev = match dev_corpus(config)? {
        Some(d) => build_training_set(kind, &d, &lexicon, &no_delete, 0.0, &mut rng)?,
        None => Vec::new(),
    };
    let neural = config.generator.neural_config(config.system.beam);
    let (model, log) = train(
        kind,
        train_corpus.attributes(),
        &examples,
        &dev,
        &neural,
        config.seed,
        progress("generator"),
    )?;
    let path = out.unwrap_or(&config.artifacts.generator);
    save_generator(path, &model, &config.to_toml())?;
    eprintln!(
        "wrote {} ({} epochs, best {})",
        path.display(),
        log.epochs.len(),
        log.best_epoch
    );
    Ok(())
}

pub fn cmd_train_lm(config: &RunConfig, attribute: Option<&str>, out: Option<&Path>) -> Result<()> {
    let train_corpus = corpus(config, Split::Train)?;
    let dev = dev_corpus(config)?;
    let labels = match attribute {
        Some(a) => vec![config.label(a)?],
        None => config.attribute_labels()?,
    };
    let neural = config.language_model.neural_config(config.system.beam);
    for label in labels {
        let idx = train_corpus.attribute_index(&label)?;
        let dev_sentences = match &dev {
            Some(d) => d.sentences(d.attribute_index(&label)?).to_vec(),
            None => Vec::new(),
        };
        let name = format!("lm[{label}]");
        let (lm, _) = train_lm(
            train_corpus.sentences(idx),
            &dev_sentences,
            &neural,
            config.seed,
            progress(&name),
        )?;
        let path = out.map(Path::to_path_buf).unwrap_or_else(|| config.language_model_path(&label));
        save_language_model(&path, &lm, &label, &config.to_toml())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_train_classifier(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let train_corpus = corpus(config, Split::Train)?;
    let dev = dev_corpus(config)?;
    let neural = config.classifier.neural_config(config.system.beam);
    let (classifier, log) = train_classifier(&train_corpus, dev.as_ref(), &neural, config.seed, progress("classifier"))?;
    if let Some(acc) = log.dev_accuracy {
        println!("dev accuracy {acc:.4}");
    }
    let path = out.unwrap_or(&config.artifacts.classifier);
    save_classifier(path, &classifier, &config.to_toml())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn load_target_lm(config: &RunConfig, target: &AttributeLabel) -> Result<LanguageModel> {
    let path = config.language_model_path(target);
    let (lm, attribute) = load_language_model(&path)?;
    if &attribute != target {
        return Err(Error::format(
            path,
            format!("language model was trained on `{attribute}`, not `{target}`"),
        ));
    }
    Ok(lm)
}

/// Reads aligned sentences and turns them into requests.
fn requests(path: &Path, source: &AttributeLabel, target: &AttributeLabel) -> Result<Vec<TransferRequest>> {
    read_aligned(path)?
        .into_iter()
        .map(|s| Ok(TransferRequest::new(s, source.clone(), target.clone())?))
        .collect()
}

pub fn cmd_transfer(
    config: &RunConfig,
    direction: &Direction,
    input: &Path,
    output: &Path,
    dump: Option<&Path>,
    index_path: Option<&Path>,
    save_index_path: Option<&Path>,
) -> Result<()> {
    let kind = config.system_kind()?;
    let (source, target) = direction.resolve(config)?;
    let requests = requests(input, &source, &target)?;
    let no_delete = config.no_delete_labels()?;
    let model = if kind.is_neural() || config.metric()? == drg_core::retrieval::Metric::Embedding {
        Some(load_generator(&config.artifacts.generator)?)
    } else {
        None
    };
    let lm = if kind == SystemKind::DeleteAndRetrieve {
        Some(load_target_lm(config, &target)?)
    } else {
        None
    };
    let train_corpus = corpus(config, Split::Train)?;
    let lexicon = lexicon(config, &train_corpus)?;
    let index: Option<Box<dyn ContentIndex + Sync + '_>> = match (kind.needs_index(), index_path) {
        (false, _) => None,
        (true, Some(path)) => Some(load_index(path, model.as_ref())?),
        (true, None) => Some(build_index(
            &train_corpus,
            &target,
            &lexicon,
            &no_delete,
            config.metric()?,
            model.as_ref(),
        )?),
    };
    if let (Some(path), Some(index)) = (save_index_path, &index) {
        save_index(path, index.as_ref(), model.as_ref(), &config.to_toml())?;
    }
    let system = TransferSystem {
        kind,
        lexicon: &lexicon,
        no_delete: &no_delete,
        index: index.as_deref().map(|i| i as &(dyn ContentIndex + Sync)),
        model: model.as_ref(),
        lm: lm.as_ref().map(|l| l as &(dyn SentenceScorer + Sync)),
        k: config.system.k,
        beam: config.system.beam,
    };
    let outcomes: Vec<TransferOutcome> = requests
        .par_iter()
        .map(|r| system.transfer(r))
        .collect::<drg_core::Result<_>>()?;
    let outputs: Vec<Sentence> = outcomes.iter().map(|o| o.output.clone()).collect();
    write_sentences(output, &outputs)?;
    if let Some(path) = dump {
        write_file(path, |w| {
            for o in &outcomes {
                writeln!(w, "{}", intermediate_record(o))?;
            }
            Ok(())
        })?;
    }
    eprintln!("wrote {} lines to {}", outputs.len(), output.display());
    Ok(())
}

fn aligned(path: &Path, expected: usize, what: &str) -> Result<Vec<Sentence>> {
    let lines = read_aligned(path)?;
    if lines.len() != expected {
        return Err(Error::format(
            path,
            format!("{what} has {} lines, input has {expected}", lines.len()),
        ));
    }
    Ok(lines)
}

pub fn cmd_eval(
    config: &RunConfig,
    direction: &Direction,
    input: &Path,
    outputs: &Path,
    references: Option<&Path>,
    report: Option<&Path>,
) -> Result<()> {
    let (source, target) = direction.resolve(config)?;
    let requests = requests(input, &source, &target)?;
    let outputs = aligned(outputs, requests.len(), "outputs")?;
    let references = references
        .map(|p| aligned(p, requests.len(), "references"))
        .transpose()?;
    let classifier = load_classifier(&config.artifacts.classifier)?;
    let lexicon = if references.is_some() {
        Some(load_lexicon(&config.artifacts.lexicon, &config.attribute_labels()?)?)
    } else {
        None
    };
    let stopwords = Stopwords::english();
    let report_data = evaluate(
        &requests,
        &outputs,
        references.as_deref(),
        &classifier,
        lexicon.as_ref().map(|l| (l, &stopwords)),
    )?;
    let prefix = report.unwrap_or(&config.artifacts.report);
    let paths = write_reports(prefix, &report_data, &config.to_toml())?;
    print!("{}", crate::report::text_report(&report_data, ""));
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_sweep(
    config: &RunConfig,
    direction: &Direction,
    input: &Path,
    gammas: &[f64],
    references: Option<&Path>,
    report: Option<&Path>,
) -> Result<()> {
    let kind = config.system_kind()?;
    let metric = config.metric()?;
    let (source, target) = direction.resolve(config)?;
    let requests = requests(input, &source, &target)?;
    let references = references
        .map(|p| aligned(p, requests.len(), "references"))
        .transpose()?;
    let train_corpus = corpus(config, Split::Train)?;
    let classifier = load_classifier(&config.artifacts.classifier)?;
    let model = if kind.is_neural() || metric == drg_core::retrieval::Metric::Embedding {
        Some(load_generator(&config.artifacts.generator)?)
    } else {
        None
    };
    let lm = if kind == SystemKind::DeleteAndRetrieve {
        Some(load_target_lm(config, &target)?)
    } else {
        None
    };
    let lms: Vec<(AttributeLabel, &(dyn SentenceScorer + Sync))> = lm
        .iter()
        .map(|l| (target.clone(), l as &(dyn SentenceScorer + Sync)))
        .collect();
    let no_delete = config.no_delete_labels()?;
    let setup = SweepSetup {
        train: &train_corpus,
        salience: config.salience_config(),
        kind,
        metric,
        no_delete: &no_delete,
        model: model.as_ref(),
        lms: &lms,
        classifier: &classifier,
        k: config.system.k,
        beam: config.system.beam,
    };
    let points = tradeoff_sweep(&setup, &requests, references.as_deref(), gammas)?;
    let table = sweep_table(&points);
    print!("{table}");
    let prefix = report.unwrap_or(&config.artifacts.report);
    let kv_path = with_suffix(prefix, ".sweep.kv");
    let txt_path = with_suffix(prefix, ".sweep.txt");
    write_file(&kv_path, |w| w.write_all(sweep_key_values(&points).as_bytes()))?;
    let mut text = table;
    text.push_str("\nconfiguration\n");
    for line in config.to_toml().lines() {
        text.push_str("  ");
        text.push_str(line);
        text.push('\n');
    }
    write_file(&txt_path, |w| w.write_all(text.as_bytes()))?;
    eprintln!("wrote {} and {}", kv_path.display(), txt_path.display());
    Ok(())
}
