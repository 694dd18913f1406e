use std::fs;
use std::path::Path;

use drg::config::{Overrides, RunConfig};
use drg::container::{
    config_echo, load_classifier, load_generator, load_index, load_language_model, save_classifier, save_generator,
    save_index, save_language_model, FORMAT_VERSION,
};
use drg::text::{load_corpus, load_lexicon, read_aligned, read_reference_pairs, save_lexicon, split_record, LEXICON_HEADER};
use drg::Error;
use drg_core::corpus::{AttributeLabel, LabeledCorpus, Sentence, Split};
use drg_core::eval::train_classifier;
use drg_core::neural::{train_lm, NeuralConfig, TrainConfig};
use drg_core::retrieval::Metric;
use drg_core::salience::{extract_markers, MarkerLexicon, NGram, SalienceConfig};
use drg_core::splitter::split;
use drg_core::systems::{build_index, build_training_set, train, Seq2SeqModel, SystemKind};
use rand::SeedableRng;
use tempfile::TempDir;

fn label(s: &str) -> AttributeLabel {
    AttributeLabel::new(s).unwrap()
}

fn corpus() -> LabeledCorpus {
    LabeledCorpus::from_lines(
        Split::Train,
        [
            ("neg", vec!["the food was awful", "service was rude and slow", "the room was dirty"]),
            ("pos", vec!["the food was great", "service was friendly", "the room was clean and bright"]),
        ],
    )
    .unwrap()
}

fn lexicon() -> MarkerLexicon {
    let config = SalienceConfig {
        gamma: 1.5,
        ..SalienceConfig::default()
    };
    extract_markers(&corpus(), &config).unwrap()
}

fn tiny(epochs: usize) -> NeuralConfig {
    NeuralConfig {
        embedding_dim: 4,
        hidden_dim: 5,
        vocab_min_count: 1,
        train: TrainConfig {
            max_epochs: epochs,
            batch_size: 2,
            patience: None,
            ..TrainConfig::default()
        },
        ..NeuralConfig::default()
    }
}

fn generator(kind: SystemKind, epochs: usize) -> Seq2SeqModel {
    let c = corpus();
    let examples = build_training_set(kind, &c, &lexicon(), &[], 0.0, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0)).unwrap();
    train(kind, c.attributes(), &examples, &[], &tiny(epochs), 5, |_| {}).unwrap().0
}

fn write(dir: &Path, name: &str, body: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn corpus_files_skip_blank_lines() {
    let dir = TempDir::new().unwrap();
    let neg = write(dir.path(), "neg.txt", b"bad food\n\n  \nrude staff\r\n");
    let pos = write(dir.path(), "pos.txt", b"good food\n");
    let c = load_corpus(Split::Train, &[(label("neg"), neg.clone()), (label("pos"), pos)]).unwrap();
    assert_eq!(c.sizes(), vec![2, 1]);
    assert_eq!(c.sentences(0)[1], Sentence::from("rude staff"));
    // Aligned reads keep the blanks.
    assert_eq!(read_aligned(&neg).unwrap().len(), 4);
}

#[test]
fn corpus_errors_name_the_file_and_line() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.txt");
    let err = load_corpus(Split::Train, &[(label("neg"), missing.clone()), (label("pos"), missing.clone())]).unwrap_err();
    assert!(matches!(err, Error::Read { ref path, .. } if path == &missing));
    assert!(err.to_string().contains("nope.txt"));
    assert_eq!(err.exit_code(), 2);

    let bad = write(dir.path(), "bad.txt", b"fine\nalso fine\nbroken \xff\n");
    let err = read_aligned(&bad).unwrap_err();
    assert!(matches!(err, Error::Encoding { line: 3, .. }), "{err:?}");
}

#[test]
fn reference_pairs_are_tab_separated() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "ref.tsv", b"the food was bad\tthe food was good\n\nno tab here\n");
    let err = read_reference_pairs(&p).unwrap_err();
    assert!(matches!(err, Error::Line { line: 3, .. }));
    let p = write(dir.path(), "ref2.tsv", b"a b\tc d\n");
    assert_eq!(read_reference_pairs(&p).unwrap(), vec![(Sentence::from("a b"), Sentence::from("c d"))]);
}

#[test]
fn lexicon_file_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let lex = lexicon();
    assert!(!lex.is_empty());
    let p = dir.path().join("out/markers.tsv");
    save_lexicon(&p, &lex, Some("seed = 1\ngamma = 1.5")).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("# seed = 1\n# gamma = 1.5\n"));
    let back = load_lexicon(&p, lex.attributes()).unwrap();
    assert_eq!(back, lex);
    for (a, ngram, s) in lex.rows() {
        assert_eq!(back.get(a, ngram.tokens()).unwrap().to_bits(), s.to_bits());
    }
    // Writing twice gives the same bytes.
    let q = dir.path().join("again.tsv");
    save_lexicon(&q, &back, Some("seed = 1\ngamma = 1.5")).unwrap();
    assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
}

#[test]
fn infinite_threshold_writes_only_the_header() {
    let dir = TempDir::new().unwrap();
    let config = SalienceConfig {
        gamma: f64::INFINITY,
        ..SalienceConfig::default()
    };
    let lex = extract_markers(&corpus(), &config).unwrap();
    let p = dir.path().join("m.tsv");
    save_lexicon(&p, &lex, None).unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap(), format!("{LEXICON_HEADER}\n"));
    assert!(load_lexicon(&p, lex.attributes()).unwrap().is_empty());
}

#[test]
fn malformed_lexicon_rows_are_rejected() {
    let dir = TempDir::new().unwrap();
    let attrs = [label("neg"), label("pos")];
    let cases: [(&str, usize); 5] = [
        ("wrong header\n", 1),
        ("ngram\tattribute\tsalience\nrude\tneg\n", 2),
        ("ngram\tattribute\tsalience\nrude\tmeh\t3.0\n", 2),
        ("ngram\tattribute\tsalience\nrude\tneg\tlots\n", 2),
        ("# c\nngram\tattribute\tsalience\nrude  food\tneg\t3.0\n", 3),
    ];
    for (body, line) in cases {
        let p = write(dir.path(), "bad.tsv", body.as_bytes());
        match load_lexicon(&p, &attrs) {
            Err(Error::Line { line: l, .. }) => assert_eq!(l, line, "{body:?}"),
            other => panic!("{body:?}: {other:?}"),
        }
    }
    let p = write(dir.path(), "empty.tsv", b"");
    assert!(matches!(load_lexicon(&p, &attrs), Err(Error::Format { .. })));
}

#[test]
fn split_records_list_markers() {
    let lex = MarkerLexicon::from_entries(vec![label("neg"), label("pos")], [(0, NGram::parse("rude"), 9.0), (0, NGram::parse("so slow"), 9.0)])
        .unwrap();
    let marked = split(&Sentence::from("staff was rude and so slow"), &label("neg"), &lex).unwrap();
    assert_eq!(split_record(&marked), "staff was rude and so slow\tstaff was and\trude|so slow");
}

#[test]
fn generator_files_round_trip() {
    let dir = TempDir::new().unwrap();
    for kind in [SystemKind::DeleteOnly, SystemKind::DeleteAndRetrieve] {
        let model = generator(kind, 1);
        let p = dir.path().join(format!("{kind}.bin"));
        save_generator(&p, &model, "seed = 5").unwrap();
        let back = load_generator(&p).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.kind(), model.kind());
        assert_eq!(config_echo(&p).unwrap(), "seed = 5");
    }
}

#[test]
fn language_model_and_classifier_files_round_trip() {
    let dir = TempDir::new().unwrap();
    let c = corpus();
    let (lm, _) = train_lm(c.sentences(1), &[], &tiny(1), 2, |_| {}).unwrap();
    let p = dir.path().join("lm.bin");
    save_language_model(&p, &lm, &label("pos"), "").unwrap();
    assert_eq!(load_language_model(&p).unwrap(), (lm, label("pos")));

    let (clf, _) = train_classifier(&c, None, &tiny(1), 3, |_| {}).unwrap();
    let p = dir.path().join("clf.bin");
    save_classifier(&p, &clf, "").unwrap();
    assert_eq!(load_classifier(&p).unwrap(), clf);
    // Wrong kind of file.
    assert!(matches!(load_generator(&p), Err(Error::Format { .. })));
}

#[test]
fn corrupted_containers_are_rejected() {
    let dir = TempDir::new().unwrap();
    let (clf, _) = train_classifier(&corpus(), None, &tiny(0), 3, |_| {}).unwrap();
    let p = dir.path().join("clf.bin");
    save_classifier(&p, &clf, "").unwrap();
    let bytes = fs::read(&p).unwrap();
    assert_eq!(&bytes[8..12], &FORMAT_VERSION.to_le_bytes());

    let truncated = write(dir.path(), "t.bin", &bytes[..bytes.len() - 3]);
    assert!(matches!(load_classifier(&truncated), Err(Error::Format { .. })));

    let mut trailing = bytes.clone();
    trailing.push(0);
    let trailing = write(dir.path(), "x.bin", &trailing);
    assert!(matches!(load_classifier(&trailing), Err(Error::Format { .. })));

    let mut version = bytes.clone();
    version[8] = 99;
    let version = write(dir.path(), "v.bin", &version);
    assert!(matches!(load_classifier(&version), Err(Error::Format { .. })));

    // A tensor shape that disagrees with the stored dimensions.
    let mut other = clf.clone();
    other.params.dims.hidden += 1;
    let q = dir.path().join("shape.bin");
    save_classifier(&q, &other, "").unwrap();
    let err = load_classifier(&q).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err:?}");
}

#[test]
fn tfidf_index_files_answer_like_the_original() {
    let dir = TempDir::new().unwrap();
    let c = corpus();
    let lex = lexicon();
    let index = build_index(&c, &label("pos"), &lex, &[], Metric::TfIdf, None).unwrap();
    let p = dir.path().join("index.bin");
    save_index(&p, index.as_ref(), None, "").unwrap();
    let back = load_index(&p, None).unwrap();
    assert_eq!(back.entries(), index.entries());
    for q in ["the food was", "service and", "zebra"] {
        let q = Sentence::from(q);
        let (a, b) = (index.distances(&q).unwrap(), back.distances(&q).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn embedding_index_files_need_a_matching_encoder() {
    let dir = TempDir::new().unwrap();
    let c = corpus();
    let lex = lexicon();
    let model = generator(SystemKind::DeleteAndRetrieve, 0);
    let index = build_index(&c, &label("neg"), &lex, &[], Metric::Embedding, Some(&model)).unwrap();
    let p = dir.path().join("index.bin");
    assert!(save_index(&p, index.as_ref(), None, "").is_err());
    save_index(&p, index.as_ref(), Some(&model), "").unwrap();
    let back = load_index(&p, Some(&model)).unwrap();
    let q = Sentence::from("the room was");
    assert_eq!(back.distances(&q).unwrap(), index.distances(&q).unwrap());
    assert!(load_index(&p, None).is_err());
}

#[test]
fn config_defaults_overrides_and_paths() {
    let dir = TempDir::new().unwrap();
    let p = write(
        dir.path(),
        "run.toml",
        b"seed = 3\nattributes = [\"neg\", \"pos\"]\n[data.train]\nneg = \"neg.txt\"\npos = \"/abs/pos.txt\"\n[salience]\ngamma = 4.0\n",
    );
    let mut config = RunConfig::load(&p).unwrap();
    assert_eq!(config.seed, 3);
    assert_eq!(config.system.kind, "delete-and-retrieve");
    assert_eq!(config.generator.noise, 0.1);
    let files = config.corpus_files(Split::Train).unwrap();
    assert_eq!(files[0].1, dir.path().join("neg.txt"));
    assert_eq!(files[1].1, Path::new("/abs/pos.txt"));
    assert_eq!(config.language_model_path(&label("pos")), dir.path().join("lm.pos.bin"));
    assert!(config.corpus_files(Split::Dev).is_err());

    config.apply(&Overrides {
        gamma: Some(7.0),
        system: Some("template".into()),
        ..Overrides::default()
    });
    assert_eq!(config.salience_config().gamma, 7.0);
    assert_eq!(config.system_kind().unwrap(), SystemKind::TemplateBased);
    assert_eq!(RunConfig::parse(&config.to_toml()).unwrap(), config);

    config.system.kind = "magic".into();
    assert_eq!(config.system_kind().unwrap_err().exit_code(), 1);
    assert!(RunConfig::parse("sed = 1").is_err());
    let one = RunConfig::parse("attributes = [\"pos\"]").unwrap();
    assert!(one.attribute_labels().is_err());
}
