mod common;

use std::collections::HashMap;

use common::label;
use drg_core::corpus::{build_vocab, build_vocab_from, LabeledCorpus, Sentence, Split};
use drg_core::eval::{bleu, classifier_score, s_a, s_c, spearman, train_classifier, ReferenceRecord, Stopwords};
use drg_core::neural::{seeded, softmax, NeuralConfig, TrainConfig};
use drg_core::retrieval::{top_k, ContentEncoder, ContentIndex, EmbeddingIndex, TfIdfIndex};
use drg_core::salience::{count_ngrams, salience_from_counts, MarkerLexicon, NGram, SalienceConfig};
use drg_core::splitter::{candidate_spans, passthrough_split, split_by_index, word_edit_distance, MarkedSentence};
use drg_core::systems::{fill_template, noise_markers, MarkerNeighbors};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;

fn words(vocab: usize, max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0..vocab).prop_map(|i| format!("t{i}")), 0..=max_len)
}

fn sentence(vocab: usize, max_len: usize) -> impl Strategy<Value = Sentence> {
    words(vocab, max_len).prop_map(Sentence::from_tokens)
}

fn nonempty_sentence(vocab: usize, max_len: usize) -> impl Strategy<Value = Sentence> {
    prop::collection::vec((0..vocab).prop_map(|i| format!("t{i}")), 1..=max_len).prop_map(Sentence::from_tokens)
}

fn two_attribute_corpus(vocab: usize) -> impl Strategy<Value = LabeledCorpus> {
    (
        prop::collection::vec(sentence(vocab, 8), 1..12),
        prop::collection::vec(sentence(vocab, 8), 1..12),
    )
        .prop_map(|(a, b)| {
            let mut c = LabeledCorpus::new(Split::Train, vec![label("neg"), label("pos")]).unwrap();
            for s in a {
                c.push(0, s);
            }
            for s in b {
                c.push(1, s);
            }
            c
        })
}

/// Random lexicon rows over `t0..t{vocab}` for two attributes.
fn lexicon(vocab: usize) -> impl Strategy<Value = MarkerLexicon> {
    prop::collection::vec((0..2usize, words(vocab, 3), 1.5f64..40.0), 0..14).prop_map(|rows| {
        MarkerLexicon::from_entries(
            vec![label("neg"), label("pos")],
            rows.into_iter().filter(|r| !r.1.is_empty()).map(|(a, w, s)| (a, NGram::new(w), s)),
        )
        .unwrap()
    })
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn ulp(x: f64) -> f64 {
    let next = f64::from_bits(x.abs().to_bits() + 1);
    next - x.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn salience_matches_exact_arithmetic(own in 0u64..1_000_000, elsewhere in 0u64..1_000_000, m in 1u32..64, k in 0u32..6) {
        let lambda = m as f64 / (1u64 << k) as f64;
        let got = salience_from_counts(own, elsewhere, lambda);
        let l = rational(lambda);
        let exact = (BigRational::from_integer(BigInt::from(own)) + &l)
            / (BigRational::from_integer(BigInt::from(elsewhere)) + &l);
        prop_assert!((rational(got) - exact).abs() <= rational(ulp(got)));
    }

    #[test]
    fn salience_is_monotone_in_each_count(own in 0u64..100_000, elsewhere in 0u64..100_000, lambda in 0.1f64..4.0) {
        let s = salience_from_counts(own, elsewhere, lambda);
        prop_assert!(salience_from_counts(own + 1, elsewhere, lambda) > s);
        prop_assert!(salience_from_counts(own, elsewhere + 1, lambda) < s);
    }

    #[test]
    fn salience_is_not_scale_invariant(own in 0u64..1000, elsewhere in 0u64..1000, f in 2u64..10) {
        prop_assume!(own != elsewhere);
        let scaled = salience_from_counts(own * f, elsewhere * f, 1.0);
        prop_assert_ne!(scaled, salience_from_counts(own, elsewhere, 1.0));
    }

    #[test]
    fn lexicon_membership_matches_brute_force(
        corpus in two_attribute_corpus(6),
        gamma in 1.0f64..6.0,
        lambda in prop::sample::select(vec![0.5, 1.0, 2.0]),
        min_count in 1u64..3,
        n_max in 1usize..4,
    ) {
        let config = SalienceConfig { lambda, gamma, n_max, min_count };
        let lexicon = MarkerLexicon::from_counts(&count_ngrams(&corpus, n_max), &config).unwrap();
        let mut expected: Vec<(usize, Vec<String>, f64)> = Vec::new();
        for a in 0..2 {
            let mut seen: Vec<Vec<String>> = Vec::new();
            for s in corpus.sentences(a) {
                for n in 1..=n_max {
                    for w in s.tokens().windows(n) {
                        if !seen.iter().any(|g| g.as_slice() == w) {
                            seen.push(w.to_vec());
                        }
                    }
                }
            }
            for g in seen {
                let count = |b: usize| -> u64 {
                    corpus.sentences(b).iter().map(|s| s.tokens().windows(g.len()).filter(|w| *w == g.as_slice()).count() as u64).sum()
                };
                let (own, other) = (count(a), count(1 - a));
                let s = (own as f64 + lambda) / (other as f64 + lambda);
                if s > gamma && own >= min_count {
                    expected.push((a, g, s));
                }
            }
        }
        expected.sort_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)));
        let mut got: Vec<(usize, Vec<String>, f64)> =
            lexicon.rows().into_iter().map(|(a, g, s)| (a, g.tokens().to_vec(), s)).collect();
        got.sort_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)));
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn split_reassembles_and_only_deletes_markers(s in sentence(6, 14), lex in lexicon(6), attribute in 0..2usize) {
        let marked = split_by_index(&s, attribute, &lex);
        prop_assert_eq!(marked.reassemble(), s.clone());
        for m in &marked.markers {
            prop_assert_eq!(lex.get(attribute, m.ngram.tokens()), Some(m.salience));
            prop_assert_eq!(&s.tokens()[m.start..m.end()], m.ngram.tokens());
        }
        for w in marked.markers.windows(2) {
            prop_assert!(w[0].end() <= w[1].start);
        }
    }

    #[test]
    fn split_selection_is_a_best_disjoint_subset(s in sentence(4, 12), lex in lexicon(4), attribute in 0..2usize) {
        let spans = candidate_spans(s.tokens(), attribute, &lex);
        prop_assume!(spans.len() <= 10);
        let mut best = 0.0f64;
        for mask in 0u32..(1 << spans.len()) {
            let chosen: Vec<_> = spans.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect();
            let disjoint = chosen.iter().all(|a| chosen.iter().all(|b| a == b || a.0 + a.1 <= b.0 || b.0 + b.1 <= a.0));
            if disjoint {
                best = best.max(chosen.iter().map(|c| c.2).sum());
            }
        }
        let total: f64 = split_by_index(&s, attribute, &lex).markers.iter().map(|m| m.salience).sum();
        prop_assert!((total - best).abs() <= 1e-9 * best.max(1.0), "{} vs {}", total, best);
    }

    #[test]
    fn unigram_markers_split_idempotently(content in words(5, 8), markers in prop::collection::vec((0..8usize, 0..3usize), 0..4)) {
        // Marker words never occur in content, so deleting them cannot create new markers.
        let lex = MarkerLexicon::from_entries(
            vec![label("neg"), label("pos")],
            (0..3).map(|i| (0, NGram::parse(&format!("m{i}")), 10.0)),
        ).unwrap();
        let mut tokens = content.clone();
        for (at, m) in markers {
            tokens.insert(at.min(tokens.len()), format!("m{m}"));
        }
        let first = split_by_index(&Sentence::from_tokens(tokens), 0, &lex);
        prop_assert_eq!(first.content.tokens(), content.as_slice());
        let again = split_by_index(&first.content, 0, &lex);
        prop_assert!(again.markers.is_empty());
    }

    #[test]
    fn template_filling_never_perturbs_content(s in sentence(6, 12), lex in lexicon(6), fills in prop::collection::vec(words(9, 3), 0..5)) {
        let marked = split_by_index(&s, 0, &lex);
        let fills: Vec<NGram> = fills.into_iter().map(NGram::new).collect();
        let out = fill_template(&marked, &fills);
        let content = marked.content.tokens();
        let mut kept = Vec::new();
        let mut pos = 0;
        let mut next = 0;
        for (i, slot) in marked.slot_positions().into_iter().enumerate() {
            while next < slot {
                kept.push(out.tokens()[pos].clone());
                pos += 1;
                next += 1;
            }
            pos += fills.get(i).map_or(0, NGram::len);
        }
        kept.extend(out.tokens()[pos..].iter().cloned());
        prop_assert_eq!(kept.as_slice(), content);
    }

    #[test]
    fn zero_noise_is_identity(lex in lexicon(5), markers in prop::collection::vec(words(5, 3), 0..6), seed in any::<u64>()) {
        let markers: Vec<NGram> = markers.into_iter().filter(|m| !m.is_empty()).map(NGram::new).collect();
        let neighbors = MarkerNeighbors::new(&lex, 0);
        prop_assert_eq!(noise_markers(&markers, &neighbors, 0.0, &mut seeded(seed)), markers);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn vocabulary_roundtrip_and_order(sentences in prop::collection::vec(sentence(12, 8), 1..20), rot in 0usize..20) {
        let vocab = build_vocab_from(sentences.iter(), 1);
        for s in &sentences {
            prop_assert_eq!(&vocab.decode(&vocab.encode(s)).unwrap(), s);
        }
        let mut rotated = sentences.clone();
        let r = rot % rotated.len();
        rotated.rotate_left(r);
        prop_assert_eq!(build_vocab_from(rotated.iter(), 1), vocab);
    }
}

fn brute_edit_distance(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = brute_edit_distance(ra, rb) + usize::from(x != y);
            sub.min(brute_edit_distance(ra, b) + 1).min(brute_edit_distance(a, rb) + 1)
        }
    }
}

proptest! {
    #[test]
    fn edit_distance_is_a_metric(
        a in prop::collection::vec(0u8..4, 0..7),
        b in prop::collection::vec(0u8..4, 0..7),
        c in prop::collection::vec(0u8..4, 0..7),
    ) {
        let d = word_edit_distance::<u8>;
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
    }

    #[test]
    fn edit_distance_matches_recursion(a in prop::collection::vec(0u8..3, 0..5), b in prop::collection::vec(0u8..3, 0..5)) {
        prop_assert_eq!(word_edit_distance(&a, &b), brute_edit_distance(&a, &b));
    }
}

/// Bag-of-words counts over a fixed word list.
#[derive(Debug)]
struct Counts(usize);

impl ContentEncoder for Counts {
    fn dim(&self) -> usize {
        self.0
    }

    fn encode_content(&self, content: &Sentence) -> Vec<f64> {
        let mut v = vec![0.0; self.0];
        for t in content.tokens() {
            v[t[1..].parse::<usize>().unwrap()] += 1.0;
        }
        v
    }
}

fn tfidf_oracle(docs: &[MarkedSentence], query: &Sentence) -> Vec<f64> {
    let n = docs.len() as f64;
    let mut df: HashMap<&str, f64> = HashMap::new();
    for d in docs {
        let mut seen: Vec<&str> = d.content.tokens().iter().map(String::as_str).collect();
        seen.sort();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1.0;
        }
    }
    let weights = |s: &Sentence| {
        let mut w: HashMap<&str, f64> = HashMap::new();
        for t in s.tokens() {
            if let Some(&f) = df.get(t.as_str()) {
                *w.entry(df.get_key_value(t.as_str()).unwrap().0).or_default() += (n / f).ln();
            }
        }
        w
    };
    let q = weights(query);
    let qn: f64 = q.values().map(|x| x * x).sum();
    docs.iter()
        .map(|d| {
            let w = weights(&d.content);
            let dn: f64 = w.values().map(|x| x * x).sum();
            if qn == 0.0 || dn == 0.0 {
                return 1.0;
            }
            let dot: f64 = q.iter().map(|(t, x)| x * w.get(t).copied().unwrap_or(0.0)).sum();
            (1.0 - dot / (qn * dn).sqrt()).max(0.0)
        })
        .collect()
}

fn linear_scan(distances: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    order.truncate(k);
    order
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn retrieval_top_k_matches_linear_scan(
        docs in prop::collection::vec(sentence(8, 6), 1..60),
        queries in prop::collection::vec(sentence(8, 6), 1..10),
        k in 1usize..12,
    ) {
        let entries: Vec<MarkedSentence> = docs.iter().map(|d| passthrough_split(d, &label("pos"))).collect();
        let tfidf = TfIdfIndex::build(label("pos"), entries.clone()).unwrap();
        let embed = EmbeddingIndex::build(label("pos"), entries.clone(), Counts(8)).unwrap();
        for q in &queries {
            let oracle = tfidf_oracle(&entries, q);
            let got = tfidf.distances(q).unwrap();
            for (g, o) in got.iter().zip(&oracle) {
                prop_assert!((g - o).abs() <= 1e-12);
            }
            for index in [&tfidf as &dyn ContentIndex, &embed] {
                let d = index.distances(q).unwrap();
                let hits: Vec<usize> = index.query(q, k).unwrap().hits.iter().map(|h| h.index).collect();
                prop_assert_eq!(&hits, &linear_scan(&d, k));
                prop_assert_eq!(&top_k(&d, k), &hits);
            }
        }
    }

    #[test]
    fn bleu_of_identical_corpora_is_100(h in prop::collection::vec(nonempty_sentence(10, 9), 1..8)) {
        prop_assert_eq!(bleu(&h, &h).unwrap(), 100.0);
    }

    #[test]
    fn bleu_is_invariant_to_joint_permutation(
        pairs in prop::collection::vec((sentence(6, 8), nonempty_sentence(6, 8)), 1..8),
        rot in 0usize..8,
    ) {
        let (h, r): (Vec<Sentence>, Vec<Sentence>) = pairs.into_iter().unzip();
        let mut h2 = h.clone();
        let mut r2 = r.clone();
        h2.reverse();
        r2.reverse();
        let k = rot % h2.len();
        h2.rotate_left(k);
        r2.rotate_left(k);
        let a = bleu(&h, &r).unwrap();
        let b = bleu(&h2, &r2).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=100.0).contains(&a));
    }

    #[test]
    fn overlap_rates_are_bounded_and_monotone(
        records in prop::collection::vec((sentence(10, 8), sentence(10, 8)), 1..6),
        extra in words(10, 5),
        lex in lexicon(10),
    ) {
        let sw = Stopwords::new(["t0", "t1"]);
        let records: Vec<ReferenceRecord> = records
            .into_iter()
            .map(|(source, reference)| ReferenceRecord { source, source_attribute: label("neg"), reference })
            .collect();
        for rate in [s_c(&records, &lex, &sw).unwrap(), s_a(&records, &lex, &sw).unwrap()] {
            prop_assert_eq!(rate.used + rate.skipped, records.len());
            if let Some(v) = rate.value {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        let first = &records[..1];
        let mut grown = first.to_vec();
        let mut tokens = grown[0].reference.tokens().to_vec();
        tokens.extend(extra);
        grown[0].reference = Sentence::from_tokens(tokens);
        if let Some(before) = s_c(first, &lex, &sw).unwrap().value {
            prop_assert!(s_c(&grown, &lex, &sw).unwrap().value.unwrap() >= before);
        }
    }

    #[test]
    fn spearman_of_itself_and_reversal(a in prop::collection::vec(-100.0f64..100.0, 2..30)) {
        let mut distinct = a.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assume!(distinct.len() == a.len());
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        prop_assert!((spearman(&a, &a).unwrap().unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!((spearman(&a, &neg).unwrap().unwrap() + 1.0).abs() <= 1e-12);
    }
}

#[test]
fn classifier_score_ignores_output_order() {
    let corpus = LabeledCorpus::from_lines(
        Split::Train,
        [("neg", vec!["t1 t2 t3", "t2 t4"]), ("pos", vec!["t5 t6", "t7 t5 t1"])],
    )
    .unwrap();
    let config = NeuralConfig {
        embedding_dim: 6,
        hidden_dim: 6,
        vocab_min_count: 1,
        train: TrainConfig { max_epochs: 3, batch_size: 2, patience: None, ..TrainConfig::default() },
        ..NeuralConfig::default()
    };
    let clf = train_classifier(&corpus, None, &config, 4, |_| {}).unwrap().0;
    assert_eq!(build_vocab(&corpus, 1).len(), clf.vocab.len());
    proptest!(|(outputs in prop::collection::vec(sentence(8, 6), 1..20), rot in 0usize..20)| {
        let mut permuted = outputs.clone();
        permuted.reverse();
        let k = rot % permuted.len();
        permuted.rotate_left(k);
        prop_assert_eq!(
            classifier_score(&outputs, &label("pos"), &clf).unwrap(),
            classifier_score(&permuted, &label("pos"), &clf).unwrap()
        );
    });
}
