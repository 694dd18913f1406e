//! Line-oriented text formats: corpora, marker lexicons and split dumps.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use drg_core::corpus::{tokenize, AttributeLabel, LabeledCorpus, Sentence, Split};
use drg_core::salience::{MarkerLexicon, NGram};
use drg_core::splitter::MarkedSentence;

use crate::error::{Error, Result};

/// Header line of a marker lexicon file.
pub const LEXICON_HEADER: &str = "ngram\tattribute\tsalience";

/// Every line of a UTF-8 file without its terminator. Decoding errors carry the 1-based line number.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    let mut lines = Vec::new();
    if bytes.is_empty() {
        return Ok(lines);
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    for (i, raw) in body.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| Error::Encoding {
            path: path.to_owned(),
            line: i + 1,
        })?;
        lines.push(line.to_owned());
    }
    Ok(lines)
}

/// One tokenized sentence per non-blank line.
pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    Ok(read_lines(path)?
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| tokenize(l))
        .collect())
}

/// One sentence per line, blank lines kept, so the result stays aligned with another file.
pub fn read_aligned(path: &Path) -> Result<Vec<Sentence>> {
    Ok(read_lines(path)?.iter().map(|l| tokenize(l)).collect())
}

/// Builds a corpus from one file per attribute, in the given attribute order.
pub fn load_corpus(split: Split, files: &[(AttributeLabel, PathBuf)]) -> Result<LabeledCorpus> {
    let mut corpus = LabeledCorpus::new(split, files.iter().map(|(a, _)| a.clone()).collect())?;
    for (i, (_, path)) in files.iter().enumerate() {
        for s in read_sentences(path)? {
            corpus.push(i, s);
        }
    }
    Ok(corpus)
}

/// `source<TAB>reference` pairs, as shipped with human rewrites.
pub fn read_reference_pairs(path: &Path) -> Result<Vec<(Sentence, Sentence)>> {
    let mut pairs = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (source, reference) = line
            .split_once('\t')
            .ok_or_else(|| Error::line(path, i + 1, "expected source<TAB>reference"))?;
        pairs.push((tokenize(source), tokenize(reference)));
    }
    Ok(pairs)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.to_owned(),
            source,
        })?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Write {
            path: path.to_owned(),
            source,
        })
}

/// Writes `write` to `path`, creating parent directories.
pub fn write_file(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let wrap = |source| Error::Write {
        path: path.to_owned(),
        source,
    };
    let mut out = create(path)?;
    write(&mut out).map_err(wrap)?;
    out.flush().map_err(wrap)
}

pub fn write_sentences(path: &Path, sentences: &[Sentence]) -> Result<()> {
    write_file(path, |w| {
        for s in sentences {
            writeln!(w, "{s}")?;
        }
        Ok(())
    })
}

/// Lexicon rows under a `#`-commented preamble (`echo`, one comment line per input line).
pub fn write_lexicon(w: &mut dyn Write, lexicon: &MarkerLexicon, echo: Option<&str>) -> std::io::Result<()> {
    if let Some(echo) = echo {
        for line in echo.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "{LEXICON_HEADER}")?;
    for (a, ngram, salience) in lexicon.rows() {
        writeln!(w, "{ngram}\t{}\t{salience}", lexicon.attributes()[a])?;
    }
    Ok(())
}

pub fn save_lexicon(path: &Path, lexicon: &MarkerLexicon, echo: Option<&str>) -> Result<()> {
    write_file(path, |w| write_lexicon(w, lexicon, echo))
}

/// Reads a lexicon file over `attributes`. Rows naming another attribute are an error.
pub fn load_lexicon(path: &Path, attributes: &[AttributeLabel]) -> Result<MarkerLexicon> {
    let lines = read_lines(path)?;
    let mut body = lines.iter().enumerate().skip_while(|(_, l)| l.starts_with('#'));
    match body.next() {
        Some((_, header)) if header == LEXICON_HEADER => {}
        Some((i, _)) => return Err(Error::line(path, i + 1, format!("expected header `{LEXICON_HEADER}`"))),
        None => return Err(Error::format(path, "missing header")),
    }
    let mut rows = Vec::new();
    for (i, line) in body {
        let fields: Vec<&str> = line.split('\t').collect();
        let [ngram, attribute, salience] = fields[..] else {
            return Err(Error::line(path, i + 1, "expected three tab-separated fields"));
        };
        let a = attributes
            .iter()
            .position(|x| x.as_str() == attribute)
            .ok_or_else(|| Error::line(path, i + 1, format!("unknown attribute `{attribute}`")))?;
        let salience: f64 = salience
            .parse()
            .map_err(|_| Error::line(path, i + 1, format!("bad salience `{salience}`")))?;
        if ngram.is_empty() || ngram.split(' ').any(str::is_empty) {
            return Err(Error::line(path, i + 1, "malformed n-gram"));
        }
        rows.push((a, NGram::new(ngram.split(' ')), salience));
    }
    Ok(MarkerLexicon::from_entries(attributes.to_vec(), rows)?)
}

fn join_markers(markers: &[NGram]) -> String {
    markers.iter().map(ToString::to_string).collect::<Vec<_>>().join("|")
}

/// `original<TAB>content<TAB>marker1|marker2|...`
pub fn split_record(marked: &MarkedSentence) -> String {
    format!("{}\t{}\t{}", marked.original, marked.content, join_markers(&marked.marker_ngrams()))
}

/// Audit line of one transfer: the split record, then the retrieved sentence,
/// the markers used for the target and the output.
pub fn intermediate_record(outcome: &drg_core::systems::TransferOutcome) -> String {
    format!(
        "{}\t{}\t{}\t{}",
        split_record(&outcome.split),
        outcome.retrieved.as_ref().map(ToString::to_string).unwrap_or_default(),
        join_markers(&outcome.target_markers),
        outcome.output
    )
}
