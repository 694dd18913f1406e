//! Evaluation report files.
//!
//! The key-value file has one `key=value` pair per line. Keys:
//!
//! - `classifier_score`, `bleu_vs_source`: reals in [0, 1] and [0, 100].
//! - `bleu`: BLEU against references, `na` without references.
//! - `s_c`, `s_a`: overlap rates or `na`, with `s_c.used`, `s_c.skipped`,
//!   `s_a.used` and `s_a.skipped` counting records measured and skipped.
//! - `stopwords`: version of the stopword list used for `s_c`/`s_a`.
//! - `examples`: number of outputs scored.
//! - `sweep.rows`, then `sweep.<i>.gamma`, `sweep.<i>.classifier_score`,
//!   `sweep.<i>.bleu`, `sweep.<i>.bleu_basis` and `sweep.<i>.lexicon_size`
//!   for every sweep row in ascending `gamma` order.
//!
//! Reals are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use drg_core::eval::{EvalReport, OverlapRate, SweepPoint, ENGLISH_STOPWORDS_VERSION};

use crate::error::Result;
use crate::text::write_file;

fn rate(value: Option<OverlapRate>) -> String {
    match value.and_then(|r| r.value) {
        Some(v) => v.to_string(),
        None => "na".into(),
    }
}

pub fn key_values(report: &EvalReport) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("classifier_score", report.classifier_score.to_string());
    kv("bleu", report.bleu.map_or("na".into(), |b| b.to_string()));
    kv("bleu_vs_source", report.bleu_vs_source.to_string());
    for (name, r) in [("s_c", report.s_c), ("s_a", report.s_a)] {
        kv(name, rate(r));
        if let Some(r) = r {
            kv(&format!("{name}.used"), r.used.to_string());
            kv(&format!("{name}.skipped"), r.skipped.to_string());
        }
    }
    kv("stopwords", ENGLISH_STOPWORDS_VERSION.into());
    kv("examples", report.examples.len().to_string());
    out.push_str(&sweep_key_values(&report.sweep));
    out
}

pub fn sweep_key_values(points: &[SweepPoint]) -> String {
    let mut out = String::new();
    if points.is_empty() {
        return out;
    }
    let _ = writeln!(out, "sweep.rows={}", points.len());
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(out, "sweep.{i}.gamma={}", p.gamma);
        let _ = writeln!(out, "sweep.{i}.classifier_score={}", p.classifier_score);
        let _ = writeln!(out, "sweep.{i}.bleu={}", p.bleu);
        let _ = writeln!(out, "sweep.{i}.bleu_basis={}", p.bleu_basis.as_str());
        let _ = writeln!(out, "sweep.{i}.lexicon_size={}", p.lexicon_size);
    }
    out
}

pub fn sweep_table(points: &[SweepPoint]) -> String {
    let mut out = format!("{:>12}  {:>16}  {:>8}  {:>9}  {:>8}\n", "gamma", "classifier_score", "bleu", "basis", "markers");
    for p in points {
        let _ = writeln!(
            out,
            "{:>12}  {:>16.4}  {:>8.2}  {:>9}  {:>8}",
            p.gamma,
            p.classifier_score,
            p.bleu,
            p.bleu_basis.as_str(),
            p.lexicon_size
        );
    }
    out
}

/// Human-readable summary, ending with the configuration that produced it.
pub fn text_report(report: &EvalReport, config: &str) -> String {
    let mut out = String::from("evaluation report\n\n");
    let _ = writeln!(out, "outputs scored        {}", report.examples.len());
    let _ = writeln!(out, "classifier score      {:.4}", report.classifier_score);
    match report.bleu {
        Some(b) => {
            let _ = writeln!(out, "BLEU (references)     {b:.2}");
        }
        None => out.push_str("BLEU (references)     n/a, no references given\n"),
    }
    let _ = writeln!(out, "BLEU (sources)        {:.2}", report.bleu_vs_source);
    for (name, r) in [("S_c", report.s_c), ("S_a", report.s_a)] {
        match r {
            Some(r) => {
                let v = r.value.map_or("n/a".into(), |v| format!("{v:.4}"));
                let _ = writeln!(
                    out,
                    "{name}                   {v} ({} records, {} skipped with nothing to measure)",
                    r.used, r.skipped
                );
            }
            None => {
                let _ = writeln!(out, "{name}                   n/a");
            }
        }
    }
    if report.s_c.is_some() {
        let _ = writeln!(out, "stopword list         {ENGLISH_STOPWORDS_VERSION}");
    }
    if !report.sweep.is_empty() {
        out.push_str("\nsweep\n");
        out.push_str(&sweep_table(&report.sweep));
    }
    out.push_str("\nconfiguration\n");
    for line in config.lines() {
        let _ = writeln!(out, "  {line}");
    }
    out
}

/// `input<TAB>output<TAB>reference<TAB>classifier decision`, with a header line.
pub fn examples_tsv(report: &EvalReport) -> String {
    let mut out = String::from("input\toutput\treference\tclassifier_decision\n");
    for e in &report.examples {
        let reference = e.reference.as_ref().map(ToString::to_string).unwrap_or_default();
        let _ = writeln!(out, "{}\t{}\t{}\t{}", e.input, e.output, reference, e.predicted);
    }
    out
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>.txt`, `<prefix>.kv` and `<prefix>.examples.tsv`; returns their paths.
pub fn write_reports(prefix: &Path, report: &EvalReport, config: &str) -> Result<[PathBuf; 3]> {
    let paths = [
        with_suffix(prefix, ".txt"),
        with_suffix(prefix, ".kv"),
        with_suffix(prefix, ".examples.tsv"),
    ];
    let bodies = [text_report(report, config), key_values(report), examples_tsv(report)];
    for (path, body) in paths.iter().zip(bodies) {
        write_file(path, |w| w.write_all(body.as_bytes()))?;
    }
    Ok(paths)
}
