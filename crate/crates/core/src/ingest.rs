//! Loading `<POET>_labels.jsonl` annotation files into a validated [`Corpus`].
//!
//! Each line is one record with the fields `input_verse`, `labels`,
//! `confidences`, `rationale`, `abstain`, `notes` and an optional `poet`.
//! Snapshots written by [`write_snapshot`] additionally carry `source_line`
//! so verse references survive a reload.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::concept::Concept;
use crate::error::{Error, Result};

/// One annotated verse.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedVerse {
    pub poet: String,
    pub verse_text: String,
    pub labels: BTreeSet<Concept>,
    /// Key set always equals `labels`.
    pub confidences: BTreeMap<Concept, f64>,
    pub abstain: bool,
    pub notes: Option<String>,
    /// Carried through for audit only.
    pub rationale: Option<serde_json::Value>,
    pub source_line: usize,
    /// Labels whose missing confidence was imputed as 0.0 in lenient mode.
    pub imputed: BTreeSet<Concept>,
}

impl AnnotatedVerse {
    pub fn verse_ref(&self) -> VerseRef {
        VerseRef {
            poet: self.poet.clone(),
            line: self.source_line,
        }
    }

    pub fn max_confidence(&self) -> Option<f64> {
        self.confidences.values().copied().reduce(f64::max)
    }

    /// Serializes to one record line that [`parse_record`] reads back unchanged.
    pub fn to_record(&self) -> serde_json::Value {
        let labels: Vec<&str> = self.labels.iter().map(|c| c.as_str()).collect();
        let confidences: serde_json::Map<String, serde_json::Value> = self
            .confidences
            .iter()
            .map(|(c, p)| (c.as_str().to_string(), serde_json::Value::from(*p)))
            .collect();
        let mut record = serde_json::Map::new();
        record.insert("poet".into(), self.poet.clone().into());
        record.insert("source_line".into(), self.source_line.into());
        record.insert("input_verse".into(), self.verse_text.clone().into());
        record.insert("labels".into(), labels.into());
        record.insert("confidences".into(), confidences.into());
        if let Some(r) = &self.rationale {
            record.insert("rationale".into(), r.clone());
        }
        record.insert("abstain".into(), self.abstain.into());
        if let Some(n) = &self.notes {
            record.insert("notes".into(), n.clone().into());
        }
        if !self.imputed.is_empty() {
            let imputed: Vec<&str> = self.imputed.iter().map(|c| c.as_str()).collect();
            record.insert("imputed".into(), imputed.into());
        }
        serde_json::Value::Object(record)
    }
}

/// `(poet, line)` address of a verse; displayed as `poet:line`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerseRef {
    pub poet: String,
    pub line: usize,
}

impl fmt::Display for VerseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.poet, self.line)
    }
}

impl FromStr for VerseRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (poet, line) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("verse ref `{s}` is not poet:line")))?;
        let line = line
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("verse ref `{s}` has a bad line number")))?;
        Ok(VerseRef {
            poet: poet.trim().to_string(),
            line,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub verses: Vec<AnnotatedVerse>,
    pub poets: Vec<String>,
}

impl Corpus {
    /// Orders verses by poet (stable, so file and line order survive) and
    /// collects the poet list. `extra_poets` lets empty subcorpora keep a row.
    pub fn from_verses(mut verses: Vec<AnnotatedVerse>, extra_poets: &[String]) -> Self {
        verses.sort_by(|a, b| a.poet.cmp(&b.poet));
        let mut poets: BTreeSet<String> = verses.iter().map(|v| v.poet.clone()).collect();
        poets.extend(extra_poets.iter().cloned());
        Corpus {
            verses,
            poets: poets.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.verses.is_empty()
    }

    pub fn poet_index(&self, poet: &str) -> Option<usize> {
        self.poets.iter().position(|p| p == poet)
    }

    pub fn verses_of<'a>(&'a self, poet: &'a str) -> impl Iterator<Item = &'a AnnotatedVerse> + 'a {
        self.verses.iter().filter(move |v| v.poet == poet)
    }

    pub fn find(&self, r: &VerseRef) -> Option<&AnnotatedVerse> {
        self.verses
            .iter()
            .find(|v| v.poet == r.poet && v.source_line == r.line)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseMode {
    /// Any invalid record aborts the load.
    #[default]
    Strict,
    /// Invalid records are skipped and reported; missing confidences become 0.0.
    Lenient,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    #[serde(default)]
    poet: Option<String>,
    #[serde(default)]
    source_line: Option<usize>,
    input_verse: String,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    confidences: BTreeMap<String, Option<f64>>,
    #[serde(default)]
    rationale: Option<serde_json::Value>,
    abstain: bool,
    #[serde(default)]
    notes: Option<String>,
    #[serde(default)]
    imputed: Vec<String>,
}

/// Strict parse of one record line. The record's own `poet` field wins over
/// `poet_hint`.
pub fn parse_record(line: &str, line_no: usize, poet_hint: &str) -> Result<AnnotatedVerse> {
    parse_record_with(line, line_no, poet_hint, ParseMode::Strict)
}

pub fn parse_record_with(
    line: &str,
    line_no: usize,
    poet_hint: &str,
    mode: ParseMode,
) -> Result<AnnotatedVerse> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let poet = raw
        .poet
        .clone()
        .filter(|p| !p.is_empty())
        .unwrap_or_else(|| poet_hint.to_string());
    let source_line = raw.source_line.unwrap_or(line_no);
    build_verse(raw, poet, source_line, mode).map_err(|e| match e {
        Error::UnknownLabel(l) => Error::Validation {
            line: line_no,
            message: format!("label `{l}` is not in the ontology"),
        },
        Error::InvalidInput(message) => Error::Validation {
            line: line_no,
            message,
        },
        other => other,
    })
}

fn build_verse(
    raw: RawRecord,
    poet: String,
    source_line: usize,
    mode: ParseMode,
) -> Result<AnnotatedVerse> {
    let labels = raw
        .labels
        .iter()
        .map(|l| l.parse::<Concept>())
        .collect::<Result<BTreeSet<_>>>()?;
    if raw.abstain && (!labels.is_empty() || !raw.confidences.is_empty()) {
        return Err(Error::InvalidInput(
            "abstained record must have empty labels and confidences".into(),
        ));
    }
    let mut confidences = BTreeMap::new();
    for (key, value) in &raw.confidences {
        let concept: Concept = key.parse()?;
        if !labels.contains(&concept) {
            return Err(Error::InvalidInput(format!(
                "confidence key `{key}` is not among the labels"
            )));
        }
        if let Some(p) = value {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidInput(format!(
                    "confidence {p} for `{key}` is outside [0, 1]"
                )));
            }
            confidences.insert(concept, *p);
        }
    }
    let mut imputed = raw
        .imputed
        .iter()
        .map(|l| l.parse::<Concept>())
        .collect::<Result<BTreeSet<_>>>()?;
    for &label in &labels {
        if confidences.contains_key(&label) {
            continue;
        }
        match mode {
            ParseMode::Strict => {
                return Err(Error::InvalidInput(format!(
                    "label `{label}` has no confidence (key-set mismatch)"
                )))
            }
            ParseMode::Lenient => {
                confidences.insert(label, 0.0);
                imputed.insert(label);
            }
        }
    }
    Ok(AnnotatedVerse {
        poet,
        verse_text: raw.input_verse,
        labels,
        confidences,
        abstain: raw.abstain,
        notes: raw.notes,
        rationale: raw.rationale,
        source_line,
        imputed,
    })
}

/// Poet identity from a file name: `<POET>_labels.jsonl` gives `<POET>`,
/// anything else falls back to the file stem.
pub fn poet_from_path(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    if let Some(prefix) = name.strip_suffix("_labels.jsonl") {
        return prefix.to_string();
    }
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedLine {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOutcome {
    pub corpus: Corpus,
    /// Lenient mode only.
    pub rejected: Vec<RejectedLine>,
}

/// Loads annotation files (in parallel) and merges them deterministically.
pub fn load_files(paths: &[PathBuf], mode: ParseMode) -> Result<LoadOutcome> {
    let mut sorted = paths.to_vec();
    sorted.sort();
    let per_file: Vec<Result<(String, Vec<AnnotatedVerse>, Vec<RejectedLine>)>> =
        sorted.par_iter().map(|p| load_one(p, mode)).collect();
    let mut verses = Vec::new();
    let mut rejected = Vec::new();
    let mut hints = Vec::new();
    for r in per_file {
        let (hint, v, rej) = r?;
        hints.push(hint);
        verses.extend(v);
        rejected.extend(rej);
    }
    Ok(LoadOutcome {
        corpus: Corpus::from_verses(verses, &hints),
        rejected,
    })
}

fn load_one(
    path: &Path,
    mode: ParseMode,
) -> Result<(String, Vec<AnnotatedVerse>, Vec<RejectedLine>)> {
    let hint = poet_from_path(path);
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut verses = Vec::new();
    let mut rejected = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record_with(&line, line_no, &hint, mode) {
            Ok(v) => verses.push(v),
            Err(e) => match mode {
                ParseMode::Strict => {
                    return Err(Error::Validation {
                        line: line_no,
                        message: format!("{}: {e}", path.display()),
                    })
                }
                ParseMode::Lenient => rejected.push(RejectedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                }),
            },
        }
    }
    Ok((hint, verses, rejected))
}

/// Writes the corpus as one JSONL file; [`load_snapshot`] restores it exactly.
pub fn write_snapshot(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for v in &corpus.verses {
        serde_json::to_writer(&mut out, &v.to_record())?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: &Path) -> Result<Corpus> {
    // Every snapshot record names its poet, so the file name is not a poet.
    let (_, verses, _) = load_one(path, ParseMode::Strict)?;
    Ok(Corpus::from_verses(verses, &[]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub unicode_nfkc: bool,
    pub collapse_whitespace: bool,
    pub strip_diacritics_for_dedup: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy {
            unicode_nfkc: true,
            collapse_whitespace: true,
            strip_diacritics_for_dedup: false,
        }
    }
}

pub fn normalize_text(text: &str, policy: &NormalizationPolicy) -> String {
    let mut s: String = if policy.unicode_nfkc {
        text.nfkc().collect()
    } else {
        text.to_string()
    };
    if policy.strip_diacritics_for_dedup {
        // Decompose first so precomposed letters expose their marks.
        s = s
            .nfd()
            .filter(|&c| get_general_category(c) != GeneralCategory::NonspacingMark)
            .nfc()
            .collect();
    }
    if policy.collapse_whitespace {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DedupRemoval {
    pub poet: String,
    pub line: usize,
    pub duplicate_of: usize,
}

impl DedupRemoval {
    pub fn reason(&self) -> String {
        format!("duplicate of line {}", self.duplicate_of)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupReport {
    pub removed: Vec<DedupRemoval>,
}

impl DedupReport {
    pub fn removed_by_poet(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.removed {
            *counts.entry(r.poet.as_str()).or_insert(0) += 1;
        }
        counts
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["poet", "line", "reason"])?;
        for r in &self.removed {
            out.write_record([r.poet.clone(), r.line.to_string(), r.reason()])?;
        }
        out.flush().map_err(|e| Error::io("<dedup report>", e))
    }
}

/// Per-poet deduplication on normalized text; the first occurrence survives.
pub fn dedup_corpus(corpus: &Corpus, policy: &NormalizationPolicy) -> (Corpus, DedupReport) {
    let mut seen: HashMap<(&str, String), usize> = HashMap::new();
    let mut kept = Vec::with_capacity(corpus.verses.len());
    let mut report = DedupReport::default();
    for v in &corpus.verses {
        let key = (v.poet.as_str(), normalize_text(&v.verse_text, policy));
        match seen.get(&key) {
            Some(&first) => report.removed.push(DedupRemoval {
                poet: v.poet.clone(),
                line: v.source_line,
                duplicate_of: first,
            }),
            None => {
                seen.insert(key, v.source_line);
                kept.push(v.clone());
            }
        }
    }
    (
        Corpus {
            verses: kept,
            poets: corpus.poets.clone(),
        },
        report,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoetStats {
    pub poet: String,
    pub verses: usize,
    pub abstained: usize,
    pub abstain_rate: f64,
    pub label_instances: usize,
    pub mean_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub verses: usize,
    pub abstained: usize,
    pub annotated: usize,
    /// 0 with `abstain_rate_defined = false` for an empty corpus.
    pub abstain_rate: f64,
    pub abstain_rate_defined: bool,
    pub label_instances: usize,
    pub labels_per_annotated_verse: Option<f64>,
    pub confidence_min: Option<f64>,
    pub confidence_mean: Option<f64>,
    pub confidence_max: Option<f64>,
    pub per_poet: Vec<PoetStats>,
    /// Abstained verses whose notes carry an invalid-output trace.
    pub failure_notes: usize,
    pub distinct_texts: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_poet = Vec::with_capacity(corpus.poets.len());
    for poet in &corpus.poets {
        let mut verses = 0;
        let mut abstained = 0;
        let mut instances = 0;
        let mut conf_sum = 0.0;
        for v in corpus.verses_of(poet) {
            verses += 1;
            if v.abstain {
                abstained += 1;
            }
            instances += v.confidences.len();
            conf_sum += v.confidences.values().sum::<f64>();
        }
        per_poet.push(PoetStats {
            poet: poet.clone(),
            verses,
            abstained,
            abstain_rate: ratio(abstained, verses),
            label_instances: instances,
            mean_confidence: (instances > 0).then(|| conf_sum / instances as f64),
        });
    }

    let verses = corpus.verses.len();
    let abstained = corpus.verses.iter().filter(|v| v.abstain).count();
    let annotated = verses - abstained;
    let confs: Vec<f64> = corpus
        .verses
        .iter()
        .flat_map(|v| v.confidences.values().copied())
        .collect();
    let label_instances = confs.len();
    let failure_notes = corpus
        .verses
        .iter()
        .filter(|v| {
            v.abstain
                && v.notes
                    .as_deref()
                    .is_some_and(|n| n.starts_with(crate::gateway::FAILURE_NOTE_PREFIX))
        })
        .count();
    let distinct_texts = corpus
        .verses
        .iter()
        .map(|v| v.verse_text.as_str())
        .collect::<HashSet<_>>()
        .len();
    CorpusStats {
        verses,
        abstained,
        annotated,
        abstain_rate: ratio(abstained, verses),
        abstain_rate_defined: verses > 0,
        label_instances,
        labels_per_annotated_verse: (annotated > 0)
            .then(|| label_instances as f64 / annotated as f64),
        confidence_min: confs.iter().copied().reduce(f64::min),
        confidence_mean: (!confs.is_empty())
            .then(|| confs.iter().sum::<f64>() / confs.len() as f64),
        confidence_max: confs.iter().copied().reduce(f64::max),
        per_poet,
        failure_notes,
        distinct_texts,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
