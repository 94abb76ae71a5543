//! Two-annotator validation: sampling, agreement, adjudicated accuracy,
//! abstention appropriateness, calibration and coverage–risk.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::concept::Concept;
use crate::error::{Error, Result};
use crate::ingest::{AnnotatedVerse, Corpus, VerseRef};

/// Thresholds reported in the coverage–risk table.
pub const DEFAULT_COVERAGE_THRESHOLDS: [f64; 5] = [0.3, 0.5, 0.7, 0.8, 0.9];
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
pub const TEMPERATURE_RANGE: (f64, f64) = (0.05, 20.0);
pub const TEMPERATURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualAnnotation {
    pub verse: VerseRef,
    pub a_labels: BTreeSet<Concept>,
    pub b_labels: BTreeSet<Concept>,
    pub a_abstain_ok: bool,
    pub b_abstain_ok: bool,
}

#[derive(Debug, serde::Deserialize)]
struct DualRow {
    verse_ref: String,
    annotator_a_labels: String,
    annotator_b_labels: String,
    a_abstain_ok: String,
    b_abstain_ok: String,
}

fn parse_label_list(field: &str, line: usize) -> Result<BTreeSet<Concept>> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<Concept>().map_err(|_| Error::Validation {
                line,
                message: format!("unknown label `{s}`"),
            })
        })
        .collect()
}

fn parse_flag(field: &str, line: usize) -> Result<bool> {
    match field.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Ok(true),
        "0" | "false" | "no" | "n" => Ok(false),
        other => Err(Error::Validation {
            line,
            message: format!("expected a boolean, got `{other}`"),
        }),
    }
}

fn parse_ref(field: &str, line: usize) -> Result<VerseRef> {
    field.trim().parse().map_err(|_| Error::Validation {
        line,
        message: format!("bad verse_ref `{field}` (expected poet:line)"),
    })
}

/// Reads the validation sheet. Line numbers in errors count the header as 1.
pub fn read_dual_annotations<R: Read>(reader: R) -> Result<Vec<DualAnnotation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<DualRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(DualAnnotation {
            verse: parse_ref(&row.verse_ref, line)?,
            a_labels: parse_label_list(&row.annotator_a_labels, line)?,
            b_labels: parse_label_list(&row.annotator_b_labels, line)?,
            a_abstain_ok: parse_flag(&row.a_abstain_ok, line)?,
            b_abstain_ok: parse_flag(&row.b_abstain_ok, line)?,
        });
    }
    Ok(out)
}

pub fn load_dual_annotations(path: &Path) -> Result<Vec<DualAnnotation>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dual_annotations(file)
}

fn join_labels(labels: &BTreeSet<Concept>) -> String {
    labels
        .iter()
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_dual_annotations<W: std::io::Write>(w: W, duals: &[DualAnnotation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "verse_ref",
        "annotator_a_labels",
        "annotator_b_labels",
        "a_abstain_ok",
        "b_abstain_ok",
    ])?;
    for d in duals {
        wtr.write_record([
            d.verse.to_string(),
            join_labels(&d.a_labels),
            join_labels(&d.b_labels),
            (d.a_abstain_ok as u8).to_string(),
            (d.b_abstain_ok as u8).to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjudicatedReference {
    pub verse: VerseRef,
    pub labels: BTreeSet<Concept>,
}

/// Union rule: a label is in the reference if either annotator assigned it.
pub fn adjudicate(dual: &DualAnnotation) -> AdjudicatedReference {
    AdjudicatedReference {
        verse: dual.verse.clone(),
        labels: dual.a_labels.union(&dual.b_labels).copied().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kappa {
    pub p_o: f64,
    pub p_e: f64,
    /// `None` when `p_e = 1`.
    pub kappa: Option<f64>,
}

pub fn kappa_from_rates(p_o: f64, p_e: f64) -> Option<f64> {
    if p_e >= 1.0 {
        None
    } else {
        Some((p_o - p_e) / (1.0 - p_e))
    }
}

pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<Kappa> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(format!(
            "kappa needs equal nonempty sequences, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let pa = a.iter().filter(|&&x| x).count() as f64 / n;
    let pb = b.iter().filter(|&&x| x).count() as f64 / n;
    let p_o = agree / n;
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    Ok(Kappa {
        p_o,
        p_e,
        kappa: kappa_from_rates(p_o, p_e),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub concept: Concept,
    pub kappa: Kappa,
    pub pos_a: usize,
    pub pos_b: usize,
    /// Share of verses whose adjudicated reference carries the concept.
    pub prevalence: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementTable {
    pub rows: Vec<AgreementRow>,
    /// Mean κ over rows that are defined and not excluded.
    pub macro_kappa: Option<f64>,
}

fn prevalence(duals: &[DualAnnotation], c: Concept) -> f64 {
    let hits = duals
        .iter()
        .filter(|d| d.a_labels.contains(&c) || d.b_labels.contains(&c))
        .count();
    hits as f64 / duals.len() as f64
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-concept agreement. Concepts with prevalence below `min_prevalence`
/// are flagged and left out of the macro; `0.0` keeps everything.
pub fn agreement_table(duals: &[DualAnnotation], min_prevalence: f64) -> Result<AgreementTable> {
    if duals.is_empty() {
        return Err(Error::InvalidInput("empty validation sheet".into()));
    }
    let mut rows = Vec::with_capacity(Concept::COUNT);
    for c in Concept::ALL {
        let a: Vec<bool> = duals.iter().map(|d| d.a_labels.contains(&c)).collect();
        let b: Vec<bool> = duals.iter().map(|d| d.b_labels.contains(&c)).collect();
        let prev = prevalence(duals, c);
        rows.push(AgreementRow {
            concept: c,
            kappa: cohen_kappa(&a, &b)?,
            pos_a: a.iter().filter(|&&x| x).count(),
            pos_b: b.iter().filter(|&&x| x).count(),
            prevalence: prev,
            excluded: prev < min_prevalence,
        });
    }
    let macro_kappa = mean_of(
        rows.iter()
            .filter(|r| !r.excluded)
            .filter_map(|r| r.kappa.kappa),
    );
    Ok(AgreementTable { rows, macro_kappa })
}

pub fn abstention_appropriateness(duals: &[DualAnnotation]) -> Result<f64> {
    if duals.is_empty() {
        return Err(Error::InvalidInput("empty validation sheet".into()));
    }
    let ok = duals
        .iter()
        .filter(|d| d.a_abstain_ok && d.b_abstain_ok)
        .count();
    Ok(ok as f64 / duals.len() as f64)
}

/// One model output on a validation verse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub verse: VerseRef,
    pub abstain: bool,
    pub confidences: BTreeMap<Concept, f64>,
}

impl Prediction {
    pub fn from_verse(v: &AnnotatedVerse) -> Self {
        Prediction {
            verse: v.verse_ref(),
            abstain: v.abstain,
            confidences: if v.abstain {
                BTreeMap::new()
            } else {
                v.confidences.clone()
            },
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = Concept> + '_ {
        self.confidences.keys().copied()
    }
}

#[derive(Debug, serde::Deserialize)]
struct PredictionRow {
    verse_ref: String,
    abstain: String,
    labels: String,
    confidences: String,
}

/// Reads predictions with columns `verse_ref, abstain, labels, confidences`;
/// labels and confidences are semicolon-joined and positionally paired.
pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<Prediction>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<PredictionRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let abstain = parse_flag(&row.abstain, line)?;
        let labels: Vec<&str> = row
            .labels
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let confs: Vec<&str> = row
            .confidences
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if labels.len() != confs.len() {
            return Err(Error::Validation {
                line,
                message: format!("{} labels but {} confidences", labels.len(), confs.len()),
            });
        }
        if abstain && !labels.is_empty() {
            return Err(Error::Validation {
                line,
                message: "abstained prediction carries labels".into(),
            });
        }
        let mut confidences = BTreeMap::new();
        for (l, p) in labels.iter().zip(&confs) {
            let c: Concept = l.parse().map_err(|_| Error::Validation {
                line,
                message: format!("unknown label `{l}`"),
            })?;
            let p: f64 = p.parse().map_err(|_| Error::Validation {
                line,
                message: format!("bad confidence `{p}`"),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation {
                    line,
                    message: format!("confidence {p} outside [0,1]"),
                });
            }
            confidences.insert(c, p);
        }
        out.push(Prediction {
            verse: parse_ref(&row.verse_ref, line)?,
            abstain,
            confidences,
        });
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(file)
}

/// Looks up each sheet verse in a corpus snapshot.
pub fn predictions_from_corpus(corpus: &Corpus, refs: &[VerseRef]) -> Result<Vec<Prediction>> {
    let missing: Vec<String> = refs
        .iter()
        .filter(|r| corpus.find(r).is_none())
        .map(ToString::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Misaligned(missing));
    }
    Ok(refs
        .iter()
        .map(|r| Prediction::from_verse(corpus.find(r).expect("checked")))
        .collect())
}

/// Pairs predictions with references by verse ref, in reference order.
/// Any ref present on only one side, or duplicated, is reported.
pub fn align<'a>(
    predictions: &'a [Prediction],
    references: &'a [AdjudicatedReference],
) -> Result<Vec<(&'a Prediction, &'a AdjudicatedReference)>> {
    let mut by_ref: BTreeMap<&VerseRef, &Prediction> = BTreeMap::new();
    let mut offenders = BTreeSet::new();
    for p in predictions {
        if by_ref.insert(&p.verse, p).is_some() {
            offenders.insert(format!("{} (duplicate prediction)", p.verse));
        }
    }
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(references.len());
    for r in references {
        if !seen.insert(&r.verse) {
            offenders.insert(format!("{} (duplicate reference)", r.verse));
            continue;
        }
        match by_ref.get(&r.verse) {
            Some(p) => pairs.push((*p, r)),
            None => {
                offenders.insert(format!("{} (no prediction)", r.verse));
            }
        }
    }
    for p in predictions {
        if !seen.contains(&p.verse) {
            offenders.insert(format!("{} (no reference)", p.verse));
        }
    }
    if offenders.is_empty() {
        Ok(pairs)
    } else {
        Err(Error::Misaligned(offenders.into_iter().collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfRow {
    pub concept: Concept,
    pub true_positives: usize,
    pub predicted: usize,
    pub support: usize,
    /// `None` when nothing was predicted.
    pub precision: Option<f64>,
    /// `None` when the reference never carries the concept.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfReport {
    pub rows: Vec<PrfRow>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
}

/// Per-concept precision/recall/F1 against the adjudicated reference.
/// Macros average the defined, non-excluded rows.
pub fn precision_recall_f1(
    predictions: &[Prediction],
    references: &[AdjudicatedReference],
    min_prevalence: f64,
) -> Result<PrfReport> {
    let pairs = align(predictions, references)?;
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no aligned verses".into()));
    }
    let n = pairs.len() as f64;
    let mut rows = Vec::with_capacity(Concept::COUNT);
    for c in Concept::ALL {
        let (mut tp, mut predicted, mut support) = (0, 0, 0);
        for (p, r) in &pairs {
            let pred = p.confidences.contains_key(&c);
            let gold = r.labels.contains(&c);
            predicted += pred as usize;
            support += gold as usize;
            tp += (pred && gold) as usize;
        }
        let precision = (predicted > 0).then(|| tp as f64 / predicted as f64);
        let recall = (support > 0).then(|| tp as f64 / support as f64);
        let f1 = precision.zip(recall).map(|(p, r)| {
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        });
        rows.push(PrfRow {
            concept: c,
            true_positives: tp,
            predicted,
            support,
            precision,
            recall,
            f1,
            excluded: (support as f64 / n) < min_prevalence,
        });
    }
    let kept = || rows.iter().filter(|r| !r.excluded);
    Ok(PrfReport {
        macro_precision: mean_of(kept().filter_map(|r| r.precision)),
        macro_recall: mean_of(kept().filter_map(|r| r.recall)),
        macro_f1: mean_of(kept().filter_map(|r| r.f1)),
        rows,
    })
}

/// Predicted label instances as `(confidence, correct)`, correctness being
/// membership in the adjudicated reference.
pub fn label_instances(
    predictions: &[Prediction],
    references: &[AdjudicatedReference],
) -> Result<(Vec<f64>, Vec<bool>)> {
    let pairs = align(predictions, references)?;
    let mut confs = Vec::new();
    let mut correct = Vec::new();
    for (p, r) in pairs {
        for (c, &conf) in &p.confidences {
            confs.push(conf);
            correct.push(r.labels.contains(c));
        }
    }
    Ok((confs, correct))
}

const PROB_FLOOR: f64 = 1e-12;

fn logit(p: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ(logit(p)/T)`. `T = 1` returns `p` itself.
pub fn temperature_scale(p: f64, t: f64) -> f64 {
    if t == 1.0 {
        return p;
    }
    sigmoid(logit(p) / t)
}

/// Mean binary negative log-likelihood under temperature `t`.
pub fn temperature_nll(confs: &[f64], correct: &[bool], t: f64) -> f64 {
    let total: f64 = confs
        .iter()
        .zip(correct)
        .map(|(&p, &y)| {
            let q = sigmoid(logit(p) / t).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if y {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    total / confs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureFit {
    pub temperature: f64,
    pub nll: f64,
    pub warning: Option<String>,
}

fn check_paired(confs: &[f64], correct: &[bool]) -> Result<()> {
    if confs.len() != correct.len() {
        return Err(Error::InvalidInput(format!(
            "{} confidences but {} outcomes",
            confs.len(),
            correct.len()
        )));
    }
    if confs.is_empty() {
        return Err(Error::InvalidInput("no label instances".into()));
    }
    if let Some(p) = confs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("confidence {p} outside [0,1]")));
    }
    Ok(())
}

/// Golden-section search on `ln T` over the fixed range. Confidences at
/// exactly 0 or 1 are clamped before taking logits.
pub fn fit_temperature(confs: &[f64], correct: &[bool]) -> Result<TemperatureFit> {
    check_paired(confs, correct)?;
    let f = |x: f64| temperature_nll(confs, correct, x.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (TEMPERATURE_RANGE.0.ln(), TEMPERATURE_RANGE.1.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > TEMPERATURE_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let temperature = x.exp();
    let positives = correct.iter().filter(|&&y| y).count();
    let warning = if positives == 0 || positives == correct.len() {
        Some(format!(
            "all outcomes {}; temperature {temperature:.6} sits at a search boundary",
            if positives == 0 {
                "incorrect"
            } else {
                "correct"
            }
        ))
    } else {
        None
    };
    Ok(TemperatureFit {
        temperature,
        nll: f(x),
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_conf: f64,
    pub accuracy: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EceReport {
    pub ece: f64,
    /// Nonempty bins only, ascending.
    pub bins: Vec<CalibrationBin>,
}

/// Index of the right-open bin holding `p`; the top bin is closed.
fn bin_index(p: f64, nbins: usize) -> usize {
    let n = nbins as f64;
    let mut i = ((p * n).floor().max(0.0) as usize).min(nbins - 1);
    // p·n can land a hair off an edge; compare against the edge values themselves
    if i > 0 && p < i as f64 / n {
        i -= 1;
    } else if i + 1 < nbins && p >= (i + 1) as f64 / n {
        i += 1;
    }
    i
}

pub fn ece(confs: &[f64], correct: &[bool], bin_width: f64) -> Result<EceReport> {
    check_paired(confs, correct)?;
    let nbins = (1.0 / bin_width).round() as usize;
    if nbins == 0 || ((nbins as f64) * bin_width - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "bin width {bin_width} does not tile [0,1]"
        )));
    }
    let mut count = vec![0usize; nbins];
    let mut conf_sum = vec![0.0; nbins];
    let mut hits = vec![0usize; nbins];
    for (&p, &y) in confs.iter().zip(correct) {
        let i = bin_index(p, nbins);
        count[i] += 1;
        conf_sum[i] += p;
        hits[i] += y as usize;
    }
    let n = confs.len() as f64;
    let mut bins = Vec::new();
    let mut total = 0.0;
    for i in (0..nbins).filter(|&i| count[i] > 0) {
        let mean_conf = conf_sum[i] / count[i] as f64;
        let accuracy = hits[i] as f64 / count[i] as f64;
        let gap = (accuracy - mean_conf).abs();
        total += count[i] as f64 / n * gap;
        bins.push(CalibrationBin {
            lo: i as f64 / nbins as f64,
            hi: (i + 1) as f64 / nbins as f64,
            count: count[i],
            mean_conf,
            accuracy,
            gap,
        });
    }
    Ok(EceReport { ece: total, bins })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub threshold: f64,
    pub retained: usize,
    pub coverage: f64,
    /// `None` when nothing is retained.
    pub accuracy: Option<f64>,
    pub risk: Option<f64>,
}

pub fn coverage_risk(
    confs: &[f64],
    correct: &[bool],
    thresholds: &[f64],
) -> Result<Vec<CoverageRow>> {
    check_paired(confs, correct)?;
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput(
            "thresholds must be sorted ascending".into(),
        ));
    }
    let n = confs.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&tau| {
            let (retained, hits) = confs
                .iter()
                .zip(correct)
                .filter(|(&p, _)| p >= tau)
                .fold((0usize, 0usize), |(r, h), (_, &y)| (r + 1, h + y as usize));
            let accuracy = (retained > 0).then(|| hits as f64 / retained as f64);
            CoverageRow {
                threshold: tau,
                retained,
                coverage: retained as f64 / n,
                accuracy,
                risk: accuracy.map(|a| 1.0 - a),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Abstained,
    Low,
    Medium,
    High,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [
        Stratum::Abstained,
        Stratum::Low,
        Stratum::Medium,
        Stratum::High,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Abstained => "abstained",
            Stratum::Low => "low",
            Stratum::Medium => "medium",
            Stratum::High => "high",
        }
    }

    /// Non-abstained verses are placed by their maximum confidence; a verse
    /// without any confidence counts as low.
    pub fn of(v: &AnnotatedVerse) -> Stratum {
        if v.abstain {
            return Stratum::Abstained;
        }
        match v.max_confidence() {
            Some(m) if m >= 0.8 => Stratum::High,
            Some(m) if m >= 0.7 => Stratum::Medium,
            _ => Stratum::Low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratumSpec {
    pub name: Stratum,
    pub population: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedSample {
    /// Sampled verses in corpus order.
    pub refs: Vec<VerseRef>,
    pub strata: Vec<StratumSpec>,
    /// Swaps made to cover concepts otherwise missing: (added, removed, concept).
    pub coverage_swaps: Vec<(VerseRef, VerseRef, Concept)>,
}

/// Largest-remainder apportionment of `total` over `populations`;
/// remainder ties go to the earlier entry.
pub fn largest_remainder(total: usize, populations: &[usize]) -> Vec<usize> {
    let sum: usize = populations.iter().sum();
    if sum == 0 {
        return vec![0; populations.len()];
    }
    let mut alloc: Vec<usize> = populations.iter().map(|&p| total * p / sum).collect();
    let mut order: Vec<(usize, usize)> = populations
        .iter()
        .enumerate()
        .map(|(i, &p)| (i, (total * p) % sum))
        .collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut left = total - alloc.iter().sum::<usize>();
    for (i, rem) in order {
        if left == 0 {
            break;
        }
        if rem > 0 {
            alloc[i] += 1;
            left -= 1;
        }
    }
    alloc
}

fn stratum_rng(seed: u64, s: Stratum) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed ^ (s as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Proportional stratified sample without replacement, then swaps that make
/// every concept present in the corpus appear at least once. Only verses in
/// the listed strata form the population.
pub fn stratified_sample(
    corpus: &Corpus,
    total: usize,
    strata: &[Stratum],
    seed: u64,
) -> Result<StratifiedSample> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); strata.len()];
    for (i, v) in corpus.verses.iter().enumerate() {
        if let Some(k) = strata.iter().position(|&s| s == Stratum::of(v)) {
            members[k].push(i);
        }
    }
    let populations: Vec<usize> = members.iter().map(Vec::len).collect();
    let population: usize = populations.iter().sum();
    if total > population {
        return Err(Error::InvalidInput(format!(
            "sample of {total} exceeds population of {population}"
        )));
    }
    let targets = largest_remainder(total, &populations);

    // Shuffle each stratum fully: the head is the draw, the tail the reserve.
    let mut shuffled = members.clone();
    for (k, order) in shuffled.iter_mut().enumerate() {
        let mut rng = stratum_rng(seed, strata[k]);
        for i in 0..order.len().saturating_sub(1) {
            let j = rng.random_range(i..order.len());
            order.swap(i, j);
        }
    }
    let mut chosen: Vec<Vec<usize>> = shuffled
        .iter()
        .zip(&targets)
        .map(|(o, &t)| o[..t].to_vec())
        .collect();
    let mut reserve: Vec<Vec<usize>> = shuffled
        .iter()
        .zip(&targets)
        .map(|(o, &t)| o[t..].to_vec())
        .collect();

    let carries =
        |i: usize, c: Concept| corpus.verses[i].labels.contains(&c) && !corpus.verses[i].abstain;
    let mut swaps = Vec::new();
    for c in Concept::ALL {
        if chosen.iter().flatten().any(|&i| carries(i, c)) {
            continue;
        }
        let Some((k, pos)) = reserve
            .iter()
            .enumerate()
            .find_map(|(k, r)| r.iter().position(|&i| carries(i, c)).map(|p| (k, p)))
        else {
            continue;
        };
        // Drop the latest-drawn verse whose concepts stay covered without it,
        // preferring the incoming verse's stratum.
        let covered_without = |chosen: &[Vec<usize>], k: usize, slot: usize| {
            let drop = chosen[k][slot];
            corpus.verses[drop].labels.iter().all(|&d| {
                chosen
                    .iter()
                    .enumerate()
                    .flat_map(|(kk, v)| v.iter().enumerate().map(move |(s, &i)| (kk, s, i)))
                    .any(|(kk, s, i)| !(kk == k && s == slot) && carries(i, d))
            })
        };
        let mut victim = None;
        let mut order: Vec<usize> = (0..chosen.len()).collect();
        order.sort_by_key(|&kk| (kk != k, std::cmp::Reverse(chosen[kk].len())));
        'search: for kk in order {
            for slot in (0..chosen[kk].len()).rev() {
                if covered_without(&chosen, kk, slot) {
                    victim = Some((kk, slot));
                    break 'search;
                }
            }
        }
        let Some((vk, slot)) = victim else { continue };
        let incoming = reserve[k].remove(pos);
        let outgoing = chosen[vk].remove(slot);
        reserve[vk].push(outgoing);
        chosen[k].push(incoming);
        swaps.push((
            corpus.verses[incoming].verse_ref(),
            corpus.verses[outgoing].verse_ref(),
            c,
        ));
    }

    let mut picked: Vec<usize> = chosen.iter().flatten().copied().collect();
    picked.sort_unstable();
    let specs = strata
        .iter()
        .enumerate()
        .map(|(k, &name)| StratumSpec {
            name,
            population: populations[k],
            target: chosen[k].len(),
        })
        .collect();
    Ok(StratifiedSample {
        refs: picked
            .iter()
            .map(|&i| corpus.verses[i].verse_ref())
            .collect(),
        strata: specs,
        coverage_swaps: swaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationOptions {
    pub min_prevalence: f64,
    pub bin_width: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            min_prevalence: 0.0,
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub verses: usize,
    pub agreement: AgreementTable,
    pub prf: PrfReport,
    pub abstention_appropriateness: f64,
    pub temperature: TemperatureFit,
    pub ece_raw: EceReport,
    /// On temperature-scaled confidences.
    pub ece_calibrated: EceReport,
    /// On temperature-scaled confidences.
    pub coverage: Vec<CoverageRow>,
}

pub fn validate(
    duals: &[DualAnnotation],
    predictions: &[Prediction],
    options: &ValidationOptions,
) -> Result<ValidationReport> {
    if duals.is_empty() {
        return Err(Error::InvalidInput("empty validation sheet".into()));
    }
    let references: Vec<AdjudicatedReference> = duals.iter().map(adjudicate).collect();
    let prf = precision_recall_f1(predictions, &references, options.min_prevalence)?;
    let (confs, correct) = label_instances(predictions, &references)?;
    let temperature = fit_temperature(&confs, &correct)?;
    let scaled: Vec<f64> = confs
        .iter()
        .map(|&p| temperature_scale(p, temperature.temperature))
        .collect();
    Ok(ValidationReport {
        verses: duals.len(),
        agreement: agreement_table(duals, options.min_prevalence)?,
        prf,
        abstention_appropriateness: abstention_appropriateness(duals)?,
        ece_raw: ece(&confs, &correct, options.bin_width)?,
        ece_calibrated: ece(&scaled, &correct, options.bin_width)?,
        coverage: coverage_risk(&scaled, &correct, &DEFAULT_COVERAGE_THRESHOLDS)?,
        temperature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(cs: &[Concept]) -> BTreeSet<Concept> {
        cs.iter().copied().collect()
    }

    fn dual(line: usize, a: &[Concept], b: &[Concept]) -> DualAnnotation {
        DualAnnotation {
            verse: VerseRef {
                poet: "p".into(),
                line,
            },
            a_labels: set(a),
            b_labels: set(b),
            a_abstain_ok: true,
            b_abstain_ok: line % 2 == 0,
        }
    }

    #[test]
    fn kappa_hand_counts() {
        let k = cohen_kappa(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!((k.p_o, k.p_e, k.kappa), (0.5, 0.5, Some(0.0)));
        let k = cohen_kappa(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!(k.kappa, Some(1.0));
        assert_eq!(
            cohen_kappa(&[true, true], &[true, true]).unwrap().kappa,
            None
        );
        assert!(cohen_kappa(&[], &[]).is_err());
        assert!((kappa_from_rates(0.978, 0.744).unwrap() - 0.914).abs() < 0.001);
    }

    #[test]
    fn union_adjudication() {
        let d = dual(1, &[Concept::Melancholia], &[Concept::RomanticObsession]);
        assert_eq!(
            adjudicate(&d).labels,
            set(&[Concept::Melancholia, Concept::RomanticObsession])
        );
        assert!(adjudicate(&dual(1, &[], &[])).labels.is_empty());
    }

    #[test]
    fn abstention_fraction() {
        let duals = [dual(1, &[], &[]), dual(2, &[], &[])];
        assert_eq!(abstention_appropriateness(&duals).unwrap(), 0.5);
        assert!(abstention_appropriateness(&[]).is_err());
    }

    #[test]
    fn prevalence_exclusion_affects_macro_only() {
        let m = Concept::Melancholia;
        let duals: Vec<_> = (0..10)
            .map(|i| match i {
                0 => dual(i, &[m, Concept::Idealization], &[m]),
                1..=4 => dual(i, &[m], &[m]),
                _ => dual(i, &[], &[]),
            })
            .collect();
        let all = agreement_table(&duals, 0.0).unwrap();
        let some = agreement_table(&duals, 0.2).unwrap();
        let ideal = Concept::Idealization.index();
        assert_eq!(all.rows[ideal].kappa, some.rows[ideal].kappa);
        assert!(some.rows[ideal].excluded && !all.rows[ideal].excluded);
        assert_eq!(some.macro_kappa, Some(1.0));
        assert_eq!(all.macro_kappa, Some(0.5));
    }

    fn pred(line: usize, labels: &[(Concept, f64)]) -> Prediction {
        Prediction {
            verse: VerseRef {
                poet: "p".into(),
                line,
            },
            abstain: labels.is_empty(),
            confidences: labels.iter().copied().collect(),
        }
    }

    #[test]
    fn prf_counts_and_undefined_precision() {
        let m = Concept::Melancholia;
        let r = Concept::RomanticObsession;
        let refs: Vec<_> = [dual(1, &[m], &[]), dual(2, &[r], &[m]), dual(3, &[], &[])]
            .iter()
            .map(adjudicate)
            .collect();
        let preds = [
            pred(1, &[(m, 0.9)]),
            pred(2, &[(m, 0.8)]),
            pred(3, &[(m, 0.4)]),
        ];
        let rep = precision_recall_f1(&preds, &refs, 0.0).unwrap();
        let mel = &rep.rows[m.index()];
        assert_eq!((mel.true_positives, mel.predicted, mel.support), (2, 3, 2));
        assert!((mel.precision.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let rom = &rep.rows[r.index()];
        assert_eq!((rom.precision, rom.recall), (None, Some(0.0)));
        assert_eq!(rom.f1, None);
        assert!((rep.macro_precision.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((rep.macro_recall.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn misalignment_lists_offenders() {
        let refs = vec![
            adjudicate(&dual(1, &[], &[])),
            adjudicate(&dual(2, &[], &[])),
        ];
        let preds = [pred(1, &[]), pred(7, &[])];
        match align(&preds, &refs).unwrap_err() {
            Error::Misaligned(list) => {
                assert_eq!(
                    list,
                    vec![
                        "p:2 (no prediction)".to_string(),
                        "p:7 (no reference)".to_string()
                    ]
                )
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn temperature_map_values() {
        assert_eq!(temperature_scale(0.37, 1.0), 0.37);
        assert!((temperature_scale(0.7, 0.5) - 0.844_827_586).abs() < 1e-6);
        assert!(temperature_scale(0.6, 2.0) < 0.6);
        assert!((temperature_scale(0.5, 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_temperature_fit_warns() {
        let fit = fit_temperature(&[0.6, 0.7, 0.8], &[true, true, true]).unwrap();
        assert!(fit.warning.is_some());
        assert!(fit.temperature < 0.06);
    }

    #[test]
    fn ece_hand_cases() {
        let r = ece(&[1.0, 1.0], &[true, true], 0.1).unwrap();
        assert_eq!(r.ece, 0.0);
        assert_eq!(r.bins.len(), 1);
        assert_eq!((r.bins[0].lo, r.bins[0].hi), (0.9, 1.0));
        let r = ece(&[0.6, 0.8], &[true, false], 0.5).unwrap();
        assert!((r.ece - 0.2).abs() < 1e-12);
        assert!(ece(&[], &[], 0.1).is_err());
    }

    #[test]
    fn bin_edges_are_right_open() {
        for (p, want) in [
            (0.0, 0),
            (0.1, 1),
            (0.3, 3),
            (0.7, 7),
            (0.6999999, 6),
            (0.9, 9),
            (1.0, 9),
        ] {
            assert_eq!(bin_index(p, 10), want, "{p}");
        }
    }

    #[test]
    fn coverage_toy() {
        let rows = coverage_risk(
            &[0.4, 0.6, 0.8, 0.9],
            &[false, true, true, true],
            &[0.1, 0.7, 0.95],
        )
        .unwrap();
        assert_eq!(rows[0].coverage, 1.0);
        assert_eq!((rows[1].coverage, rows[1].risk), (0.5, Some(0.0)));
        assert_eq!((rows[2].retained, rows[2].accuracy), (0, None));
        assert!(coverage_risk(&[0.5], &[true], &[0.7, 0.3]).is_err());
    }

    #[test]
    fn largest_remainder_toy() {
        assert_eq!(largest_remainder(10, &[5, 3, 2]), vec![5, 3, 2]);
        assert_eq!(largest_remainder(5, &[0, 3, 3, 3]), vec![0, 2, 2, 1]);
        assert_eq!(largest_remainder(7, &[0, 10, 0, 4]), vec![0, 5, 0, 2]);
        assert_eq!(largest_remainder(3, &[0, 0]), vec![0, 0]);
    }

    #[test]
    fn sheet_round_trip() {
        let duals = vec![
            dual(3, &[Concept::Melancholia, Concept::Idealization], &[]),
            dual(4, &[], &[]),
        ];
        let mut buf = Vec::new();
        write_dual_annotations(&mut buf, &duals).unwrap();
        assert_eq!(read_dual_annotations(buf.as_slice()).unwrap(), duals);
        let bad = "verse_ref,annotator_a_labels,annotator_b_labels,a_abstain_ok,b_abstain_ok\np:1,bogus,,1,1\n";
        assert!(matches!(
            read_dual_annotations(bad.as_bytes()),
            Err(Error::Validation { line: 2, .. })
        ));
    }

    #[test]
    fn predictions_csv_parses() {
        let text = "verse_ref,abstain,labels,confidences\np:1,0,melancholia;idealization,0.8;0.55\np:2,1,,\n";
        let preds = read_predictions(text.as_bytes()).unwrap();
        assert_eq!(preds[0].confidences[&Concept::Idealization], 0.55);
        assert!(preds[1].abstain && preds[1].confidences.is_empty());
        let bad = "verse_ref,abstain,labels,confidences\np:1,0,melancholia,\n";
        assert!(read_predictions(bad.as_bytes()).is_err());
    }
}
