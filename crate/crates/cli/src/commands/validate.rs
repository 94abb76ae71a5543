use std::path::Path;

use anyhow::Context;
use eigenmood::table::{Cell, Table};
use eigenmood::validation::{
    load_dual_annotations, load_predictions, predictions_from_corpus, stratified_sample, validate,
    EceReport, Prediction, Stratum, ValidationOptions,
};

use super::{load_corpus, report_written, require, write_all};
use crate::args::{Flags, ValidateArgs};
use crate::UsageError;

pub fn run(flags: &Flags, args: &ValidateArgs) -> anyhow::Result<()> {
    match (&args.corpus, &args.sheet) {
        (Some(corpus), None) => sample(flags, corpus, args.draw.expect("clap requires --draw")),
        (None, Some(sheet)) => metrics(
            flags,
            sheet,
            args.predictions
                .as_deref()
                .expect("clap requires --predictions"),
            args.min_prevalence,
        ),
        _ => Err(UsageError(
            "validate needs either --corpus with --draw, or --sheet with --predictions".into(),
        )
        .into()),
    }
}

fn sample(flags: &Flags, corpus_path: &Path, draw: usize) -> anyhow::Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let cfg = flags.run_config("validate_sample", vec![corpus_path.to_path_buf()]);
    let drawn = stratified_sample(&corpus, draw, &Stratum::ALL, cfg.seed)?;

    let mut sample = Table::new(
        "validation_sample",
        &[
            "verse_ref",
            "stratum",
            "max_confidence",
            "model_labels",
            "verse_text",
        ],
    )
    .with_display_decimals(2);
    let mut template = Table::new(
        "validation_sheet_template",
        &[
            "verse_ref",
            "annotator_a_labels",
            "annotator_b_labels",
            "a_abstain_ok",
            "b_abstain_ok",
        ],
    );
    let mut preds = Table::new(
        "validation_predictions",
        &["verse_ref", "abstain", "labels", "confidences"],
    );
    for r in &drawn.refs {
        let v = corpus.find(r).expect("sampled from this corpus");
        let p = Prediction::from_verse(v);
        let labels: Vec<&str> = p.labels().map(|c| c.as_str()).collect();
        let confs: Vec<String> = p
            .confidences
            .values()
            .map(|&x| eigenmood::table::sig(x))
            .collect();
        sample.push(vec![
            r.to_string().into(),
            Stratum::of(v).as_str().into(),
            v.max_confidence().into(),
            labels.join(";").into(),
            v.verse_text.clone().into(),
        ]);
        template.push(vec![
            r.to_string().into(),
            "".into(),
            "".into(),
            "".into(),
            "".into(),
        ]);
        preds.push(vec![
            r.to_string().into(),
            p.abstain.into(),
            labels.join(";").into(),
            confs.join(";").into(),
        ]);
    }
    let mut strata = Table::new("validation_strata", &["stratum", "population", "sampled"]);
    for s in &drawn.strata {
        strata.push(vec![
            s.name.as_str().into(),
            s.population.into(),
            s.target.into(),
        ]);
    }
    let mut swaps = Table::new(
        "validation_coverage_swaps",
        &["concept", "added", "removed"],
    );
    for (added, removed, c) in &drawn.coverage_swaps {
        swaps.push(vec![
            c.as_str().into(),
            added.to_string().into(),
            removed.to_string().into(),
        ]);
    }
    let written = write_all(&flags.out, &[sample, template, preds, strata, swaps])?;
    cfg.write()?;
    report_written("validate", &flags.out, written.len() + 1);
    Ok(())
}

fn calibration_table(name: &str, report: &EceReport) -> Table {
    let mut t = Table::new(
        name,
        &["bin_lo", "bin_hi", "count", "mean_conf", "accuracy", "gap"],
    )
    .with_display_decimals(3);
    for b in &report.bins {
        t.push(vec![
            b.lo.into(),
            b.hi.into(),
            b.count.into(),
            b.mean_conf.into(),
            b.accuracy.into(),
            b.gap.into(),
        ]);
    }
    t
}

fn metrics(
    flags: &Flags,
    sheet: &Path,
    predictions: &Path,
    min_prevalence: f64,
) -> anyhow::Result<()> {
    require(sheet, "validate")?;
    require(predictions, "validate")?;
    let duals =
        load_dual_annotations(sheet).with_context(|| format!("reading {}", sheet.display()))?;
    if duals.is_empty() {
        return Err(UsageError(format!("validation sheet {} has no rows", sheet.display())).into());
    }
    let preds = if predictions.extension().is_some_and(|e| e == "jsonl") {
        let corpus = load_corpus(predictions)?;
        let refs: Vec<_> = duals.iter().map(|d| d.verse.clone()).collect();
        predictions_from_corpus(&corpus, &refs)?
    } else {
        load_predictions(predictions)
            .with_context(|| format!("reading {}", predictions.display()))?
    };
    let mut cfg = flags.run_config(
        "validate",
        vec![sheet.to_path_buf(), predictions.to_path_buf()],
    );
    cfg.inputs.sort();
    let options = ValidationOptions {
        min_prevalence,
        ..ValidationOptions::default()
    };
    let report = validate(&duals, &preds, &options)?;

    let mut agreement = Table::new(
        "agreement",
        &[
            "concept",
            "p_o",
            "p_e",
            "kappa",
            "pos_a",
            "pos_b",
            "prevalence",
            "excluded",
        ],
    )
    .with_display_decimals(3);
    for r in &report.agreement.rows {
        agreement.push(vec![
            r.concept.as_str().into(),
            r.kappa.p_o.into(),
            r.kappa.p_e.into(),
            r.kappa.kappa.into(),
            r.pos_a.into(),
            r.pos_b.into(),
            r.prevalence.into(),
            r.excluded.into(),
        ]);
    }
    let mut precision = Table::new(
        "precision",
        &["concept", "predicted", "correct", "precision"],
    )
    .with_display_decimals(3);
    let mut prf = Table::new(
        "prf1",
        &[
            "concept",
            "precision",
            "recall",
            "f1",
            "support",
            "excluded",
        ],
    )
    .with_display_decimals(3);
    for r in &report.prf.rows {
        precision.push(vec![
            r.concept.as_str().into(),
            r.predicted.into(),
            r.true_positives.into(),
            r.precision.into(),
        ]);
        prf.push(vec![
            r.concept.as_str().into(),
            r.precision.into(),
            r.recall.into(),
            r.f1.into(),
            r.support.into(),
            r.excluded.into(),
        ]);
    }
    let mut coverage = Table::new(
        "coverage_risk",
        &["tau", "retained", "coverage", "accuracy", "risk"],
    )
    .with_display_decimals(3);
    for r in &report.coverage {
        coverage.push(vec![
            r.threshold.into(),
            r.retained.into(),
            r.coverage.into(),
            r.accuracy.into(),
            r.risk.into(),
        ]);
    }
    let mut summary =
        Table::new("validation_summary", &["metric", "value"]).with_display_decimals(4);
    let instances: usize = report.ece_raw.bins.iter().map(|b| b.count).sum();
    let rows: Vec<(&str, Cell)> = vec![
        ("verses", report.verses.into()),
        ("label_instances", instances.into()),
        ("macro_kappa", report.agreement.macro_kappa.into()),
        ("macro_precision", report.prf.macro_precision.into()),
        ("macro_recall", report.prf.macro_recall.into()),
        ("macro_f1", report.prf.macro_f1.into()),
        (
            "abstention_appropriateness",
            report.abstention_appropriateness.into(),
        ),
        ("temperature", report.temperature.temperature.into()),
        ("temperature_nll", report.temperature.nll.into()),
        ("ece_raw", report.ece_raw.ece.into()),
        ("ece_calibrated", report.ece_calibrated.ece.into()),
        ("min_prevalence", min_prevalence.into()),
    ];
    for (k, v) in rows {
        summary.push(vec![k.into(), v]);
    }
    if let Some(w) = &report.temperature.warning {
        eprintln!("warning: {w}");
    }
    let tables = [
        agreement,
        precision,
        prf,
        calibration_table("calibration", &report.ece_calibrated),
        calibration_table("calibration_raw", &report.ece_raw),
        coverage,
        summary,
    ];
    let written = write_all(&flags.out, &tables)?;
    cfg.write()?;
    report_written("validate", &flags.out, written.len() + 1);
    Ok(())
}
