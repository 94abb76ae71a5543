use std::path::PathBuf;

use anyhow::Context;
use eigenmood::ingest::{
    corpus_stats, dedup_corpus, load_files, write_snapshot, LoadOutcome, ParseMode,
};
use eigenmood::table::{Cell, Table};
use eigenmood::NormalizationPolicy;

use super::{report_written, write_all, CORPUS_FILE};
use crate::args::{Flags, IngestArgs};
use crate::UsageError;

/// Expands directories to the `*_labels.jsonl` files they hold.
fn expand(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .is_some_and(|n| n.to_string_lossy().ends_with("_labels.jsonl"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(UsageError("no annotation files found".into()).into());
    }
    Ok(files)
}

pub fn run(flags: &Flags, args: &IngestArgs) -> anyhow::Result<()> {
    let files = expand(&args.paths)?;
    let mode = if args.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };
    let LoadOutcome { corpus, rejected } = load_files(&files, mode)?;
    let out = &flags.out;
    let mut tables = Vec::new();

    let corpus = if flags.dedup {
        let (kept, report) = dedup_corpus(&corpus, &NormalizationPolicy::default());
        let mut t = Table::new("dedup_report", &["poet", "line", "reason"]);
        for r in &report.removed {
            t.push(vec![
                r.poet.clone().into(),
                r.line.into(),
                r.reason().into(),
            ]);
        }
        tables.push(t);
        kept
    } else {
        corpus
    };
    write_snapshot(&corpus, &out.join(CORPUS_FILE))?;

    let stats = corpus_stats(&corpus);
    let mut summary = Table::new("corpus_stats", &["metric", "value"]).with_display_decimals(3);
    let rate: Cell = if stats.abstain_rate_defined {
        stats.abstain_rate.into()
    } else {
        Cell::Missing
    };
    for (k, v) in [
        ("verses", stats.verses.into()),
        ("abstained", stats.abstained.into()),
        ("annotated", stats.annotated.into()),
        ("abstain_rate", rate),
        ("label_instances", stats.label_instances.into()),
        (
            "labels_per_annotated_verse",
            stats.labels_per_annotated_verse.into(),
        ),
        ("confidence_min", stats.confidence_min.into()),
        ("confidence_mean", stats.confidence_mean.into()),
        ("confidence_max", stats.confidence_max.into()),
        ("failure_notes", stats.failure_notes.into()),
        ("distinct_texts", stats.distinct_texts.into()),
        ("poets", corpus.poets.len().into()),
        ("rejected_lines", rejected.len().into()),
    ] {
        summary.push(vec![k.into(), v]);
    }
    tables.push(summary);

    let mut per_poet = Table::new(
        "poet_stats",
        &[
            "poet",
            "verses",
            "abstained",
            "abstain_rate",
            "label_instances",
            "mean_confidence",
        ],
    )
    .with_display_decimals(3);
    for p in &stats.per_poet {
        per_poet.push(vec![
            p.poet.clone().into(),
            p.verses.into(),
            p.abstained.into(),
            p.abstain_rate.into(),
            p.label_instances.into(),
            p.mean_confidence.into(),
        ]);
    }
    tables.push(per_poet);

    if args.lenient {
        let mut t = Table::new("rejected_lines", &["path", "line", "message"]);
        for r in &rejected {
            t.push(vec![
                r.path.display().to_string().into(),
                r.line.into(),
                r.message.clone().into(),
            ]);
        }
        tables.push(t);
    }

    let written = write_all(out, &tables)?;
    flags.run_config("ingest", files).write()?;
    report_written("ingest", out, written.len() + 2);
    Ok(())
}
