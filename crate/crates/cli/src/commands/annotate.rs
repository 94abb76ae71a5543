use std::fmt::Write as _;

use anyhow::Context;
use eigenmood::gateway::{annotate_with_retry, AnnotationRequest, FinalStatus, ScriptedBackend};

use super::report_written;
use crate::args::{AnnotateArgs, Flags};
use crate::UsageError;

pub fn run(flags: &Flags, args: &AnnotateArgs) -> anyhow::Result<()> {
    if args.poet.trim().is_empty() || args.poet.contains(['/', '\\']) {
        return Err(UsageError(format!("invalid poet name {:?}", args.poet)).into());
    }
    let text = std::fs::read_to_string(&args.verses)
        .with_context(|| format!("reading {}", args.verses.display()))?;
    let backend = ScriptedBackend::from_fixture(&args.fixture)?;
    let cfg = flags.run_config("annotate", vec![args.verses.clone(), args.fixture.clone()]);

    let mut labels = String::new();
    let mut attempts = String::new();
    let (mut ok, mut exhausted) = (0usize, 0usize);
    for (i, verse) in text.lines().enumerate() {
        let verse = verse.trim();
        if verse.is_empty() {
            continue;
        }
        let req = AnnotationRequest::new(args.poet.clone(), i + 1, verse);
        let (record, log) = annotate_with_retry(&req, &backend);
        match log.final_status {
            FinalStatus::Ok => ok += 1,
            FinalStatus::Exhausted => exhausted += 1,
        }
        writeln!(labels, "{}", serde_json::to_string(&record.to_record())?)?;
        let entry = serde_json::json!({
            "source_line": i + 1,
            "attempts": log.attempts,
            "final_status": log.final_status,
        });
        writeln!(attempts, "{}", serde_json::to_string(&entry)?)?;
    }

    let labels_path = flags.out.join(format!("{}_labels.jsonl", args.poet));
    let attempts_path = flags.out.join(format!("{}_attempts.jsonl", args.poet));
    std::fs::write(&labels_path, labels)
        .with_context(|| format!("writing {}", labels_path.display()))?;
    std::fs::write(&attempts_path, attempts)
        .with_context(|| format!("writing {}", attempts_path.display()))?;
    cfg.write()?;
    eprintln!("annotate-mock: {ok} annotated, {exhausted} abstained after exhausting retries");
    report_written("annotate-mock", &flags.out, 3);
    Ok(())
}
