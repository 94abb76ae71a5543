use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use eigenmood::ingest::corpus_stats;
use eigenmood::table::{Cell, Table};

use super::profile::{DISTRIBUTIONS_FILE, DIVERGENCE_FILE};
use super::spectral::COORDINATES_FILE;
use super::{load_corpus, report_written, require, table, CORPUS_FILE};
use crate::args::{Flags, ReportArgs};
use crate::svg;

pub const FIGURES_DIR: &str = "figures";
pub const HISTOGRAM_BIN: f64 = 0.05;

/// A parsed upstream CSV keyed by column name.
struct Sheet {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Sheet {
    fn read(path: &Path, stage: &'static str) -> anyhow::Result<Sheet> {
        require(path, stage)?;
        let mut rdr =
            csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(Sheet { header, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn text(&self, row: &[String], name: &str) -> anyhow::Result<String> {
        let i = self
            .column(name)
            .with_context(|| format!("column {name} missing"))?;
        Ok(row[i].clone())
    }

    fn num(&self, row: &[String], name: &str) -> anyhow::Result<Option<f64>> {
        match self.column(name) {
            None => Ok(None),
            Some(i) if row[i] == eigenmood::table::MISSING => Ok(None),
            Some(i) => Ok(Some(
                row[i]
                    .parse()
                    .with_context(|| format!("column {name}: {:?}", row[i]))?,
            )),
        }
    }
}

fn write_figure(dir: &Path, t: &Table) -> anyhow::Result<PathBuf> {
    let path = dir.join(format!("{}.csv", t.name));
    std::fs::write(&path, t.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_svg(dir: &Path, name: &str, doc: String) -> anyhow::Result<PathBuf> {
    let path = dir.join(format!("{name}.svg"));
    std::fs::write(&path, doc).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Counts of label-instance confidences in fixed-width bins over [0, 1];
/// the top bin is closed.
pub fn histogram(confs: &[f64], width: f64) -> Vec<(f64, f64, usize)> {
    let bins = (1.0 / width).round() as usize;
    let mut counts = vec![0usize; bins];
    for &c in confs {
        let i = ((c / width + 1e-9).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, n)| (i as f64 * width, ((i + 1) as f64 * width).min(1.0), n))
        .collect()
}

pub fn run(flags: &Flags, args: &ReportArgs) -> anyhow::Result<()> {
    let run_dir = args.run.clone().unwrap_or_else(|| flags.out.clone());
    let corpus_path = run_dir.join(CORPUS_FILE);
    let corpus = load_corpus(&corpus_path)?;
    let divergence = Sheet::read(&run_dir.join(DIVERGENCE_FILE), "profile")?;
    let distributions = Sheet::read(&run_dir.join(DISTRIBUTIONS_FILE), "profile")?;
    let coordinates = Sheet::read(&run_dir.join(COORDINATES_FILE), "spectral")?;
    let cfg = flags.run_config(
        "report",
        [
            CORPUS_FILE,
            DIVERGENCE_FILE,
            DISTRIBUTIONS_FILE,
            COORDINATES_FILE,
        ]
        .iter()
        .map(|f| run_dir.join(f))
        .collect(),
    );
    let out = flags.out.join(FIGURES_DIR);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let confs: Vec<f64> = corpus
        .verses
        .iter()
        .flat_map(|v| {
            v.labels
                .iter()
                .filter_map(|c| v.confidences.get(c).copied())
        })
        .collect();
    let bins = histogram(&confs, HISTOGRAM_BIN);
    let mut hist = Table::new("confidence_histogram", &["bin_lo", "bin_hi", "count"]);
    for &(lo, hi, n) in &bins {
        hist.push(vec![lo.into(), hi.into(), n.into()]);
    }

    let stats = corpus_stats(&corpus);
    let mut abst = Table::new(
        "abstention_by_poet",
        &["poet", "verses", "abstained", "abstain_rate"],
    );
    for p in &stats.per_poet {
        abst.push(vec![
            p.poet.clone().into(),
            p.verses.into(),
            p.abstained.into(),
            p.abstain_rate.into(),
        ]);
    }

    let mut div = Table::new("divergence_by_poet", &["rank", "poet", "d_js"]);
    let mut js_of = HashMap::new();
    for row in &divergence.rows {
        let poet = divergence.text(row, "poet")?;
        let js = divergence.num(row, "js")?;
        div.push(vec![
            divergence.text(row, "rank")?.into(),
            poet.clone().into(),
            js.into(),
        ]);
        js_of.insert(poet, js);
    }

    let mut scatter = Table::new("abstention_vs_js", &["poet", "abstain_rate", "d_js"]);
    for p in &stats.per_poet {
        scatter.push(vec![
            p.poet.clone().into(),
            p.abstain_rate.into(),
            js_of.get(&p.poet).copied().flatten().into(),
        ]);
    }

    let mut heat = table("poet_concept_heatmap", &distributions.header);
    for row in &distributions.rows {
        heat.push(row.iter().map(|s| Cell::from(s.as_str())).collect());
    }

    let mut em = Table::new(
        "em2_em3_scatter",
        &["poet", "em2", "em3", "verse_count", "d_js"],
    );
    for row in &coordinates.rows {
        em.push(vec![
            coordinates.text(row, "poet")?.into(),
            coordinates.num(row, "EM2")?.into(),
            coordinates.num(row, "EM3")?.into(),
            coordinates.text(row, "verse_count")?.into(),
            coordinates.num(row, "d_js")?.into(),
        ]);
    }

    let tables = [hist, abst, div, scatter, heat, em];
    let mut written = Vec::new();
    for t in &tables {
        written.push(write_figure(&out, t)?);
    }

    if args.svg {
        let num = |c: &Cell| match c {
            Cell::Num(x) => *x,
            Cell::Int(n) => *n as f64,
            Cell::Text(s) => s.parse().unwrap_or(f64::NAN),
            Cell::Missing => f64::NAN,
        };
        let label = |c: &Cell| match c {
            Cell::Text(s) => s.clone(),
            other => format!("{other:?}"),
        };
        let [hist, abst, div, scatter, _, em] = &tables;
        let mid: Vec<(f64, f64)> = bins
            .iter()
            .map(|&(lo, hi, n)| ((lo + hi) / 2.0, n as f64))
            .collect();
        written.push(write_svg(
            &out,
            &hist.name,
            svg::line("Label confidence", "confidence", "count", &mid),
        )?);
        let bars = |t: &Table, v: usize| {
            t.rows
                .iter()
                .map(|r| (label(&r[0]), num(&r[v])))
                .collect::<Vec<_>>()
        };
        written.push(write_svg(
            &out,
            &abst.name,
            svg::bars("Abstention rate", "abstain_rate", &bars(abst, 3)),
        )?);
        let ranked: Vec<(String, f64)> = div
            .rows
            .iter()
            .map(|r| (label(&r[1]), num(&r[2])))
            .collect();
        written.push(write_svg(
            &out,
            &div.name,
            svg::bars("Divergence from baseline", "D_JS", &ranked),
        )?);
        let points = |t: &Table| {
            t.rows
                .iter()
                .map(|r| (label(&r[0]), num(&r[1]), num(&r[2])))
                .collect::<Vec<_>>()
        };
        written.push(write_svg(
            &out,
            &scatter.name,
            svg::scatter(
                "Abstention vs divergence",
                "abstain_rate",
                "D_JS",
                &points(scatter),
            ),
        )?);
        written.push(write_svg(
            &out,
            &em.name,
            svg::scatter("Poets on EM2 and EM3", "EM2", "EM3", &points(em)),
        )?);
    }

    cfg.write()?;
    report_written("report", &out, written.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_covers_unit_interval() {
        let bins = histogram(&[0.0, 0.3, 0.95, 1.0, 0.049999], HISTOGRAM_BIN);
        assert_eq!(bins.len(), 20);
        assert_eq!(bins[0], (0.0, 0.05, 2));
        let at = |x: f64| bins.iter().find(|b| (b.0 - x).abs() < 1e-9).unwrap().2;
        assert_eq!(at(0.3), 1);
        assert_eq!(at(0.95), 2);
        assert_eq!(bins.last().unwrap().1, 1.0);
    }
}
