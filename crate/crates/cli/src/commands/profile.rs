use eigenmood::aggregate::augment_with_abstain;
use eigenmood::ingest::corpus_stats;
use eigenmood::stats::{
    bootstrap_poet, divergence_table, pearson_r, spearman_rho, BootstrapConfig, BootstrapFrame,
    BootstrapStatistic, BootstrapSummary, DivergenceReport,
};
use eigenmood::table::{Cell, Table};
use eigenmood::{concept_lift, poet_concept_mass, Corpus, Error, WeightPolicy};

use super::{header_with, load_corpus, report_written, table, write_all};
use crate::args::{CorpusArgs, Flags};

pub const DIVERGENCE_FILE: &str = "divergence.csv";
pub const DISTRIBUTIONS_FILE: &str = "poet_distributions.csv";
const TOP_LIFTS: usize = 3;
const ROBUSTNESS_TAUS: [f64; 2] = [0.5, 0.7];

/// Poets ordered by descending JS divergence, ties by name.
pub fn ranked(reports: &[DivergenceReport]) -> Vec<&DivergenceReport> {
    let mut r: Vec<&DivergenceReport> = reports.iter().collect();
    r.sort_by(|a, b| b.js.total_cmp(&a.js).then_with(|| a.poet.cmp(&b.poet)));
    r
}

fn js_of(corpus: &Corpus, policy: &WeightPolicy) -> anyhow::Result<Vec<f64>> {
    let (_, reports) = divergence_table(&poet_concept_mass(corpus, policy))?;
    Ok(reports.iter().map(|r| r.js).collect())
}

pub fn run(flags: &Flags, args: &CorpusArgs) -> anyhow::Result<()> {
    let path = flags.corpus_path(&args.corpus);
    let corpus = load_corpus(&path)?;
    let cfg = flags.run_config("profile", vec![path]);
    let policy = cfg.policy();
    let mut tables = Vec::new();

    let matrix = poet_concept_mass(&corpus, &policy);
    let (baseline, reports) = divergence_table(&matrix)?;
    let distributions = matrix.distributions();
    let cats = &matrix.categories;

    let mut mass =
        table("poet_concept_mass", &header_with(&["poet"], cats)).with_display_decimals(3);
    let mut dist = table("poet_distributions", &header_with(&["poet"], cats));
    for ((poet, row), d) in matrix.poets.iter().zip(&matrix.mass).zip(&distributions) {
        let mut r: Vec<Cell> = vec![poet.clone().into()];
        r.extend(row.iter().map(|&x| Cell::from(x)));
        mass.push(r);
        let mut r: Vec<Cell> = vec![poet.clone().into()];
        r.extend(d.probs.iter().map(|&x| Cell::from(x)));
        dist.push(r);
    }
    tables.push(mass);
    tables.push(dist);

    // Global shares under the chosen policy and under the robustness thresholds.
    let mut global_header = vec!["concept", "mass", "share"];
    let tau_names: Vec<String> = ROBUSTNESS_TAUS
        .iter()
        .map(|t| format!("share_tau_{t}"))
        .collect();
    global_header.extend(tau_names.iter().map(String::as_str));
    let mut global = Table::new("global_distribution", &global_header);
    let totals = matrix.column_totals();
    let tau_baselines = ROBUSTNESS_TAUS
        .iter()
        .map(|&t| {
            divergence_table(&poet_concept_mass(&corpus, &policy.with_threshold(t))).map(|x| x.0)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    for (i, c) in cats.iter().enumerate() {
        let mut r: Vec<Cell> = vec![
            c.as_str().into(),
            totals[i].into(),
            baseline.probs[i].into(),
        ];
        r.extend(tau_baselines.iter().map(|b| Cell::from(b.probs[i])));
        global.push(r);
    }
    tables.push(global);

    let mut lifts = Table::new(
        "concept_lifts",
        &["poet", "direction", "rank", "concept", "lift"],
    );
    for (poet, d) in matrix.poets.iter().zip(&distributions) {
        let lift = concept_lift(d, &baseline)?;
        for (direction, picks) in [
            ("positive", lift.positive(TOP_LIFTS)),
            ("negative", lift.negative(TOP_LIFTS)),
        ] {
            for (rank, (c, delta)) in picks.into_iter().enumerate() {
                lifts.push(vec![
                    poet.clone().into(),
                    direction.into(),
                    (rank + 1).into(),
                    c.as_str().into(),
                    delta.into(),
                ]);
            }
        }
    }
    tables.push(lifts);

    let stats = corpus_stats(&corpus);
    let mut div = Table::new(
        "divergence",
        &[
            "rank",
            "poet",
            "verses",
            "abstained",
            "abstain_rate",
            "kl",
            "js",
            "cosine_distance",
        ],
    );
    for (rank, r) in ranked(&reports).into_iter().enumerate() {
        let s = &stats.per_poet[corpus.poet_index(&r.poet).expect("known poet")];
        div.push(vec![
            (rank + 1).into(),
            r.poet.clone().into(),
            s.verses.into(),
            s.abstained.into(),
            s.abstain_rate.into(),
            r.kl.into(),
            r.js.into(),
            r.cosine_distance.into(),
        ]);
    }
    tables.push(div);

    // Robustness: thresholds, weighting ablation and abstention as a category.
    let base_js: Vec<f64> = reports.iter().map(|r| r.js).collect();
    let mut variants: Vec<(String, Vec<f64>)> = Vec::new();
    for &t in &ROBUSTNESS_TAUS {
        variants.push((
            format!("tau_{t}"),
            js_of(&corpus, &policy.with_threshold(t))?,
        ));
    }
    let other_weight = WeightPolicy {
        kind: match policy.kind {
            eigenmood::WeightKind::Confidence => eigenmood::WeightKind::Uniform,
            eigenmood::WeightKind::Uniform => eigenmood::WeightKind::Confidence,
        },
        ..policy
    };
    let weight_name = match other_weight.kind {
        eigenmood::WeightKind::Uniform => "uniform",
        eigenmood::WeightKind::Confidence => "confidence",
    };
    variants.push((weight_name.to_string(), js_of(&corpus, &other_weight)?));
    let augmented = augment_with_abstain(&corpus, &policy);
    let (aug_baseline, aug_reports) = divergence_table(&augmented)?;
    variants.push((
        "augmented".to_string(),
        aug_reports.iter().map(|r| r.js).collect(),
    ));

    let mut header = vec!["poet".to_string(), "js_base".to_string()];
    header.extend(variants.iter().map(|(n, _)| format!("js_{n}")));
    let mut robust = table("divergence_robustness", &header);
    for (i, poet) in matrix.poets.iter().enumerate() {
        let mut r: Vec<Cell> = vec![poet.clone().into(), base_js[i].into()];
        r.extend(variants.iter().map(|(_, v)| Cell::from(v[i])));
        robust.push(r);
    }
    tables.push(robust);

    let mut ranks = Table::new(
        "rank_stability",
        &["comparison", "poets", "rho", "p_value", "exact_p"],
    );
    for (name, v) in &variants {
        let row = match spearman_rho(&base_js, v) {
            Ok(rc) => vec![
                format!("base_vs_{name}").into(),
                base_js.len().into(),
                rc.rho.into(),
                rc.p_value.into(),
                rc.exact.into(),
            ],
            Err(_) => vec![
                format!("base_vs_{name}").into(),
                base_js.len().into(),
                Cell::Missing,
                Cell::Missing,
                Cell::Missing,
            ],
        };
        ranks.push(row);
    }
    tables.push(ranks);

    let rates: Vec<f64> = stats.per_poet.iter().map(|p| p.abstain_rate).collect();
    let mut corr = Table::new(
        "abstention_divergence",
        &[
            "poets", "r", "t_stat", "df", "p_value", "ci95_lo", "ci95_hi",
        ],
    );
    match pearson_r(&rates, &base_js) {
        Ok(lc) => corr.push(vec![
            rates.len().into(),
            lc.r.into(),
            lc.t_stat.into(),
            lc.df.into(),
            lc.p_value.into(),
            lc.ci95.0.into(),
            lc.ci95.1.into(),
        ]),
        Err(_) => corr.push(
            std::iter::once(Cell::from(rates.len()))
                .chain(std::iter::repeat_n(Cell::Missing, 6))
                .collect(),
        ),
    }
    tables.push(corr);

    let mut aug = table(
        "augmented_distributions",
        &header_with(&["poet"], &augmented.categories),
    );
    for (poet, d) in augmented.poets.iter().zip(augmented.distributions()) {
        let mut r: Vec<Cell> = vec![poet.clone().into()];
        r.extend(d.probs.iter().map(|&x| Cell::from(x)));
        aug.push(r);
    }
    let mut r: Vec<Cell> = vec!["BASELINE".into()];
    r.extend(aug_baseline.probs.iter().map(|&x| Cell::from(x)));
    aug.push(r);
    tables.push(aug);

    let mut aug_div = Table::new("augmented_divergence", &["rank", "poet", "js"]);
    for (rank, r) in ranked(&aug_reports).into_iter().enumerate() {
        aug_div.push(vec![(rank + 1).into(), r.poet.clone().into(), r.js.into()]);
    }
    tables.push(aug_div);

    let mut boot = Table::new("bootstrap_js", &BootstrapSummary::CSV_HEADER);
    let frame = BootstrapFrame {
        baseline: &baseline,
        basis: None,
    };
    let mut bcfg = BootstrapConfig::new(BootstrapStatistic::Js, cfg.replicates, cfg.seed);
    bcfg.policy = policy;
    for poet in &corpus.poets {
        match bootstrap_poet(&corpus, poet, &bcfg, &frame) {
            Ok(s) => boot.push(super::bootstrap_cells(&s)),
            Err(Error::NoEvidence(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    tables.push(boot);

    let written = write_all(&flags.out, &tables)?;
    cfg.write()?;
    report_written("profile", &flags.out, written.len() + 1);
    Ok(())
}
