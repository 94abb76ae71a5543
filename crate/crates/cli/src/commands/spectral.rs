use eigenmood::ingest::corpus_stats;
use eigenmood::spectral::{
    build_cooccurrence, embed_poet, filter_concepts, match_modes, mean_contributing_confidence,
    retrieve_by_label, retrieve_extremes, Direction, VerseAxisScore,
};
use eigenmood::stats::{
    bootstrap_poet, divergence_table, BootstrapConfig, BootstrapFrame, BootstrapStatistic,
    BootstrapSummary,
};
use eigenmood::table::{Cell, Table};
use eigenmood::{
    poet_concept_mass, Concept, Corpus, Error, LaplacianKind, SpectralModel, WeightKind,
    WeightPolicy,
};

use super::{bootstrap_cells, load_corpus, report_written, table, write_all};
use crate::args::{CorpusArgs, Flags};

pub const COORDINATES_FILE: &str = "poet_coordinates.csv";
const TOP_LOADINGS: usize = 5;
/// Pool size for the weighting comparison of retrieved verses.
const CONFIDENCE_POOL: usize = 500;
const DIRECTIONS: [Direction; 3] = [
    Direction::Positive,
    Direction::Negative,
    Direction::Absolute,
];

fn fit(
    corpus: &Corpus,
    policy: &WeightPolicy,
    min_share: f64,
    kind: LaplacianKind,
) -> anyhow::Result<SpectralModel> {
    let (baseline, _) = divergence_table(&poet_concept_mass(corpus, policy))?;
    let concepts = filter_concepts(&baseline, min_share)?;
    let graph = build_cooccurrence(corpus, &concepts, policy)?;
    Ok(SpectralModel::fit(graph, kind)?)
}

fn retrieval_table(name: &str, scores: &[VerseAxisScore]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "rank",
            "verse_ref",
            "score",
            "mean_confidence",
            "contributions",
            "verse_text",
        ],
    );
    for (rank, s) in scores.iter().enumerate() {
        let contributions = s
            .contributions
            .iter()
            .map(|(c, p)| format!("{c}:{}", eigenmood::table::sig(*p)))
            .collect::<Vec<_>>()
            .join(";");
        t.push(vec![
            (rank + 1).into(),
            s.verse.to_string().into(),
            s.score.into(),
            mean_contributing_confidence(std::slice::from_ref(s)).into(),
            contributions.into(),
            s.verse_text.clone().into(),
        ]);
    }
    t
}

pub fn run(flags: &Flags, args: &CorpusArgs) -> anyhow::Result<()> {
    let path = flags.corpus_path(&args.corpus);
    let corpus = load_corpus(&path)?;
    let cfg = flags.run_config("spectral", vec![path]);
    let policy = cfg.policy();
    let mut tables = Vec::new();

    let matrix = poet_concept_mass(&corpus, &policy);
    let (baseline, reports) = divergence_table(&matrix)?;
    let concepts = filter_concepts(&baseline, cfg.min_share)?;
    let graph = build_cooccurrence(&corpus, &concepts, &policy)?;
    let model = SpectralModel::fit(graph, cfg.laplacian)?;
    let n = model.mode_count();
    if cfg.k_max >= n {
        return Err(Error::KMaxTooLarge {
            k_max: cfg.k_max,
            size: n,
        }
        .into());
    }

    let mut excluded = Table::new("excluded_concepts", &["concept", "baseline_share"]);
    for c in Concept::ALL.iter().filter(|c| !concepts.contains(c)) {
        excluded.push(vec![c.as_str().into(), baseline.get(*c).into()]);
    }
    tables.push(excluded);

    let mut edges = Table::new(
        "cooccurrence_edges",
        &["rank", "concept_a", "concept_b", "weight"],
    )
    .with_display_decimals(1);
    for (rank, e) in model.graph.edges().iter().enumerate() {
        edges.push(vec![
            (rank + 1).into(),
            e.a.as_str().into(),
            e.b.as_str().into(),
            e.weight.into(),
        ]);
    }
    tables.push(edges);

    let mut eig = Table::new("eigenvalues", &["mode", "eigenvalue"]).with_display_decimals(3);
    for (k, &v) in model.eigenvalues.iter().enumerate() {
        eig.push(vec![k.into(), v.into()]);
    }
    tables.push(eig);

    let mut header = vec!["concept".to_string()];
    header.extend((0..n).map(|k| format!("EM{k}")));
    let mut loadings = table("loadings", &header).with_display_decimals(3);
    for (i, c) in model.concepts().iter().enumerate() {
        let mut r: Vec<Cell> = vec![c.as_str().into()];
        r.extend((0..n).map(|k| Cell::from(model.eigenvectors[(i, k)])));
        loadings.push(r);
    }
    tables.push(loadings);

    let mut top = Table::new("top_loadings", &["mode", "rank", "concept", "loading"])
        .with_display_decimals(3);
    for k in 1..=cfg.k_max {
        for (rank, (c, l)) in model.top_loadings(k, TOP_LOADINGS).into_iter().enumerate() {
            top.push(vec![
                k.into(),
                (rank + 1).into(),
                c.as_str().into(),
                l.into(),
            ]);
        }
    }
    tables.push(top);

    let stats = corpus_stats(&corpus);
    let mut header = vec![
        "poet".to_string(),
        "verse_count".to_string(),
        "d_js".to_string(),
    ];
    header.extend((1..=cfg.k_max).map(|k| format!("EM{k}")));
    let mut coords = table("poet_coordinates", &header);
    for ((poet, p), report) in matrix
        .poets
        .iter()
        .zip(matrix.distributions())
        .zip(&reports)
    {
        let e = embed_poet(poet, &p, &baseline, &model, cfg.k_max)?;
        let verses = stats.per_poet[corpus.poet_index(poet).expect("known poet")].verses;
        let mut r: Vec<Cell> = vec![poet.clone().into(), verses.into(), report.js.into()];
        r.extend(e.coords.iter().map(|&z| Cell::from(z)));
        coords.push(r);
    }
    tables.push(coords);

    for k in 1..=cfg.k_max {
        for d in DIRECTIONS {
            let hits = retrieve_extremes(&corpus, &model, k, d, cfg.top_n, &policy)?;
            tables.push(retrieval_table(
                &format!("retrieval_em{k}_{}", d.as_str()),
                &hits,
            ));
        }
    }
    for c in &concepts {
        let mut t = Table::new(
            &format!("retrieval_label_{}", c.as_str()),
            &["rank", "verse_ref", "confidence", "verse_text"],
        );
        for (rank, h) in retrieve_by_label(&corpus, *c, cfg.top_n).iter().enumerate() {
            t.push(vec![
                (rank + 1).into(),
                h.verse.to_string().into(),
                h.confidence.into(),
                h.verse_text.clone().into(),
            ]);
        }
        tables.push(t);
    }

    // Contributing-label confidence of the most extreme verses, under the
    // chosen weighting and under the other one.
    let other = WeightPolicy {
        kind: match policy.kind {
            WeightKind::Confidence => WeightKind::Uniform,
            WeightKind::Uniform => WeightKind::Confidence,
        },
        ..policy
    };
    let other_model = fit(&corpus, &other, cfg.min_share, cfg.laplacian)?;
    let mut weighting = Table::new(
        "retrieval_confidence",
        &[
            "axis",
            "pool",
            "weighting",
            "mean_confidence",
            "other_weighting",
            "other_mean_confidence",
        ],
    )
    .with_display_decimals(3);
    let name = |k: WeightKind| match k {
        WeightKind::Confidence => "confidence",
        WeightKind::Uniform => "uniform",
    };
    for k in 1..=cfg.k_max.min(other_model.mode_count().saturating_sub(1)) {
        let mine = retrieve_extremes(
            &corpus,
            &model,
            k,
            Direction::Absolute,
            CONFIDENCE_POOL,
            &policy,
        )?;
        let theirs = retrieve_extremes(
            &corpus,
            &other_model,
            k,
            Direction::Absolute,
            CONFIDENCE_POOL,
            &other,
        )?;
        weighting.push(vec![
            k.into(),
            CONFIDENCE_POOL.into(),
            name(policy.kind).into(),
            mean_contributing_confidence(&mine).into(),
            name(other.kind).into(),
            mean_contributing_confidence(&theirs).into(),
        ]);
    }
    tables.push(weighting);

    // Sensitivity of the axes to the Laplacian normalization.
    let alt_kind = match cfg.laplacian {
        LaplacianKind::Unnormalized => LaplacianKind::SymmetricNormalized,
        LaplacianKind::SymmetricNormalized => LaplacianKind::Unnormalized,
    };
    let alt = SpectralModel::fit(model.graph.clone(), alt_kind)?;
    let mut sens = Table::new(
        "laplacian_sensitivity",
        &["axis", "matched_axis", "abs_correlation"],
    )
    .with_display_decimals(3);
    for m in match_modes(&model, &alt, cfg.k_max)? {
        sens.push(vec![
            m.axis.into(),
            m.matched_axis.into(),
            m.abs_correlation.into(),
        ]);
    }
    tables.push(sens);

    let mut boot = Table::new("bootstrap_eigenmood", &BootstrapSummary::CSV_HEADER);
    let frame = BootstrapFrame {
        baseline: &baseline,
        basis: Some(&model),
    };
    for k in 1..=cfg.k_max {
        let mut bcfg =
            BootstrapConfig::new(BootstrapStatistic::Eigenmood(k), cfg.replicates, cfg.seed);
        bcfg.policy = policy;
        for poet in &corpus.poets {
            match bootstrap_poet(&corpus, poet, &bcfg, &frame) {
                Ok(s) => boot.push(bootstrap_cells(&s)),
                Err(Error::NoEvidence(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
    tables.push(boot);

    let written = write_all(&flags.out, &tables)?;
    cfg.write()?;
    report_written("spectral", &flags.out, written.len() + 1);
    Ok(())
}
