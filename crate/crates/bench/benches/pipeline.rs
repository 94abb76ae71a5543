use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use eigenmood::spectral::{build_cooccurrence, eigendecompose, laplacian};
use eigenmood::stats::{
    bootstrap_poet, divergence_table, BootstrapConfig, BootstrapFrame, BootstrapStatistic,
};
use eigenmood::{poet_concept_mass, Concept, LaplacianKind, WeightPolicy};
use eigenmood_bench::corpus;

fn aggregation(c: &mut Criterion) {
    let corpus = corpus(1, 10, 6000);
    let policy = WeightPolicy::confidence();
    c.bench_function("poet_concept_mass/60k", |b| {
        b.iter(|| poet_concept_mass(&corpus, &policy))
    });
    c.bench_function("cooccurrence/60k", |b| {
        b.iter(|| build_cooccurrence(&corpus, &Concept::ALL, &policy).unwrap())
    });
}

fn jacobi(c: &mut Criterion) {
    let corpus = corpus(2, 4, 2000);
    let graph = build_cooccurrence(&corpus, &Concept::ALL, &WeightPolicy::confidence()).unwrap();
    for kind in [
        LaplacianKind::Unnormalized,
        LaplacianKind::SymmetricNormalized,
    ] {
        let l = laplacian(&graph, kind);
        c.bench_function(&format!("jacobi/9x9/{kind:?}"), |b| {
            b.iter_batched(
                || l.clone(),
                |m| eigendecompose(&m).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn bootstrap(c: &mut Criterion) {
    let corpus = corpus(3, 3, 2000);
    let matrix = poet_concept_mass(&corpus, &WeightPolicy::confidence());
    let (baseline, _) = divergence_table(&matrix).unwrap();
    let frame = BootstrapFrame {
        baseline: &baseline,
        basis: None,
    };
    for parallel in [false, true] {
        let mut cfg = BootstrapConfig::new(BootstrapStatistic::Js, 200, 7);
        cfg.parallel = parallel;
        let name = if parallel { "parallel" } else { "serial" };
        c.bench_function(&format!("bootstrap_js/2k_verses/200/{name}"), |b| {
            b.iter(|| bootstrap_poet(&corpus, "Poet00", &cfg, &frame).unwrap())
        });
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = aggregation, jacobi, bootstrap
}
criterion_main!(benches);
