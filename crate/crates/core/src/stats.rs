//! Divergences, correlations and the per-poet bootstrap.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::aggregate::{
    global_baseline, to_distribution, ConceptDistribution, PoetConceptMatrix, WeightPolicy,
};
use crate::concept::{Category, Concept};
use crate::error::{Error, Result};
use crate::ingest::{AnnotatedVerse, Corpus};
use crate::spectral::SpectralModel;

/// `Σ p ln(p/q)` in nats over raw slices. Zero-probability terms of `p` vanish.
pub fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

pub fn js_slices(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl_slices(p, &m) + 0.5 * kl_slices(q, &m)
}

pub fn cosine_slices(p: &[f64], q: &[f64]) -> f64 {
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    1.0 - dot / (np * nq)
}

pub fn kl_divergence(p: &ConceptDistribution, q: &ConceptDistribution) -> Result<f64> {
    p.ensure_same_support(q)?;
    Ok(kl_slices(&p.probs, &q.probs))
}

pub fn js_divergence(p: &ConceptDistribution, q: &ConceptDistribution) -> Result<f64> {
    p.ensure_same_support(q)?;
    Ok(js_slices(&p.probs, &q.probs))
}

pub fn cosine_distance(p: &ConceptDistribution, q: &ConceptDistribution) -> Result<f64> {
    p.ensure_same_support(q)?;
    Ok(cosine_slices(&p.probs, &q.probs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub poet: String,
    pub kl: f64,
    pub js: f64,
    pub cosine_distance: f64,
}

pub fn divergence_report(
    poet: &str,
    p: &ConceptDistribution,
    baseline: &ConceptDistribution,
) -> Result<DivergenceReport> {
    Ok(DivergenceReport {
        poet: poet.to_string(),
        kl: kl_divergence(p, baseline)?,
        js: js_divergence(p, baseline)?,
        cosine_distance: cosine_distance(p, baseline)?,
    })
}

/// Baseline of `matrix` and every poet's divergence from it, in poet order.
pub fn divergence_table(
    matrix: &PoetConceptMatrix,
) -> Result<(ConceptDistribution, Vec<DivergenceReport>)> {
    let baseline = global_baseline(matrix)?;
    let reports = matrix
        .poets
        .iter()
        .zip(matrix.distributions())
        .map(|(poet, p)| divergence_report(poet, &p, &baseline))
        .collect::<Result<Vec<_>>>()?;
    Ok((baseline, reports))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub p_value: f64,
    /// True when the p-value came from exhaustive permutation.
    pub exact: bool,
}

/// Below this length the p-value is an exact permutation test.
pub const SPEARMAN_EXACT_BELOW: usize = 10;

pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<RankCorrelation> {
    check_pair(xs, ys)?;
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let rho = pearson_coefficient(&rx, &ry)
        .ok_or_else(|| Error::Degenerate("constant ranks in spearman_rho".into()))?;
    let n = xs.len();
    if n < SPEARMAN_EXACT_BELOW {
        let p_value = permutation_p_value(&rx, &ry, rho);
        Ok(RankCorrelation {
            rho,
            p_value,
            exact: true,
        })
    } else {
        let (_, p_value) = t_test(rho, n);
        Ok(RankCorrelation {
            rho,
            p_value,
            exact: false,
        })
    }
}

fn permutation_p_value(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    // Heap's algorithm over every ordering of ry.
    let n = ry.len();
    let mut perm = ry.to_vec();
    let mut c = vec![0usize; n];
    let mut total = 0u64;
    let mut extreme = 0u64;
    let target = rho.abs() - 1e-12;
    let mut visit = |perm: &[f64]| {
        total += 1;
        if pearson_coefficient(rx, perm).unwrap_or(0.0).abs() >= target {
            extreme += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    extreme as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearCorrelation {
    pub r: f64,
    pub t_stat: f64,
    pub df: usize,
    pub p_value: f64,
    /// Fisher-z interval.
    pub ci95: (f64, f64),
}

pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<LinearCorrelation> {
    check_pair(xs, ys)?;
    let r = pearson_coefficient(xs, ys)
        .ok_or_else(|| Error::Degenerate("zero variance in pearson_r".into()))?;
    Ok(linear_correlation_from_r(r, xs.len()))
}

/// t statistic, two-sided p-value and Fisher-z CI for a sample correlation.
pub fn linear_correlation_from_r(r: f64, n: usize) -> LinearCorrelation {
    let (t_stat, p_value) = t_test(r, n);
    LinearCorrelation {
        r,
        t_stat,
        df: n - 2,
        p_value,
        ci95: fisher_ci95(r, n),
    }
}

fn t_test(r: f64, n: usize) -> (f64, f64) {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return (f64::INFINITY.copysign(r), 0.0);
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (t, 2.0 * (1.0 - dist.cdf(t.abs())))
}

pub fn fisher_ci95(r: f64, n: usize) -> (f64, f64) {
    if r.abs() >= 1.0 || n <= 3 {
        return (r.min(1.0).max(-1.0), r.min(1.0).max(-1.0));
    }
    let z = r.atanh();
    let crit = Normal::standard().inverse_cdf(0.975);
    let half = crit / ((n - 3) as f64).sqrt();
    ((z - half).tanh(), (z + half).tanh())
}

fn pearson_coefficient(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput(
            "correlation needs at least 3 points".into(),
        ));
    }
    Ok(())
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BootstrapStatistic {
    /// JS divergence from the fixed baseline.
    Js,
    /// Eigenmood coordinate on the given axis of the fixed basis.
    Eigenmood(usize),
}

impl BootstrapStatistic {
    pub fn name(self) -> String {
        match self {
            BootstrapStatistic::Js => "D_JS".into(),
            BootstrapStatistic::Eigenmood(k) => format!("EM{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub statistic: BootstrapStatistic,
    pub replicates: usize,
    pub seed: u64,
    pub policy: WeightPolicy,
    pub parallel: bool,
}

impl BootstrapConfig {
    pub fn new(statistic: BootstrapStatistic, replicates: usize, seed: u64) -> Self {
        BootstrapConfig {
            statistic,
            replicates,
            seed,
            policy: WeightPolicy::confidence(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub poet: String,
    pub replicates: usize,
    pub statistic: String,
    pub point: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl BootstrapSummary {
    pub const CSV_HEADER: [&'static str; 8] = [
        "poet",
        "statistic",
        "replicates",
        "seed",
        "point",
        "mean",
        "lo",
        "hi",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        use crate::table::sig;
        vec![
            self.poet.clone(),
            self.statistic.clone(),
            self.replicates.to_string(),
            self.seed.to_string(),
            sig(self.point),
            sig(self.mean),
            sig(self.lo),
            sig(self.hi),
        ]
    }
}

/// Source of with-replacement index draws for each replicate.
pub trait ResampleSource: Sync {
    fn draw(&self, replicate: usize, n: usize) -> Vec<usize>;
}

/// Xoshiro256++ substream per replicate, keyed by `(seed, replicate)`, so
/// serial and parallel runs agree exactly.
#[derive(Debug, Clone, Copy)]
pub struct SeededResampler {
    pub seed: u64,
}

impl SeededResampler {
    fn stream(&self, replicate: usize) -> Xoshiro256PlusPlus {
        let key = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
            ^ (replicate as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
        Xoshiro256PlusPlus::seed_from_u64(key)
    }
}

impl ResampleSource for SeededResampler {
    fn draw(&self, replicate: usize, n: usize) -> Vec<usize> {
        let mut rng = self.stream(replicate);
        (0..n).map(|_| rng.random_range(0..n)).collect()
    }
}

/// The fixed reference frame a bootstrap is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapFrame<'a> {
    pub baseline: &'a ConceptDistribution,
    pub basis: Option<&'a SpectralModel>,
}

/// Statistic of a poet whose verses are exactly `verses` (abstained ones
/// contribute nothing).
pub fn poet_statistic(
    verses: &[&AnnotatedVerse],
    statistic: BootstrapStatistic,
    policy: &WeightPolicy,
    frame: &BootstrapFrame<'_>,
) -> Result<f64> {
    let mut row = vec![0.0; Concept::COUNT];
    for v in verses {
        for (c, _, w) in policy.instances(v) {
            row[c.index()] += w;
        }
    }
    let p = to_distribution(&Category::ontology(), &row);
    match statistic {
        BootstrapStatistic::Js => js_divergence(&p, frame.baseline),
        BootstrapStatistic::Eigenmood(k) => {
            let model = frame
                .basis
                .ok_or_else(|| Error::InvalidInput("Eigenmood bootstrap needs a basis".into()))?;
            if k == 0 {
                return Err(Error::InvalidAxis {
                    axis: k,
                    size: model.mode_count(),
                });
            }
            model.project_centered(&p, frame.baseline, k)
        }
    }
}

/// Resamples the poet's non-abstained verses and summarizes the statistic.
pub fn bootstrap_poet(
    corpus: &Corpus,
    poet: &str,
    config: &BootstrapConfig,
    frame: &BootstrapFrame<'_>,
) -> Result<BootstrapSummary> {
    let source = SeededResampler { seed: config.seed };
    Ok(bootstrap_poet_with(corpus, poet, config, frame, &source)?.0)
}

/// As [`bootstrap_poet`] with an explicit draw source; also returns the
/// replicate values in replicate order.
pub fn bootstrap_poet_with(
    corpus: &Corpus,
    poet: &str,
    config: &BootstrapConfig,
    frame: &BootstrapFrame<'_>,
    source: &dyn ResampleSource,
) -> Result<(BootstrapSummary, Vec<f64>)> {
    if corpus.poet_index(poet).is_none() {
        return Err(Error::UnknownPoet(poet.to_string()));
    }
    if config.replicates == 0 {
        return Err(Error::InvalidInput(
            "bootstrap needs at least one replicate".into(),
        ));
    }
    let evidence: Vec<&AnnotatedVerse> = corpus.verses_of(poet).filter(|v| !v.abstain).collect();
    if evidence.is_empty() {
        return Err(Error::NoEvidence(poet.to_string()));
    }
    let point = poet_statistic(&evidence, config.statistic, &config.policy, frame)?;
    let replicate = |r: usize| -> Result<f64> {
        let picks: Vec<&AnnotatedVerse> = source
            .draw(r, evidence.len())
            .into_iter()
            .map(|i| evidence[i])
            .collect();
        poet_statistic(&picks, config.statistic, &config.policy, frame)
    };
    let values: Vec<f64> = if config.parallel {
        (0..config.replicates)
            .into_par_iter()
            .map(replicate)
            .collect::<Result<_>>()?
    } else {
        (0..config.replicates)
            .map(replicate)
            .collect::<Result<_>>()?
    };
    let (mean, lo, hi) = summarize(&values);
    Ok((
        BootstrapSummary {
            poet: poet.to_string(),
            replicates: config.replicates,
            statistic: config.statistic.name(),
            point,
            mean,
            lo,
            hi,
            seed: config.seed,
        },
        values,
    ))
}

/// Mean with 2.5th and 97.5th linear-interpolation percentiles.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, percentile(&sorted, 0.025), percentile(&sorted, 0.975))
}
