//! Poet × Concept mass and the smoothed distributions derived from it.

use serde::{Deserialize, Serialize};

use crate::concept::{Category, Concept};
use crate::error::{Error, Result};
use crate::ingest::{AnnotatedVerse, Corpus};

/// Additive smoothing constant. Fixed so runs stay comparable.
pub const EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    #[default]
    Confidence,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightPolicy {
    pub kind: WeightKind,
    /// Keep only instances with `p >= threshold`.
    pub threshold: Option<f64>,
}

impl WeightPolicy {
    pub const fn confidence() -> Self {
        WeightPolicy {
            kind: WeightKind::Confidence,
            threshold: None,
        }
    }

    pub const fn uniform() -> Self {
        WeightPolicy {
            kind: WeightKind::Uniform,
            threshold: None,
        }
    }

    pub fn with_threshold(self, tau: f64) -> Self {
        WeightPolicy {
            threshold: Some(tau),
            ..self
        }
    }

    pub fn retains(&self, p: f64) -> bool {
        self.threshold.is_none_or(|tau| p >= tau)
    }

    pub fn weight(&self, p: f64) -> f64 {
        match self.kind {
            WeightKind::Confidence => p,
            WeightKind::Uniform => 1.0,
        }
    }

    /// `(concept, confidence, weight)` for every retained label instance of a
    /// non-abstained verse, in ontology order.
    pub fn instances<'a>(
        &'a self,
        v: &'a AnnotatedVerse,
    ) -> impl Iterator<Item = (Concept, f64, f64)> + 'a {
        v.confidences
            .iter()
            .filter(move |_| !v.abstain)
            .filter(move |(_, &p)| self.retains(p))
            .map(move |(&c, &p)| (c, p, self.weight(p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoetConceptMatrix {
    pub poets: Vec<String>,
    pub categories: Vec<Category>,
    /// Row per poet, column per category.
    pub mass: Vec<Vec<f64>>,
}

impl PoetConceptMatrix {
    pub fn row(&self, poet: &str) -> Option<&[f64]> {
        self.poets
            .iter()
            .position(|p| p == poet)
            .map(|i| self.mass[i].as_slice())
    }

    pub fn column_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.categories.len()];
        for row in &self.mass {
            for (t, x) in totals.iter_mut().zip(row) {
                *t += x;
            }
        }
        totals
    }

    pub fn distributions(&self) -> Vec<ConceptDistribution> {
        self.mass
            .iter()
            .map(|row| to_distribution(&self.categories, row))
            .collect()
    }
}

/// Confidence-weighted (or unit) concept mass per poet, abstained verses excluded.
pub fn poet_concept_mass(corpus: &Corpus, policy: &WeightPolicy) -> PoetConceptMatrix {
    accumulate(corpus, policy, false)
}

/// Same as [`poet_concept_mass`] over the ontology plus ABSTAIN; each
/// abstained verse adds exactly 1.0 to its poet's ABSTAIN column.
pub fn augment_with_abstain(corpus: &Corpus, policy: &WeightPolicy) -> PoetConceptMatrix {
    accumulate(corpus, policy, true)
}

fn accumulate(corpus: &Corpus, policy: &WeightPolicy, with_abstain: bool) -> PoetConceptMatrix {
    let categories = if with_abstain {
        Category::augmented()
    } else {
        Category::ontology()
    };
    let mut mass = vec![vec![0.0; categories.len()]; corpus.poets.len()];
    let mut current: Option<(&str, usize)> = None;
    for v in &corpus.verses {
        let i = match current {
            Some((p, i)) if p == v.poet => i,
            _ => {
                let i = corpus
                    .poet_index(&v.poet)
                    .expect("every verse poet is listed in the corpus");
                current = Some((&v.poet, i));
                i
            }
        };
        if v.abstain {
            if with_abstain {
                mass[i][Concept::COUNT] += 1.0;
            }
            continue;
        }
        for (c, _, w) in policy.instances(v) {
            mass[i][c.index()] += w;
        }
    }
    PoetConceptMatrix {
        poets: corpus.poets.clone(),
        categories,
        mass,
    }
}

/// Strictly positive, unit-sum distribution over a category list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDistribution {
    pub categories: Vec<Category>,
    pub probs: Vec<f64>,
}

impl ConceptDistribution {
    pub fn get(&self, cat: impl Into<Category>) -> Option<f64> {
        let cat = cat.into();
        self.categories
            .iter()
            .position(|c| *c == cat)
            .map(|i| self.probs[i])
    }

    pub fn ensure_same_support(&self, other: &ConceptDistribution) -> Result<()> {
        if self.categories == other.categories {
            Ok(())
        } else {
            Err(Error::ConceptSetMismatch {
                left: join_categories(&self.categories),
                right: join_categories(&other.categories),
            })
        }
    }

    /// Categories sorted by descending share.
    pub fn top(&self, n: usize) -> Vec<(Category, f64)> {
        let mut pairs: Vec<_> = self
            .categories
            .iter()
            .copied()
            .zip(self.probs.iter().copied())
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        pairs.truncate(n);
        pairs
    }
}

fn join_categories(cats: &[Category]) -> String {
    cats.iter()
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join("|")
}

/// `P(c) = (X_c + ε) / Σ (X_c' + ε)`.
pub fn to_distribution(categories: &[Category], row: &[f64]) -> ConceptDistribution {
    assert_eq!(
        categories.len(),
        row.len(),
        "row length must match categories"
    );
    let smoothed: Vec<f64> = row.iter().map(|x| x + EPSILON).collect();
    let total: f64 = smoothed.iter().sum();
    ConceptDistribution {
        categories: categories.to_vec(),
        probs: smoothed.iter().map(|x| x / total).collect(),
    }
}

/// Pooled distribution with ε added per poet cell.
pub fn global_baseline(matrix: &PoetConceptMatrix) -> Result<ConceptDistribution> {
    if matrix.poets.is_empty() {
        return Err(Error::InvalidInput(
            "baseline needs at least one poet".into(),
        ));
    }
    let k = matrix.categories.len();
    let mut pooled = vec![0.0; k];
    for row in &matrix.mass {
        for (acc, x) in pooled.iter_mut().zip(row) {
            *acc += x + EPSILON;
        }
    }
    let total: f64 = pooled.iter().sum();
    Ok(ConceptDistribution {
        categories: matrix.categories.clone(),
        probs: pooled.iter().map(|x| x / total).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftProfile {
    pub categories: Vec<Category>,
    pub delta: Vec<f64>,
}

impl LiftProfile {
    /// Largest positive lifts, descending.
    pub fn positive(&self, n: usize) -> Vec<(Category, f64)> {
        let mut pairs: Vec<_> = self.pairs().filter(|p| p.1 > 0.0).collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        pairs.truncate(n);
        pairs
    }

    /// Most negative lifts, ascending.
    pub fn negative(&self, n: usize) -> Vec<(Category, f64)> {
        let mut pairs: Vec<_> = self.pairs().filter(|p| p.1 < 0.0).collect();
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        pairs.truncate(n);
        pairs
    }

    fn pairs(&self) -> impl Iterator<Item = (Category, f64)> + '_ {
        self.categories
            .iter()
            .copied()
            .zip(self.delta.iter().copied())
    }
}

pub fn concept_lift(
    poet: &ConceptDistribution,
    baseline: &ConceptDistribution,
) -> Result<LiftProfile> {
    poet.ensure_same_support(baseline)?;
    Ok(LiftProfile {
        categories: poet.categories.clone(),
        delta: poet
            .probs
            .iter()
            .zip(&baseline.probs)
            .map(|(p, q)| p - q)
            .collect(),
    })
}
