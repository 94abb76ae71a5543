//! Concept co-occurrence graph, Laplacians and the Eigenmood embedding.
//!
//! Edges accumulate, over non-abstained verses, the mean confidence of every
//! pair of co-assigned concepts:
//!
//! ```text
//! W[c,d] = Σ_v (1 - a_v) · 1[c ∈ L_v] · 1[d ∈ L_v] · (p_vc + p_vd) / 2,   c ≠ d
//! ```
//!
//! The Laplacian eigenvectors (ascending eigenvalue, mode 0 trivial) give the
//! Eigenmood axes. A poet's coordinate on axis k is the projection of its
//! baseline-centered distribution, restricted to the graph's concepts, onto
//! `u_k`; a verse's score is the projection of its own confidence vector.
//!
//! The eigensolver is a cyclic Jacobi scheme. Graphs here have at most ten
//! nodes, so it is exact enough and fully deterministic.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aggregate::{ConceptDistribution, WeightPolicy};
use crate::concept::{Category, Concept};
use crate::error::{Error, Result};
use crate::ingest::{AnnotatedVerse, Corpus, VerseRef};

/// Baseline share below which a concept is left out of the graph.
pub const DEFAULT_MIN_SHARE: f64 = 1e-3;
pub const DEFAULT_K_MAX: usize = 3;

const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceGraph {
    pub concepts: Vec<Concept>,
    /// Symmetric, zero diagonal, non-negative.
    pub adjacency: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub a: Concept,
    pub b: Concept,
    pub weight: f64,
}

impl CooccurrenceGraph {
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn position(&self, c: Concept) -> Option<usize> {
        self.concepts.iter().position(|&x| x == c)
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.adjacency.row(i).sum())
            .collect()
    }

    /// Positive-weight edges, heaviest first.
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges = Vec::new();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let w = self.adjacency[(i, j)];
                if w > 0.0 {
                    edges.push(Edge {
                        a: self.concepts[i],
                        b: self.concepts[j],
                        weight: w,
                    });
                }
            }
        }
        edges.sort_by(|x, y| {
            y.weight
                .total_cmp(&x.weight)
                .then_with(|| (x.a, x.b).cmp(&(y.a, y.b)))
        });
        edges
    }
}

pub fn build_cooccurrence(
    corpus: &Corpus,
    concepts: &[Concept],
    policy: &WeightPolicy,
) -> Result<CooccurrenceGraph> {
    if concepts.is_empty() {
        return Err(Error::InvalidInput(
            "co-occurrence graph needs at least one concept".into(),
        ));
    }
    let n = concepts.len();
    let mut slot = [usize::MAX; Concept::COUNT];
    for (i, c) in concepts.iter().enumerate() {
        slot[c.index()] = i;
    }
    let mut w = DMatrix::<f64>::zeros(n, n);
    let mut active: Vec<(usize, f64)> = Vec::with_capacity(Concept::COUNT);
    for v in &corpus.verses {
        active.clear();
        active.extend(
            policy
                .instances(v)
                .filter(|(c, _, _)| slot[c.index()] != usize::MAX)
                .map(|(c, p, _)| (slot[c.index()], p)),
        );
        for (x, &(i, pi)) in active.iter().enumerate() {
            for &(j, pj) in &active[x + 1..] {
                let weight = match policy.kind {
                    crate::aggregate::WeightKind::Confidence => (pi + pj) / 2.0,
                    crate::aggregate::WeightKind::Uniform => 1.0,
                };
                w[(i, j)] += weight;
                w[(j, i)] += weight;
            }
        }
    }
    Ok(CooccurrenceGraph {
        concepts: concepts.to_vec(),
        adjacency: w,
    })
}

/// Concepts whose baseline share is at least `min_share`, in ontology order.
pub fn filter_concepts(baseline: &ConceptDistribution, min_share: f64) -> Result<Vec<Concept>> {
    let kept: Vec<Concept> = baseline
        .categories
        .iter()
        .zip(&baseline.probs)
        .filter_map(|(cat, &p)| match cat {
            Category::Concept(c) if p >= min_share => Some(*c),
            _ => None,
        })
        .collect();
    if kept.is_empty() {
        Err(Error::AllFiltered { min_share })
    } else {
        Ok(kept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `D - W`
    #[default]
    Unnormalized,
    /// `I - D^{-1/2} W D^{-1/2}`; isolated nodes keep an all-zero row and column.
    SymmetricNormalized,
}

pub fn laplacian(graph: &CooccurrenceGraph, kind: LaplacianKind) -> DMatrix<f64> {
    laplacian_of(&graph.adjacency, kind)
}

/// Laplacian of a symmetric, non-negative weight matrix; the diagonal of `w`
/// is ignored.
pub fn laplacian_of(w: &DMatrix<f64>, kind: LaplacianKind) -> DMatrix<f64> {
    let n = w.nrows();
    let deg: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum())
        .collect();
    match kind {
        LaplacianKind::Unnormalized => {
            DMatrix::from_fn(n, n, |i, j| if i == j { deg[i] } else { -w[(i, j)] })
        }
        LaplacianKind::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> = deg
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
                .collect();
            DMatrix::from_fn(n, n, |i, j| {
                if deg[i] == 0.0 || deg[j] == 0.0 {
                    0.0
                } else if i == j {
                    1.0
                } else {
                    -w[(i, j)] * inv_sqrt[i] * inv_sqrt[j]
                }
            })
        }
    }
}

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Each eigenvector is sign-canonicalized so its largest-magnitude entry is
/// non-negative, the lowest index winning ties.
pub fn eigendecompose(matrix: &DMatrix<f64>) -> Result<Eigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "matrix must be square, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    let scale = matrix.amax();
    let asymmetry = (matrix - matrix.transpose()).amax();
    if asymmetry > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let mut a = (matrix + matrix.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = a.norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOLERANCE * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if off_diagonal_norm(&a) > JACOBI_TOLERANCE * norm {
        return Err(Error::Degenerate(
            "Jacobi iteration did not converge".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut u = v.column(src).into_owned();
        let mut lead = 0;
        for k in 1..n {
            if u[k].abs() > u[lead].abs() + 1e-12 {
                lead = k;
            }
        }
        if n > 0 && u[lead] < 0.0 {
            u.neg_mut();
        }
        vectors.set_column(col, &u);
    }
    Ok(Eigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    pub graph: CooccurrenceGraph,
    pub laplacian_kind: LaplacianKind,
    pub laplacian: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Column k is `u_k`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralModel {
    pub fn fit(graph: CooccurrenceGraph, kind: LaplacianKind) -> Result<Self> {
        let l = laplacian(&graph, kind);
        let eig = eigendecompose(&l)?;
        Ok(SpectralModel {
            graph,
            laplacian_kind: kind,
            laplacian: l,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
        })
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.graph.concepts
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    pub fn loading(&self, k: usize, c: Concept) -> Option<f64> {
        self.graph.position(c).map(|i| self.eigenvectors[(i, k)])
    }

    /// Concepts on axis k ordered by descending |loading|.
    pub fn top_loadings(&self, k: usize, n: usize) -> Vec<(Concept, f64)> {
        let mut pairs: Vec<_> = self
            .concepts()
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, self.eigenvectors[(i, k)]))
            .collect();
        pairs.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        pairs.truncate(n);
        pairs
    }

    /// `Σ_c (P(c) - P0(c)) u_k(c)` over the graph's concepts, without
    /// renormalizing the restricted difference. Axis 0 is allowed here.
    pub fn project_centered(
        &self,
        p: &ConceptDistribution,
        baseline: &ConceptDistribution,
        axis: usize,
    ) -> Result<f64> {
        p.ensure_same_support(baseline)?;
        if axis >= self.mode_count() {
            return Err(Error::InvalidAxis {
                axis,
                size: self.mode_count(),
            });
        }
        let mut z = 0.0;
        for (i, &c) in self.concepts().iter().enumerate() {
            let (pi, p0) = p.get(c).zip(baseline.get(c)).ok_or_else(|| {
                Error::InvalidInput(format!("distribution lacks graph concept `{c}`"))
            })?;
            z += (pi - p0) * self.eigenvectors[(i, axis)];
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenmoodCoords {
    pub poet: String,
    /// `coords[k - 1]` is the coordinate on axis k.
    pub coords: Vec<f64>,
}

pub fn embed_poet(
    poet: &str,
    p: &ConceptDistribution,
    baseline: &ConceptDistribution,
    model: &SpectralModel,
    k_max: usize,
) -> Result<EigenmoodCoords> {
    if k_max >= model.mode_count() {
        return Err(Error::KMaxTooLarge {
            k_max,
            size: model.mode_count(),
        });
    }
    let coords = (1..=k_max)
        .map(|k| model.project_centered(p, baseline, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenmoodCoords {
        poet: poet.to_string(),
        coords,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerseAxisScore {
    pub verse: VerseRef,
    pub axis: usize,
    pub score: f64,
    /// Graph concepts that contributed, with their raw confidences.
    pub contributions: Vec<(Concept, f64)>,
    pub verse_text: String,
}

/// Confidence-weighted verse score on axis k.
pub fn score_verse(
    v: &AnnotatedVerse,
    model: &SpectralModel,
    axis: usize,
) -> Result<VerseAxisScore> {
    score_verse_with(v, model, axis, &WeightPolicy::confidence())
}

pub fn score_verse_with(
    v: &AnnotatedVerse,
    model: &SpectralModel,
    axis: usize,
    policy: &WeightPolicy,
) -> Result<VerseAxisScore> {
    if axis == 0 || axis >= model.mode_count() {
        return Err(Error::InvalidAxis {
            axis,
            size: model.mode_count(),
        });
    }
    let mut score = 0.0;
    let mut contributions = Vec::new();
    for (c, p, w) in policy.instances(v) {
        if let Some(i) = model.graph.position(c) {
            score += w * model.eigenvectors[(i, axis)];
            contributions.push((c, p));
        }
    }
    Ok(VerseAxisScore {
        verse: v.verse_ref(),
        axis,
        score,
        contributions,
        verse_text: v.verse_text.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    Absolute,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Positive => "positive",
            Direction::Negative => "negative",
            Direction::Absolute => "absolute",
        }
    }
}

/// Highest-scoring non-abstained verses on an axis; ties broken by (poet, line).
pub fn retrieve_extremes(
    corpus: &Corpus,
    model: &SpectralModel,
    axis: usize,
    direction: Direction,
    top_n: usize,
    policy: &WeightPolicy,
) -> Result<Vec<VerseAxisScore>> {
    let mut pool = corpus
        .verses
        .iter()
        .filter(|v| !v.abstain)
        .map(|v| score_verse_with(v, model, axis, policy))
        .collect::<Result<Vec<_>>>()?;
    let key = |s: &VerseAxisScore| match direction {
        Direction::Positive => -s.score,
        Direction::Negative => s.score,
        Direction::Absolute => -s.score.abs(),
    };
    pool.sort_by(|a, b| {
        key(a)
            .total_cmp(&key(b))
            .then_with(|| a.verse.cmp(&b.verse))
    });
    pool.truncate(top_n);
    Ok(pool)
}

/// Mean raw confidence over every contributing label instance.
pub fn mean_contributing_confidence(scores: &[VerseAxisScore]) -> Option<f64> {
    let confs: Vec<f64> = scores
        .iter()
        .flat_map(|s| s.contributions.iter().map(|(_, p)| *p))
        .collect();
    (!confs.is_empty()).then(|| confs.iter().sum::<f64>() / confs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelHit {
    pub verse: VerseRef,
    pub concept: Concept,
    pub confidence: f64,
    pub verse_text: String,
}

/// Verses carrying `concept`, by descending confidence.
pub fn retrieve_by_label(corpus: &Corpus, concept: Concept, top_n: usize) -> Vec<LabelHit> {
    let mut hits: Vec<LabelHit> = corpus
        .verses
        .iter()
        .filter(|v| !v.abstain)
        .filter_map(|v| {
            v.confidences.get(&concept).map(|&p| LabelHit {
                verse: v.verse_ref(),
                concept,
                confidence: p,
                verse_text: v.verse_text.clone(),
            })
        })
        .collect();
    hits.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.verse.cmp(&b.verse))
    });
    hits.truncate(top_n);
    hits
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeMatch {
    pub axis: usize,
    pub matched_axis: usize,
    pub abs_correlation: f64,
}

/// Greedy one-to-one matching of the non-trivial axes 1..=k of `reference`
/// to those of `other` by maximal |correlation| of the eigenvectors.
pub fn match_modes(
    reference: &SpectralModel,
    other: &SpectralModel,
    k: usize,
) -> Result<Vec<ModeMatch>> {
    if reference.concepts() != other.concepts() {
        return Err(Error::InvalidInput(
            "models are built over different concepts".into(),
        ));
    }
    let n = reference.mode_count();
    if k >= n {
        return Err(Error::KMaxTooLarge { k_max: k, size: n });
    }
    let mut pairs = Vec::new();
    for a in 1..=k {
        for b in 1..n {
            let r = correlation(&reference.eigenvector(a), &other.eigenvector(b)).abs();
            pairs.push((r, a, b));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut used_a = vec![false; n];
    let mut used_b = vec![false; n];
    let mut out = Vec::new();
    for (r, a, b) in pairs {
        if !used_a[a] && !used_b[b] {
            used_a[a] = true;
            used_b[b] = true;
            out.push(ModeMatch {
                axis: a,
                matched_axis: b,
                abs_correlation: r,
            });
        }
    }
    out.sort_by_key(|m| m.axis);
    Ok(out)
}

/// Pearson correlation; 0 when either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{global_baseline, poet_concept_mass};
    use crate::ingest::parse_record;

    fn graph(w: &[&[f64]]) -> CooccurrenceGraph {
        let n = w.len();
        CooccurrenceGraph {
            concepts: Concept::ALL[..n].to_vec(),
            adjacency: DMatrix::from_fn(n, n, |i, j| w[i][j]),
        }
    }

    fn verse(json: &str, line: usize) -> AnnotatedVerse {
        parse_record(json, line, "P").unwrap()
    }

    #[test]
    fn pair_average_edge() {
        let corpus = Corpus::from_verses(
            vec![verse(
                r#"{"input_verse":"x","labels":["ambivalent_attachment","emotional_dependency"],"confidences":{"ambivalent_attachment":0.8,"emotional_dependency":0.6},"abstain":false}"#,
                1,
            )],
            &[],
        );
        let g = build_cooccurrence(&corpus, &Concept::ALL, &WeightPolicy::confidence()).unwrap();
        assert!((g.adjacency[(0, 1)] - 0.7).abs() < 1e-15);
        assert_eq!(g.adjacency[(0, 1)], g.adjacency[(1, 0)]);
        assert_eq!(g.edges().len(), 1);
        let u = build_cooccurrence(&corpus, &Concept::ALL, &WeightPolicy::uniform()).unwrap();
        assert_eq!(u.adjacency[(1, 0)], 1.0);
    }

    #[test]
    fn single_labels_give_empty_graph() {
        let corpus = Corpus::from_verses(
            vec![verse(
                r#"{"input_verse":"x","labels":["melancholia"],"confidences":{"melancholia":0.8},"abstain":false}"#,
                1,
            )],
            &[],
        );
        let g = build_cooccurrence(&corpus, &Concept::ALL, &WeightPolicy::confidence()).unwrap();
        assert!(g.adjacency.iter().all(|&x| x == 0.0));
        assert!(build_cooccurrence(&corpus, &[], &WeightPolicy::confidence()).is_err());
    }

    #[test]
    fn filter_thresholds() {
        let uniform = ConceptDistribution {
            categories: Category::ontology(),
            probs: vec![1.0 / 9.0; 9],
        };
        assert_eq!(filter_concepts(&uniform, 0.0).unwrap().len(), 9);
        assert!(matches!(
            filter_concepts(&uniform, 0.2),
            Err(Error::AllFiltered { .. })
        ));
        let mut probs = vec![0.125; 9];
        probs[Concept::Idealization.index()] = 0.0;
        let skewed = ConceptDistribution {
            categories: Category::ontology(),
            probs,
        };
        let kept = filter_concepts(&skewed, DEFAULT_MIN_SHARE).unwrap();
        assert_eq!(kept.len(), 8);
        assert!(!kept.contains(&Concept::Idealization));
    }

    #[test]
    fn two_node_closed_form() {
        let w = 2.5;
        let g = graph(&[&[0.0, w], &[w, 0.0]]);
        let l = laplacian(&g, LaplacianKind::Unnormalized);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[w, -w, -w, w]));
        let e = eigendecompose(&l).unwrap();
        assert!(e.values[0].abs() < 1e-12 && (e.values[1] - 2.0 * w).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vectors[(0, 0)] - h).abs() < 1e-12 && (e.vectors[(1, 0)] - h).abs() < 1e-12);
        assert!((e.vectors[(0, 1)] - h).abs() < 1e-12 && (e.vectors[(1, 1)] + h).abs() < 1e-12);
    }

    #[test]
    fn path_graph_eigenvalues() {
        let g = graph(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        let e = eigendecompose(&laplacian(&g, LaplacianKind::Unnormalized)).unwrap();
        for (got, want) in e.values.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn normalized_laplacian_isolated_node() {
        let g = graph(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let l = laplacian(&g, LaplacianKind::SymmetricNormalized);
        assert_eq!(l[(0, 0)], 1.0);
        assert_eq!(l[(0, 1)], -1.0);
        assert!(l.row(2).iter().all(|&x| x == 0.0));
        assert_eq!(l, l.transpose());
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            eigendecompose(&m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn two_concept_embedding_projection() {
        let g = graph(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let model = SpectralModel::fit(g, LaplacianKind::Unnormalized).unwrap();
        let cats = Category::ontology()[..2].to_vec();
        let delta = 0.05;
        let p = ConceptDistribution {
            categories: cats.clone(),
            probs: vec![0.5 + delta, 0.5 - delta],
        };
        let p0 = ConceptDistribution {
            categories: cats,
            probs: vec![0.5, 0.5],
        };
        let z = embed_poet("P", &p, &p0, &model, 1).unwrap();
        assert!((z.coords[0] - 2f64.sqrt() * delta).abs() < 1e-15);
        assert!(embed_poet("P", &p0, &p0, &model, 1).unwrap().coords[0] == 0.0);
        assert!(matches!(
            embed_poet("P", &p, &p0, &model, 2),
            Err(Error::KMaxTooLarge { .. })
        ));
    }

    #[test]
    fn verse_scores_and_retrieval() {
        let g = graph(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let model = SpectralModel::fit(g, LaplacianKind::Unnormalized).unwrap();
        let u = model.eigenvectors[(0, 1)];
        let v = verse(
            r#"{"input_verse":"a","labels":["ambivalent_attachment"],"confidences":{"ambivalent_attachment":0.9},"abstain":false}"#,
            1,
        );
        let s = score_verse(&v, &model, 1).unwrap();
        assert!((s.score - 0.9 * u).abs() < 1e-15);
        let abst = verse(
            r#"{"input_verse":"b","labels":[],"confidences":{},"abstain":true}"#,
            2,
        );
        assert_eq!(score_verse(&abst, &model, 1).unwrap().score, 0.0);

        let only_abstained = Corpus::from_verses(vec![abst.clone()], &[]);
        assert!(retrieve_extremes(
            &only_abstained,
            &model,
            1,
            Direction::Positive,
            5,
            &WeightPolicy::confidence()
        )
        .unwrap()
        .is_empty());
        let single = Corpus::from_verses(vec![v.clone(), abst], &[]);
        for dir in [
            Direction::Positive,
            Direction::Negative,
            Direction::Absolute,
        ] {
            let hits =
                retrieve_extremes(&single, &model, 1, dir, 5, &WeightPolicy::confidence()).unwrap();
            assert_eq!(hits.len(), 1);
            assert_eq!(hits[0].verse.line, 1);
        }
        assert!(retrieve_extremes(
            &single,
            &model,
            1,
            Direction::Absolute,
            0,
            &WeightPolicy::confidence()
        )
        .unwrap()
        .is_empty());
    }

    #[test]
    fn label_retrieval_order() {
        let mk = |line, p: f64| {
            verse(
                &format!(
                    r#"{{"input_verse":"v{line}","labels":["melancholia"],"confidences":{{"melancholia":{p}}},"abstain":false}}"#
                ),
                line,
            )
        };
        let corpus = Corpus::from_verses(vec![mk(1, 0.3), mk(2, 0.7), mk(3, 0.9), mk(4, 0.7)], &[]);
        let hits = retrieve_by_label(&corpus, Concept::Melancholia, 10);
        let got: Vec<_> = hits.iter().map(|h| (h.confidence, h.verse.line)).collect();
        assert_eq!(got, vec![(0.9, 3), (0.7, 2), (0.7, 4), (0.3, 1)]);
        assert!(retrieve_by_label(&corpus, Concept::Idealization, 10).is_empty());
    }

    #[test]
    fn trivial_mode_projection_vanishes_on_full_ontology() {
        let corpus = Corpus::from_verses(
            vec![
                verse(
                    r#"{"input_verse":"a","labels":["idealization","melancholia","spiritual_narcissism"],"confidences":{"idealization":0.4,"melancholia":0.9,"spiritual_narcissism":0.6},"abstain":false}"#,
                    1,
                ),
                verse(
                    r#"{"input_verse":"b","labels":["ambivalent_attachment","emotional_dependency","identity_fragmentation","internal_projection","romantic_obsession","self_destructive_idealization","melancholia"],"confidences":{"ambivalent_attachment":0.4,"emotional_dependency":0.5,"identity_fragmentation":0.6,"internal_projection":0.7,"romantic_obsession":0.8,"self_destructive_idealization":0.9,"melancholia":0.35},"abstain":false}"#,
                    2,
                ),
            ],
            &[],
        );
        let m = poet_concept_mass(&corpus, &WeightPolicy::confidence());
        let base = global_baseline(&m).unwrap();
        let g = build_cooccurrence(&corpus, &Concept::ALL, &WeightPolicy::confidence()).unwrap();
        let model = SpectralModel::fit(g, LaplacianKind::Unnormalized).unwrap();
        let p = crate::aggregate::to_distribution(
            &m.categories,
            &[3.0, 0.0, 1.0, 0.0, 0.0, 5.0, 0.0, 0.0, 2.0],
        );
        assert!(model.project_centered(&p, &base, 0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn identical_models_match_modes_perfectly() {
        let g = graph(&[
            &[0.0, 3.0, 1.0, 0.5],
            &[3.0, 0.0, 2.0, 0.0],
            &[1.0, 2.0, 0.0, 4.0],
            &[0.5, 0.0, 4.0, 0.0],
        ]);
        let model = SpectralModel::fit(g, LaplacianKind::Unnormalized).unwrap();
        let m = match_modes(&model, &model, 3).unwrap();
        for (k, mm) in m.iter().enumerate() {
            assert_eq!(mm.axis, k + 1);
            assert_eq!(mm.matched_axis, k + 1);
            assert!((mm.abs_correlation - 1.0).abs() < 1e-12);
        }
    }
}
