//! Synthetic workloads shared by the benchmarks.

use std::collections::BTreeSet;

use eigenmood::{AnnotatedVerse, Concept, Corpus};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// `poets` poets with `per_poet` verses each, 1–3 labels per verse and a
/// 20% abstention rate.
pub fn corpus(seed: u64, poets: usize, per_poet: usize) -> Corpus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut verses = Vec::with_capacity(poets * per_poet);
    for p in 0..poets {
        for i in 0..per_poet {
            let mut v = AnnotatedVerse {
                poet: format!("Poet{p:02}"),
                verse_text: format!("verse {i}"),
                labels: BTreeSet::new(),
                confidences: Default::default(),
                abstain: rng.random_bool(0.2),
                notes: None,
                rationale: None,
                source_line: i + 1,
                imputed: BTreeSet::new(),
            };
            if !v.abstain {
                let k = rng.random_range(1..=3);
                while v.labels.len() < k {
                    let c = Concept::ALL[rng.random_range(0..Concept::COUNT)];
                    v.labels.insert(c);
                    v.confidences
                        .insert(c, rng.random_range(6..=19) as f64 * 0.05);
                }
            }
            verses.push(v);
        }
    }
    Corpus::from_verses(verses, &[])
}
