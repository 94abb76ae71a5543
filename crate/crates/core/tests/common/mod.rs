#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use eigenmood::{AnnotatedVerse, Concept, Corpus};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn verse(poet: &str, line: usize, text: &str, labels: &[(Concept, f64)]) -> AnnotatedVerse {
    AnnotatedVerse {
        poet: poet.to_string(),
        verse_text: text.to_string(),
        labels: labels.iter().map(|(c, _)| *c).collect(),
        confidences: labels.iter().copied().collect(),
        abstain: labels.is_empty(),
        notes: None,
        rationale: None,
        source_line: line,
        imputed: BTreeSet::new(),
    }
}

pub fn abstained(poet: &str, line: usize, text: &str) -> AnnotatedVerse {
    verse(poet, line, text, &[])
}

/// Confidences on the 0.05 grid used by the annotation prompt.
pub fn grid_confidence(rng: &mut impl Rng) -> f64 {
    rng.random_range(6..=19) as f64 * 0.05
}

pub fn random_verse(
    rng: &mut impl Rng,
    poet: &str,
    line: usize,
    abstain_rate: f64,
) -> AnnotatedVerse {
    if rng.random_bool(abstain_rate) {
        return abstained(poet, line, &format!("{poet} verse {line}"));
    }
    let k = rng.random_range(1..=3);
    let mut labels: BTreeMap<Concept, f64> = BTreeMap::new();
    while labels.len() < k {
        let c = *Concept::ALL.choose(rng).unwrap();
        labels.insert(c, grid_confidence(rng));
    }
    let labels: Vec<_> = labels.into_iter().collect();
    verse(poet, line, &format!("{poet} verse {line}"), &labels)
}

/// Up to `max_verses` verses over up to `max_poets` poets.
pub fn random_corpus(seed: u64, max_verses: usize, max_poets: usize) -> Corpus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let poets = rng.random_range(1..=max_poets);
    let n = rng.random_range(1..=max_verses);
    let abstain_rate = rng.random_range(0.0..0.4);
    let verses = (0..n)
        .map(|i| {
            let poet = format!("poet{}", rng.random_range(0..poets));
            random_verse(&mut rng, &poet, i + 1, abstain_rate)
        })
        .collect();
    Corpus::from_verses(verses, &[])
}

/// Corpus with per-poet concept preferences, `per_poet` verses each.
pub fn synthetic_corpus(seed: u64, poets: usize, per_poet: usize) -> Corpus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut verses = Vec::with_capacity(poets * per_poet);
    for p in 0..poets {
        let poet = format!("poet{p:02}");
        let favourite = Concept::ALL[p % Concept::COUNT];
        let abstain_rate = 0.1 + 0.3 * (p as f64 / poets.max(1) as f64);
        for i in 0..per_poet {
            let mut v = random_verse(&mut rng, &poet, i + 1, abstain_rate);
            if !v.abstain && rng.random_bool(0.3) {
                let p = grid_confidence(&mut rng);
                v.labels.insert(favourite);
                v.confidences.insert(favourite, p);
            }
            verses.push(v);
        }
    }
    Corpus::from_verses(verses, &[])
}
