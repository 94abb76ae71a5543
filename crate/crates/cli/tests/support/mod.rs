#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eigenmood::validation::{write_dual_annotations, DualAnnotation};
use eigenmood::{AnnotatedVerse, Concept, Corpus, VerseRef};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn eigenmood() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eigenmood"));
    cmd.env("RAYON_NUM_THREADS", "1");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    eigenmood().args(args).output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Runs and asserts success, printing stderr on failure.
pub fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert_eq!(code(&o), 0, "eigenmood {args:?} failed:\n{}", stderr(&o));
    o
}

fn grid_confidence(rng: &mut impl Rng) -> f64 {
    rng.random_range(6..=19) as f64 * 0.05
}

/// Verses for `poets` poets with distinct favourite concepts and rising
/// abstention rates.
pub fn synthetic_verses(seed: u64, poets: usize, per_poet: usize) -> Vec<AnnotatedVerse> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut verses = Vec::with_capacity(poets * per_poet);
    for p in 0..poets {
        let poet = format!("Poet{p:02}");
        let favourite = Concept::ALL[p % Concept::COUNT];
        let second = Concept::ALL[(p * 4 + 2) % Concept::COUNT];
        let abstain_rate = 0.1 + 0.3 * p as f64 / poets.max(1) as f64;
        for i in 0..per_poet {
            let mut v = AnnotatedVerse {
                poet: poet.clone(),
                verse_text: format!("{poet} verse {} of the divan", i + 1),
                labels: BTreeSet::new(),
                confidences: Default::default(),
                abstain: false,
                notes: None,
                rationale: None,
                source_line: i + 1,
                imputed: BTreeSet::new(),
            };
            if rng.random_bool(abstain_rate) {
                v.abstain = true;
            } else {
                let k = rng.random_range(1..=3);
                while v.labels.len() < k {
                    let c = match rng.random_range(0..10) {
                        0..=2 => favourite,
                        3 => second,
                        _ => Concept::ALL[rng.random_range(0..Concept::COUNT)],
                    };
                    v.labels.insert(c);
                    v.confidences.insert(c, grid_confidence(&mut rng));
                }
            }
            verses.push(v);
        }
    }
    verses
}

/// Up to `max_verses` verses over up to `max_poets` poets, confidences on
/// the two-decimal 0.05 grid.
pub fn random_corpus(seed: u64, max_verses: usize, max_poets: usize) -> Corpus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let poets = rng.random_range(1..=max_poets);
    let n = rng.random_range(1..=max_verses);
    let abstain_rate = rng.random_range(0.0..0.4);
    let verses = (0..n)
        .map(|i| {
            let poet = format!("poet{}", rng.random_range(0..poets));
            let mut v = AnnotatedVerse {
                poet,
                verse_text: format!("verse {i}"),
                labels: BTreeSet::new(),
                confidences: Default::default(),
                abstain: rng.random_bool(abstain_rate),
                notes: None,
                rationale: None,
                source_line: i + 1,
                imputed: BTreeSet::new(),
            };
            if !v.abstain {
                let k = rng.random_range(1..=4);
                while v.labels.len() < k {
                    let c = Concept::ALL[rng.random_range(0..Concept::COUNT)];
                    v.labels.insert(c);
                    v.confidences
                        .insert(c, rng.random_range(0..=20) as f64 / 20.0);
                }
            }
            v
        })
        .collect();
    Corpus::from_verses(verses, &[])
}

/// Writes one `<POET>_labels.jsonl` per poet and returns the directory.
pub fn write_label_files(dir: &Path, verses: &[AnnotatedVerse]) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut files: std::collections::BTreeMap<&str, std::fs::File> = Default::default();
    for v in verses {
        let f = files.entry(&v.poet).or_insert_with(|| {
            std::fs::File::create(dir.join(format!("{}_labels.jsonl", v.poet))).unwrap()
        });
        writeln!(f, "{}", serde_json::to_string(&v.to_record()).unwrap()).unwrap();
    }
    dir.to_path_buf()
}

pub fn synthetic_inputs(dir: &Path, seed: u64, poets: usize, per_poet: usize) -> PathBuf {
    write_label_files(dir, &synthetic_verses(seed, poets, per_poet))
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr =
        csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

/// Per-concept agreement counts, Pos_A / Pos_B and p_o as listed for the
/// 500-verse two-annotator sample, plus model #Pred / #Correct.
pub const VALIDATION_VERSES: usize = 500;
pub const APPROPRIATE_ABSTENTIONS: usize = 428;
pub const PUBLISHED_AGREEMENT: [(Concept, f64, f64, f64, usize, usize); 9] = [
    (Concept::AmbivalentAttachment, 0.980, 0.931, 0.712, 16, 20),
    (Concept::EmotionalDependency, 0.978, 0.744, 0.914, 74, 77),
    (Concept::Idealization, 0.990, 0.986, 0.282, 5, 2),
    (Concept::IdentityFragmentation, 0.984, 0.909, 0.825, 24, 24),
    (Concept::InternalProjection, 0.984, 0.931, 0.770, 19, 17),
    (Concept::Melancholia, 0.962, 0.660, 0.888, 109, 108),
    (Concept::RomanticObsession, 0.976, 0.765, 0.898, 68, 68),
    (
        Concept::SelfDestructiveIdealization,
        0.976,
        0.873,
        0.811,
        37,
        31,
    ),
    (Concept::SpiritualNarcissism, 0.972, 0.898, 0.726, 27, 27),
];
pub const PUBLISHED_PRECISION: [(usize, usize); 9] = [
    (21, 15),
    (81, 70),
    (3, 2),
    (27, 19),
    (18, 16),
    (132, 105),
    (80, 67),
    (41, 34),
    (34, 26),
];
pub const PUBLISHED_SUPPORT: [usize; 9] = [23, 81, 6, 28, 22, 118, 74, 40, 34];

/// Verses both annotators mark positive, A-only and B-only, recovered from
/// the listed p_o and marginals.
pub fn agreement_counts(p_o: f64, pos_a: usize, pos_b: usize) -> (usize, usize, usize) {
    let disagreements = ((1.0 - p_o) * VALIDATION_VERSES as f64).round() as usize;
    let both = (pos_a + pos_b - disagreements) / 2;
    (both, pos_a - both, pos_b - both)
}

/// A two-annotator sheet and model predictions whose counts match the
/// published agreement and precision tables. Each concept's reference
/// positives occupy their own block of verses; false positives land on
/// trailing verses outside every block.
pub fn reconstructed_validation(dir: &Path) -> (PathBuf, PathBuf) {
    std::fs::create_dir_all(dir).unwrap();
    let refs: Vec<VerseRef> = (1..=VALIDATION_VERSES)
        .map(|line| VerseRef {
            poet: "Sample".into(),
            line,
        })
        .collect();
    let mut duals: Vec<DualAnnotation> = refs
        .iter()
        .enumerate()
        .map(|(i, r)| DualAnnotation {
            verse: r.clone(),
            a_labels: BTreeSet::new(),
            b_labels: BTreeSet::new(),
            a_abstain_ok: i < APPROPRIATE_ABSTENTIONS,
            b_abstain_ok: i < APPROPRIATE_ABSTENTIONS || i % 2 == 0,
        })
        .collect();
    let mut predicted: Vec<Vec<(Concept, f64)>> = vec![Vec::new(); VALIDATION_VERSES];
    let mut start = 0;
    let mut tail = 0;
    let blocks_end: usize = PUBLISHED_SUPPORT.iter().sum();
    let tail_len = VALIDATION_VERSES - blocks_end;
    for (k, &(c, p_o, _, _, pos_a, pos_b)) in PUBLISHED_AGREEMENT.iter().enumerate() {
        let (both, a_only, b_only) = agreement_counts(p_o, pos_a, pos_b);
        let support = both + a_only + b_only;
        assert_eq!(support, PUBLISHED_SUPPORT[k], "{c}");
        for j in 0..support {
            let d = &mut duals[start + j];
            if j < both + a_only {
                d.a_labels.insert(c);
            }
            if j < both || j >= both + a_only {
                d.b_labels.insert(c);
            }
        }
        let (pred, correct) = PUBLISHED_PRECISION[k];
        for j in 0..correct {
            predicted[start + j].push((c, 0.9 - 0.05 * (j % 5) as f64));
        }
        for _ in correct..pred {
            predicted[blocks_end + tail % tail_len].push((c, 0.55 + 0.05 * (tail % 4) as f64));
            tail += 1;
        }
        start += support;
    }

    let sheet = dir.join("validation_sheet.csv");
    write_dual_annotations(std::fs::File::create(&sheet).unwrap(), &duals).unwrap();
    let predictions = dir.join("predictions.csv");
    let mut w = csv::Writer::from_path(&predictions).unwrap();
    w.write_record(["verse_ref", "abstain", "labels", "confidences"])
        .unwrap();
    for (r, p) in refs.iter().zip(&predicted) {
        let labels: Vec<&str> = p.iter().map(|(c, _)| c.as_str()).collect();
        let confs: Vec<String> = p.iter().map(|(_, x)| format!("{x:.2}")).collect();
        w.write_record([
            r.to_string(),
            p.is_empty().to_string(),
            labels.join(";"),
            confs.join(";"),
        ])
        .unwrap();
    }
    w.flush().unwrap();
    (sheet, predictions)
}
