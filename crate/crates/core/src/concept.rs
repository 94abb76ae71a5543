//! The closed nine-label ontology.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the nine ontology labels. Variant order is alphabetical and fixes
/// the column order of every matrix and CSV in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concept {
    AmbivalentAttachment,
    EmotionalDependency,
    Idealization,
    IdentityFragmentation,
    InternalProjection,
    Melancholia,
    RomanticObsession,
    SelfDestructiveIdealization,
    SpiritualNarcissism,
}

impl Concept {
    pub const COUNT: usize = 9;

    pub const ALL: [Concept; Concept::COUNT] = [
        Concept::AmbivalentAttachment,
        Concept::EmotionalDependency,
        Concept::Idealization,
        Concept::IdentityFragmentation,
        Concept::InternalProjection,
        Concept::Melancholia,
        Concept::RomanticObsession,
        Concept::SelfDestructiveIdealization,
        Concept::SpiritualNarcissism,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Concept::AmbivalentAttachment => "ambivalent_attachment",
            Concept::EmotionalDependency => "emotional_dependency",
            Concept::Idealization => "idealization",
            Concept::IdentityFragmentation => "identity_fragmentation",
            Concept::InternalProjection => "internal_projection",
            Concept::Melancholia => "melancholia",
            Concept::RomanticObsession => "romantic_obsession",
            Concept::SelfDestructiveIdealization => "self_destructive_idealization",
            Concept::SpiritualNarcissism => "spiritual_narcissism",
        }
    }

    /// Position in [`Concept::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Concept::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// A distribution coordinate: an ontology concept or the synthetic ABSTAIN
/// category used by the abstention-augmented analysis. ABSTAIN sorts last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Concept(Concept),
    Abstain,
}

impl Category {
    pub fn ontology() -> Vec<Category> {
        Concept::ALL
            .iter()
            .copied()
            .map(Category::Concept)
            .collect()
    }

    pub fn augmented() -> Vec<Category> {
        let mut cats = Self::ontology();
        cats.push(Category::Abstain);
        cats
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Concept(c) => c.as_str(),
            Category::Abstain => "ABSTAIN",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<Concept> for Category {
    fn from(c: Concept) -> Self {
        Category::Concept(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ontology_is_alphabetical_and_round_trips() {
        let names: Vec<_> = Concept::ALL.iter().map(|c| c.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        for (i, c) in Concept::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(c.as_str().parse::<Concept>().unwrap(), *c);
        }
    }

    #[test]
    fn unknown_label_is_named() {
        let err = "nostalgia".parse::<Concept>().unwrap_err();
        assert!(err.to_string().contains("nostalgia"));
    }

    #[test]
    fn abstain_sorts_last() {
        let cats = Category::augmented();
        assert_eq!(cats.len(), 10);
        assert_eq!(*cats.last().unwrap(), Category::Abstain);
        assert!(cats.windows(2).all(|w| w[0] < w[1]));
    }
}
