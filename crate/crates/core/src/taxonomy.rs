//! The fixed two-level concept taxonomy and label-set closure.
//!
//! Level-1 concepts are `Data`, `Measurement` and `TimeConstraint`. `Data`
//! and `Measurement` have level-2 children. `Overall` is derived: it marks
//! a provision that carries at least one other concept.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Concept {
    Data,
    LabelData,
    NonLabelData,
    Measurement,
    Colour,
    Firmness,
    Mass,
    Pathogen,
    Size,
    Temperature,
    WaterContent,
    TimeConstraint,
    Overall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Level {
    L1,
    L2,
    Derived,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::Derived => "Derived",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConceptInfo {
    pub id: Concept,
    pub display_name: &'static str,
    pub level: Level,
    pub parent: Option<Concept>,
    pub scarce: bool,
}

const fn info(
    id: Concept,
    display_name: &'static str,
    level: Level,
    parent: Option<Concept>,
    scarce: bool,
) -> ConceptInfo {
    ConceptInfo {
        id,
        display_name,
        level,
        parent,
        scarce,
    }
}

use Concept::*;

static REGISTRY: [ConceptInfo; 13] = [
    info(Data, "Data", Level::L1, None, false),
    info(LabelData, "Label Data", Level::L2, Some(Data), false),
    info(NonLabelData, "Non-label Data", Level::L2, Some(Data), false),
    info(Measurement, "Measurement", Level::L1, None, false),
    info(Colour, "Colour", Level::L2, Some(Measurement), true),
    info(Firmness, "Firmness", Level::L2, Some(Measurement), true),
    info(Mass, "Mass", Level::L2, Some(Measurement), false),
    info(Pathogen, "Pathogen", Level::L2, Some(Measurement), true),
    info(Size, "Size", Level::L2, Some(Measurement), false),
    info(Temperature, "Temperature", Level::L2, Some(Measurement), false),
    info(WaterContent, "Water Content", Level::L2, Some(Measurement), true),
    info(TimeConstraint, "Time Constraint", Level::L1, None, false),
    info(Overall, "Overall", Level::Derived, None, false),
];

/// All concepts in registry order.
pub fn registry() -> &'static [ConceptInfo] {
    &REGISTRY
}

impl Concept {
    pub const ALL: [Concept; 13] = [
        Data,
        LabelData,
        NonLabelData,
        Measurement,
        Colour,
        Firmness,
        Mass,
        Pathogen,
        Size,
        Temperature,
        WaterContent,
        TimeConstraint,
        Overall,
    ];

    pub fn info(self) -> &'static ConceptInfo {
        &REGISTRY[self as usize]
    }

    pub fn id(self) -> &'static str {
        match self {
            Data => "data",
            LabelData => "label_data",
            NonLabelData => "non_label_data",
            Measurement => "measurement",
            Colour => "colour",
            Firmness => "firmness",
            Mass => "mass",
            Pathogen => "pathogen",
            Size => "size",
            Temperature => "temperature",
            WaterContent => "water_content",
            TimeConstraint => "time_constraint",
            Overall => "overall",
        }
    }

    pub fn display_name(self) -> &'static str {
        self.info().display_name
    }

    pub fn level(self) -> Level {
        self.info().level
    }

    pub fn parent(self) -> Option<Concept> {
        self.info().parent
    }

    pub fn is_scarce(self) -> bool {
        self.info().scarce
    }

    /// Resolves a concept from its id or display name, ignoring case and
    /// treating spaces, hyphens and underscores alike ("Non-label Data",
    /// "non_label_data" and "NonLabelData" all resolve).
    pub fn lookup(name: &str) -> Option<Concept> {
        let key: String = name
            .chars()
            .filter(|c| !matches!(c, ' ' | '-' | '_'))
            .flat_map(char::to_lowercase)
            .collect();
        let key = match key.as_str() {
            "color" => "colour",
            other => other,
        };
        Concept::ALL.into_iter().find(|c| {
            let canon: String = c.id().chars().filter(|&ch| ch != '_').collect();
            canon == key
        })
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Concept {
    type Err = Error;

    /// Strict parse: only the snake-case id is accepted.
    fn from_str(s: &str) -> Result<Self> {
        Concept::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::UnknownConcept(s.to_string()))
    }
}

impl Serialize for Concept {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Concept {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A set of concepts. Iteration follows registry order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LabelSet(u16);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn new() -> Self {
        Self::EMPTY
    }

    pub fn contains(&self, c: Concept) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn insert(&mut self, c: Concept) -> bool {
        let fresh = !self.contains(c);
        self.0 |= c.bit();
        fresh
    }

    pub fn remove(&mut self, c: Concept) -> bool {
        let present = self.contains(c);
        self.0 &= !c.bit();
        present
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: LabelSet) -> LabelSet {
        LabelSet(self.0 | other.0)
    }

    pub fn difference(self, other: LabelSet) -> LabelSet {
        LabelSet(self.0 & !other.0)
    }

    pub fn is_superset(&self, other: &LabelSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Concept> + '_ {
        Concept::ALL.into_iter().filter(|c| self.contains(*c))
    }

    /// Smallest superset in which every level-2 concept brings its parent
    /// and `Overall` is present exactly when some other concept is.
    pub fn closed(self) -> LabelSet {
        let mut out = self;
        out.remove(Overall);
        for c in self.iter() {
            if let Some(parent) = c.parent() {
                out.insert(parent);
            }
        }
        if !out.is_empty() {
            out.insert(Overall);
        }
        out
    }

    /// Parent closure only; an `Overall` already present is kept, and one
    /// is added when other concepts are present.
    pub fn closed_keep_overall(self) -> LabelSet {
        let mut out = self.closed();
        if self.contains(Overall) {
            out.insert(Overall);
        }
        out
    }

    pub fn is_closed(&self) -> bool {
        self.closed() == *self
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.iter().map(Concept::id).collect()
    }
}

impl FromIterator<Concept> for LabelSet {
    fn from_iter<I: IntoIterator<Item = Concept>>(iter: I) -> Self {
        let mut set = LabelSet::new();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl<const N: usize> From<[Concept; N]> for LabelSet {
    fn from(value: [Concept; N]) -> Self {
        value.into_iter().collect()
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for LabelSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<Concept>::deserialize(deserializer)?;
        Ok(ids.into_iter().collect())
    }
}

/// Closes a set of concept ids. Fails on the first id not in the registry.
pub fn close<S: AsRef<str>>(labels: &[S]) -> Result<LabelSet> {
    let mut set = LabelSet::new();
    for id in labels {
        set.insert(id.as_ref().parse()?);
    }
    Ok(set.closed())
}

/// Tab-separated rendering of the registry, one concept per line.
pub fn render_registry() -> String {
    let mut out = String::from("id\tname\tlevel\tparent\tscarce\n");
    for c in registry() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            c.id,
            c.display_name,
            c.level,
            c.parent.map(Concept::id).unwrap_or("-"),
            c.scarce
        ));
    }
    out
}
