use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The closed taxonomy every relation lineage terminates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BasicRelationKind {
    BelongTo,
    Equal,
    HasComponent,
    HasPart,
    HasAttribute,
    HasForm,
    HasContent,
    Adjoining,
    Comparison,
    Conversion,
    Causality,
    Change,
    Move,
    Xor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Set,
    Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Longitudinal,
    Lateral,
}

impl BasicRelationKind {
    pub const ALL: [BasicRelationKind; 14] = [
        Self::BelongTo,
        Self::Equal,
        Self::HasComponent,
        Self::HasPart,
        Self::HasAttribute,
        Self::HasForm,
        Self::HasContent,
        Self::Adjoining,
        Self::Comparison,
        Self::Conversion,
        Self::Causality,
        Self::Change,
        Self::Move,
        Self::Xor,
    ];

    /// The lateral kinds a reasoning chain may follow by default.
    pub const REASONING: [BasicRelationKind; 4] =
        [Self::Causality, Self::Conversion, Self::Change, Self::Move];

    pub fn dimensions(self) -> &'static [Dimension] {
        match self {
            Self::BelongTo => &[Dimension::Set],
            Self::Equal => &[Dimension::Set, Dimension::Domain],
            _ => &[Dimension::Domain],
        }
    }

    pub fn orientation(self) -> Option<Orientation> {
        use BasicRelationKind::*;
        match self {
            HasComponent | HasPart | HasAttribute | HasForm | HasContent => {
                Some(Orientation::Longitudinal)
            }
            Equal | Adjoining | Comparison | Conversion | Causality | Change | Move => {
                Some(Orientation::Lateral)
            }
            BelongTo | Xor => None,
        }
    }

    pub fn is_longitudinal(self) -> bool {
        self.orientation() == Some(Orientation::Longitudinal)
    }

    pub fn is_lateral(self) -> bool {
        self.orientation() == Some(Orientation::Lateral)
    }

    /// Kinds whose endpoints may be swapped when matching topology.
    pub fn is_symmetric(self) -> bool {
        matches!(self, Self::Equal | Self::Adjoining | Self::Xor)
    }

    /// Fixed P(B|A), if the kind pins it.
    pub fn fixed_forward(self) -> Option<f64> {
        match self {
            Self::BelongTo | Self::Equal => Some(1.0),
            Self::Xor => Some(0.0),
            _ => None,
        }
    }

    /// Fixed P(A|B), if the kind pins it.
    pub fn fixed_backward(self) -> Option<f64> {
        match self {
            Self::Equal => Some(1.0),
            Self::Xor => Some(0.0),
            _ => None,
        }
    }

    /// Whether a point value is admissible in the given direction.
    pub fn admits(self, forward: bool, p: f64) -> bool {
        let fixed = if forward { self.fixed_forward() } else { self.fixed_backward() };
        match fixed {
            Some(v) => p == v,
            None => p > 0.0 && p <= 1.0,
        }
    }

    pub fn dsl_name(self) -> &'static str {
        use BasicRelationKind::*;
        match self {
            BelongTo => "BELONG_TO",
            Equal => "EQUAL",
            HasComponent => "HAS_COMPONENT",
            HasPart => "HAS_PART",
            HasAttribute => "HAS_ATTRIBUTE",
            HasForm => "HAS_FORM",
            HasContent => "HAS_CONTENT",
            Adjoining => "ADJOINING",
            Comparison => "COMPARISON",
            Conversion => "CONVERSION",
            Causality => "CAUSALITY",
            Change => "CHANGE",
            Move => "MOVE",
            Xor => "XOR",
        }
    }
}

impl fmt::Display for BasicRelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dsl_name())
    }
}

impl FromStr for BasicRelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.dsl_name() == s)
            .ok_or_else(|| Error::Kind(format!("unknown relation kind `{s}`")))
    }
}
