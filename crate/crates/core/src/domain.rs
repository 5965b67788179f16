//! Shared vocabulary: facet levels, representation kinds, the four
//! experimental conditions and per-subject performance records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equivocality level of the information presented to a subject.
///
/// Ordered `Low < High`; the ordering exists for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FacetLevel {
    #[serde(rename = "LoEqv")]
    LowEquivocality,
    #[serde(rename = "HiEqv")]
    HighEquivocality,
}

impl FacetLevel {
    pub const ALL: [FacetLevel; 2] = [FacetLevel::HighEquivocality, FacetLevel::LowEquivocality];

    pub fn as_str(self) -> &'static str {
        match self {
            FacetLevel::HighEquivocality => "HiEqv",
            FacetLevel::LowEquivocality => "LoEqv",
        }
    }
}

impl fmt::Display for FacetLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FacetLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HiEqv" => Ok(FacetLevel::HighEquivocality),
            "LoEqv" => Ok(FacetLevel::LowEquivocality),
            _ => Err(Error::parse(format!("unknown facet level {s:?}"))),
        }
    }
}

/// Form in which valuation information is presented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RepKind {
    #[serde(rename = "Det")]
    Deterministic,
    #[serde(rename = "Prob")]
    Probabilistic,
}

impl RepKind {
    /// Cold-start and tie-break order used by the recommender.
    pub const ALL: [RepKind; 2] = [RepKind::Deterministic, RepKind::Probabilistic];

    pub fn as_str(self) -> &'static str {
        match self {
            RepKind::Deterministic => "Det",
            RepKind::Probabilistic => "Prob",
        }
    }
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Det" => Ok(RepKind::Deterministic),
            "Prob" => Ok(RepKind::Probabilistic),
            _ => Err(Error::parse(format!("unknown representation {s:?}"))),
        }
    }
}

/// One cell of the 2x2 facet x representation design.
///
/// `C1 = (High, Det)`, `C2 = (High, Prob)`, `C3 = (Low, Prob)`, `C4 = (Low, Det)`.
/// The persisted spelling is `"<facet>-<rep>"`, e.g. `"HiEqv-Det"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
}

impl Condition {
    /// Generation order.
    pub const ALL: [Condition; 4] = [Condition::C1, Condition::C2, Condition::C3, Condition::C4];

    /// Row order of the confusion and metric tables.
    pub const DISPLAY_ORDER: [Condition; 4] = [Condition::C1, Condition::C2, Condition::C4, Condition::C3];

    pub fn facet(self) -> FacetLevel {
        match self {
            Condition::C1 | Condition::C2 => FacetLevel::HighEquivocality,
            Condition::C3 | Condition::C4 => FacetLevel::LowEquivocality,
        }
    }

    pub fn rep(self) -> RepKind {
        match self {
            Condition::C1 | Condition::C4 => RepKind::Deterministic,
            Condition::C2 | Condition::C3 => RepKind::Probabilistic,
        }
    }

    /// Position in [`Condition::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Position in [`Condition::DISPLAY_ORDER`].
    pub fn display_index(self) -> usize {
        match self {
            Condition::C1 => 0,
            Condition::C2 => 1,
            Condition::C4 => 2,
            Condition::C3 => 3,
        }
    }

    pub fn from_display_index(i: usize) -> Option<Condition> {
        Condition::DISPLAY_ORDER.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C3 => "C3",
            Condition::C4 => "C4",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::C1 => "HiEqv-Det",
            Condition::C2 => "HiEqv-Prob",
            Condition::C3 => "LoEqv-Prob",
            Condition::C4 => "LoEqv-Det",
        }
    }
}

/// The unique condition for a (facet, representation) pair.
pub fn condition_of(facet: FacetLevel, rep: RepKind) -> Condition {
    use FacetLevel::*;
    use RepKind::*;
    match (facet, rep) {
        (HighEquivocality, Deterministic) => Condition::C1,
        (HighEquivocality, Probabilistic) => Condition::C2,
        (LowEquivocality, Probabilistic) => Condition::C3,
        (LowEquivocality, Deterministic) => Condition::C4,
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.label() == s || c.code() == s)
            .ok_or_else(|| Error::parse(format!("unknown condition {s:?}")))
    }
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque subject metadata; carries no behavioural effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Gender::F),
            "M" => Ok(Gender::M),
            _ => Err(Error::parse(format!("unknown gender {s:?}"))),
        }
    }
}

/// The trading task, held constant across conditions within one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub description: String,
    pub horizon_ticks: u32,
}

impl TaskSpec {
    pub fn new(task_id: impl Into<String>, description: impl Into<String>, horizon_ticks: u32) -> Result<Self> {
        if horizon_ticks == 0 {
            return Err(Error::invalid("horizon_ticks must be at least 1"));
        }
        Ok(TaskSpec { task_id: task_id.into(), description: description.into(), horizon_ticks })
    }
}

/// One subject's end-of-day realized profit with its condition and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub subject_id: u32,
    pub condition: Condition,
    pub gender: Gender,
    pub profit: f64,
}

pub const RECORD_CSV_HEADER: &str = "subject_id,condition,gender,profit";

impl PerformanceRecord {
    /// CSV row without trailing newline; profit printed with 6 decimals.
    pub fn to_csv_row(&self) -> String {
        format!("{},{},{},{:.6}", self.subject_id, self.condition, self.gender, self.profit)
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let fields: Vec<&str> = row.trim_end_matches(['\r', '\n']).split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(format!("expected 4 fields, found {}", fields.len())));
        }
        let subject_id = fields[0].parse().map_err(|_| Error::parse(format!("bad subject_id {:?}", fields[0])))?;
        let profit: f64 = fields[3].parse().map_err(|_| Error::parse(format!("bad profit {:?}", fields[3])))?;
        Ok(PerformanceRecord { subject_id, condition: fields[1].parse()?, gender: fields[2].parse()?, profit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table4_mapping() {
        assert_eq!(condition_of(FacetLevel::HighEquivocality, RepKind::Deterministic), Condition::C1);
        assert_eq!(condition_of(FacetLevel::LowEquivocality, RepKind::Deterministic), Condition::C4);
        assert_eq!(condition_of(FacetLevel::HighEquivocality, RepKind::Probabilistic), Condition::C2);
        assert_eq!(condition_of(FacetLevel::LowEquivocality, RepKind::Probabilistic), Condition::C3);
    }

    #[test]
    fn bijection_round_trip() {
        for c in Condition::ALL {
            assert_eq!(condition_of(c.facet(), c.rep()), c);
        }
        let mut seen = std::collections::HashSet::new();
        for f in FacetLevel::ALL {
            for r in RepKind::ALL {
                assert!(seen.insert(condition_of(f, r)));
            }
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn display_order_matches_table_rows() {
        let labels: Vec<_> = Condition::DISPLAY_ORDER.iter().map(|c| c.label()).collect();
        assert_eq!(labels, ["HiEqv-Det", "HiEqv-Prob", "LoEqv-Det", "LoEqv-Prob"]);
        for (i, c) in Condition::DISPLAY_ORDER.iter().enumerate() {
            assert_eq!(c.display_index(), i);
            assert_eq!(Condition::from_display_index(i), Some(*c));
        }
    }

    #[test]
    fn string_spellings_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.label().parse::<Condition>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<Condition>(&json).unwrap(), c);
        }
        for f in FacetLevel::ALL {
            assert_eq!(f.as_str().parse::<FacetLevel>().unwrap(), f);
            let json = serde_json::to_string(&f).unwrap();
            assert_eq!(json, format!("\"{}\"", f.as_str()));
            assert_eq!(serde_json::from_str::<FacetLevel>(&json).unwrap(), f);
        }
        for r in RepKind::ALL {
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<RepKind>(&json).unwrap(), r);
        }
        for g in [Gender::F, Gender::M] {
            assert_eq!(g.as_str().parse::<Gender>().unwrap(), g);
        }
        assert!("HiEqv-Maybe".parse::<Condition>().is_err());
    }

    #[test]
    fn facet_order_is_low_then_high() {
        assert!(FacetLevel::LowEquivocality < FacetLevel::HighEquivocality);
    }

    #[test]
    fn record_csv_row() {
        let r = PerformanceRecord { subject_id: 7, condition: Condition::C4, gender: Gender::F, profit: 8.19 };
        let row = r.to_csv_row();
        assert_eq!(row, "7,LoEqv-Det,F,8.190000");
        assert_eq!(PerformanceRecord::from_csv_row(&row).unwrap(), r);
        assert!(PerformanceRecord::from_csv_row("1,LoEqv-Det,F").is_err());
    }

    #[test]
    fn task_spec_requires_positive_horizon() {
        assert!(TaskSpec::new("k", "trade", 0).is_err());
        assert_eq!(TaskSpec::new("k", "trade", 390).unwrap().horizon_ticks, 390);
    }
}
