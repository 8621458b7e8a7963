//! Core market vocabulary shared by every other module: VM instance classes
//! and their weights, sharing durations, urgency deadlines, participants,
//! advertisements, and resource requests.
//!
//! Simulated time is measured in whole minutes; urgency hours convert
//! exactly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::credits::Credits;

/// VM instance class from the reference model.
///
/// RAM/disk/CPU ranges are descriptive metadata; bartering operates on the
/// class label and its weight.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum InstanceClass {
    Micro,
    Small,
    Medium,
    Large,
    XLarge,
}

impl InstanceClass {
    pub const ALL: [InstanceClass; 5] = [
        InstanceClass::Micro,
        InstanceClass::Small,
        InstanceClass::Medium,
        InstanceClass::Large,
        InstanceClass::XLarge,
    ];

    /// Descriptive hardware ranges for the class, as (ram, disk, cpus) text.
    /// Used for dataset documentation only.
    pub fn reference_specs(self) -> (&'static str, &'static str, &'static str) {
        match self {
            InstanceClass::Micro => ("1-2 GB", "20-60 GB", "1"),
            InstanceClass::Small => ("4-8 GB", "80-240 GB", "1-2"),
            InstanceClass::Medium => ("16-32 GB", "320-800 GB", "3-4"),
            InstanceClass::Large => ("48-64 GB", "1-1.5 TB", "8-12"),
            InstanceClass::XLarge => ("80 GB", "2 TB", "16"),
        }
    }
}

impl fmt::Display for InstanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InstanceClass::Micro => "Micro",
            InstanceClass::Small => "Small",
            InstanceClass::Medium => "Medium",
            InstanceClass::Large => "Large",
            InstanceClass::XLarge => "XLarge",
        };
        f.write_str(s)
    }
}

/// Instance weight points for a class.
pub fn weight_of(class: InstanceClass) -> i64 {
    match class {
        InstanceClass::Micro => 1,
        InstanceClass::Small => 2,
        InstanceClass::Medium => 3,
        InstanceClass::Large => 4,
        InstanceClass::XLarge => 5,
    }
}

/// How long a bundle is shared for.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum SharingDuration {
    OneWeek,
    TwoWeeks,
    ThreeWeeks,
    OneMonth,
    TwoMonths,
}

impl SharingDuration {
    pub const ALL: [SharingDuration; 5] = [
        SharingDuration::OneWeek,
        SharingDuration::TwoWeeks,
        SharingDuration::ThreeWeeks,
        SharingDuration::OneMonth,
        SharingDuration::TwoMonths,
    ];
}

impl fmt::Display for SharingDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SharingDuration::OneWeek => "OneWeek",
            SharingDuration::TwoWeeks => "TwoWeeks",
            SharingDuration::ThreeWeeks => "ThreeWeeks",
            SharingDuration::OneMonth => "OneMonth",
            SharingDuration::TwoMonths => "TwoMonths",
        };
        f.write_str(s)
    }
}

/// Duration weight points. Note the jump at two months.
pub fn duration_weight_of(d: SharingDuration) -> i64 {
    match d {
        SharingDuration::OneWeek => 1,
        SharingDuration::TwoWeeks => 2,
        SharingDuration::ThreeWeeks => 3,
        SharingDuration::OneMonth => 4,
        SharingDuration::TwoMonths => 8,
    }
}

/// Urgency deadline level. `H1` means the resource is needed within one
/// hour; `H24` caps the scale at one day.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Urgency {
    H1,
    H3,
    H6,
    H12,
    H18,
    H24,
}

impl Urgency {
    pub const ALL: [Urgency; 6] = [
        Urgency::H1,
        Urgency::H3,
        Urgency::H6,
        Urgency::H12,
        Urgency::H18,
        Urgency::H24,
    ];

    pub fn deadline_hours(self) -> u64 {
        match self {
            Urgency::H1 => 1,
            Urgency::H3 => 3,
            Urgency::H6 => 6,
            Urgency::H12 => 12,
            Urgency::H18 => 18,
            Urgency::H24 => 24,
        }
    }

    pub fn deadline_minutes(self) -> u64 {
        self.deadline_hours() * 60
    }

    /// True when `self` is the tighter deadline (needed sooner).
    pub fn more_urgent_than(self, other: Urgency) -> bool {
        self.deadline_hours() < other.deadline_hours()
    }
}

impl fmt::Display for Urgency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Urgency::H1 => "H1",
            Urgency::H3 => "H3",
            Urgency::H6 => "H6",
            Urgency::H12 => "H12",
            Urgency::H18 => "H18",
            Urgency::H24 => "H24",
        };
        f.write_str(s)
    }
}

/// Simulated clock value in minutes since run start.
pub type SimTime = u64;

/// Opaque participant identifier, unique within one market instance.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ParticipantId(pub String);

impl ParticipantId {
    pub fn new(s: impl Into<String>) -> Self {
        ParticipantId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Availability location label, matched by equality only.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Region(pub String);

impl Region {
    pub fn new(s: impl Into<String>) -> Self {
        Region(s.into())
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Typed VM quantities: class -> instance count.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceBundle {
    pub items: BTreeMap<InstanceClass, u64>,
}

impl ResourceBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(class: InstanceClass, count: u64) -> Self {
        let mut items = BTreeMap::new();
        items.insert(class, count);
        ResourceBundle { items }
    }

    pub fn with(mut self, class: InstanceClass, count: u64) -> Self {
        *self.items.entry(class).or_insert(0) += count;
        self
    }

    pub fn total_count(&self) -> u64 {
        self.items.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.items.values().all(|&c| c == 0)
    }

    /// The bundle's class when it holds exactly one class with a positive
    /// count. Blackboard entries are single-class.
    pub fn single_class(&self) -> Option<(InstanceClass, u64)> {
        let mut positive = self.items.iter().filter(|(_, &c)| c > 0);
        match (positive.next(), positive.next()) {
            (Some((&class, &count)), None) => Some((class, count)),
            _ => None,
        }
    }
}

/// Validation failures for domain values.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("advertisement bundle must contain at least one instance")]
    EmptyBundle,
    #[error("advertisement prices must satisfy 0 <= min <= max (got min {min}, max {max})")]
    InvalidPriceBand { min: Credits, max: Credits },
    #[error("request count must be >= 1")]
    ZeroCount,
    #[error("request budget must be >= 0 (got {0})")]
    NegativeBudget(Credits),
    #[error("blackboard entries are single-class; bundle holds multiple classes")]
    MultiClassBundle,
}

/// A provider's offer of idle capacity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advertisement {
    pub provider: ParticipantId,
    pub bundle: ResourceBundle,
    pub min_price: Credits,
    pub max_price: Credits,
    pub region: Region,
    pub duration: SharingDuration,
    pub posted_at: SimTime,
    /// The provider's own deadline for concluding a deal; drives the
    /// provider side of the transactional-price blend.
    pub provider_deadline: Urgency,
}

impl Advertisement {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.bundle.is_empty() {
            return Err(DomainError::EmptyBundle);
        }
        if self.min_price.is_negative() || self.min_price > self.max_price {
            return Err(DomainError::InvalidPriceBand {
                min: self.min_price,
                max: self.max_price,
            });
        }
        Ok(())
    }
}

/// A requestor's demand for capacity of one instance class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRequest {
    pub requestor: ParticipantId,
    pub instance_class: InstanceClass,
    pub count: u64,
    pub duration: SharingDuration,
    pub budget: Credits,
    pub urgency: Urgency,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred_region: Option<Region>,
    pub issued_at: SimTime,
}

impl ResourceRequest {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.count == 0 {
            return Err(DomainError::ZeroCount);
        }
        if self.budget.is_negative() {
            return Err(DomainError::NegativeBudget(self.budget));
        }
        Ok(())
    }

    /// Absolute minute at which the request's urgency expires.
    pub fn deadline(&self) -> SimTime {
        self.issued_at + self.urgency.deadline_minutes()
    }

    /// Minutes left before the urgency deadline, saturating at zero.
    pub fn remaining_at(&self, now: SimTime) -> u64 {
        self.deadline().saturating_sub(now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_weights_match_reference_table() {
        let expected = [
            (InstanceClass::Micro, 1),
            (InstanceClass::Small, 2),
            (InstanceClass::Medium, 3),
            (InstanceClass::Large, 4),
            (InstanceClass::XLarge, 5),
        ];
        for (class, w) in expected {
            assert_eq!(weight_of(class), w);
        }
    }

    #[test]
    fn duration_weights_match_reference_table() {
        let expected = [
            (SharingDuration::OneWeek, 1),
            (SharingDuration::TwoWeeks, 2),
            (SharingDuration::ThreeWeeks, 3),
            (SharingDuration::OneMonth, 4),
            (SharingDuration::TwoMonths, 8),
        ];
        for (d, w) in expected {
            assert_eq!(duration_weight_of(d), w);
        }
    }

    #[test]
    fn weights_are_bijective_over_their_tables() {
        let mut iw: Vec<i64> = InstanceClass::ALL.iter().map(|&c| weight_of(c)).collect();
        iw.dedup();
        assert_eq!(iw.len(), 5);
        let mut dw: Vec<i64> = SharingDuration::ALL
            .iter()
            .map(|&d| duration_weight_of(d))
            .collect();
        dw.dedup();
        assert_eq!(dw.len(), 5);
    }

    #[test]
    fn urgency_levels_cover_exactly_the_six_hours() {
        let hours: Vec<u64> = Urgency::ALL.iter().map(|u| u.deadline_hours()).collect();
        assert_eq!(hours, vec![1, 3, 6, 12, 18, 24]);
        assert_eq!(Urgency::ALL.iter().map(|u| u.deadline_hours()).max(), Some(24));
    }

    #[test]
    fn urgency_ordering_is_by_deadline() {
        assert!(Urgency::H1.more_urgent_than(Urgency::H24));
        assert!(!Urgency::H12.more_urgent_than(Urgency::H12));
        assert!(!Urgency::H18.more_urgent_than(Urgency::H6));
    }

    #[test]
    fn bundle_single_class_detection() {
        let b = ResourceBundle::single(InstanceClass::Medium, 10);
        assert_eq!(b.single_class(), Some((InstanceClass::Medium, 10)));
        let multi = ResourceBundle::single(InstanceClass::Small, 5)
            .with(InstanceClass::XLarge, 2);
        assert_eq!(multi.single_class(), None);
        let zeroed = ResourceBundle::single(InstanceClass::Small, 0)
            .with(InstanceClass::Large, 3);
        assert_eq!(zeroed.single_class(), Some((InstanceClass::Large, 3)));
        assert!(ResourceBundle::new().is_empty());
    }

    #[test]
    fn advertisement_validation() {
        let ad = Advertisement {
            provider: ParticipantId::new("P1"),
            bundle: ResourceBundle::single(InstanceClass::Medium, 10),
            min_price: Credits::from_integer(40),
            max_price: Credits::from_integer(100),
            region: Region::new("R1"),
            duration: SharingDuration::ThreeWeeks,
            posted_at: 0,
            provider_deadline: Urgency::H12,
        };
        assert!(ad.validate().is_ok());

        let mut bad = ad.clone();
        bad.min_price = Credits::from_integer(120);
        assert!(matches!(bad.validate(), Err(DomainError::InvalidPriceBand { .. })));

        let mut empty = ad;
        empty.bundle = ResourceBundle::new();
        assert_eq!(empty.validate(), Err(DomainError::EmptyBundle));
    }

    #[test]
    fn request_deadline_arithmetic() {
        let req = ResourceRequest {
            requestor: ParticipantId::new("R1"),
            instance_class: InstanceClass::Small,
            count: 2,
            duration: SharingDuration::OneWeek,
            budget: Credits::from_integer(10),
            urgency: Urgency::H6,
            preferred_region: None,
            issued_at: 100,
        };
        assert_eq!(req.deadline(), 460);
        assert_eq!(req.remaining_at(100), 360);
        assert_eq!(req.remaining_at(460), 0);
        assert_eq!(req.remaining_at(1000), 0);
    }

    #[test]
    fn enums_serialize_as_strings() {
        assert_eq!(
            serde_json::to_string(&InstanceClass::XLarge).unwrap(),
            "\"XLarge\""
        );
        assert_eq!(
            serde_json::to_string(&SharingDuration::TwoMonths).unwrap(),
            "\"TwoMonths\""
        );
        assert_eq!(serde_json::to_string(&Urgency::H18).unwrap(), "\"H18\"");
    }
}
