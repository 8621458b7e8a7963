//! Run statistics and mechanism comparison.
//!
//! Utilization counts consumed root advertisements over available ones (a
//! re-listed leftover shares its ancestor's lineage, so one advertised
//! resource is consumed at most once); satisfaction counts settled sessions
//! over total requests. Both are exact rationals.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::credits::Credits;
use crate::domain::Urgency;
use crate::sim::dataset::Dataset;

/// Which mechanism drove a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mechanism {
    Crbs,
    Fcfs,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::Crbs => f.write_str("CRBS"),
            Mechanism::Fcfs => f.write_str("FCFS"),
        }
    }
}

/// Relative urgency of the two parties at settlement time.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PriceCategory {
    RequestorMoreUrgent,
    ProviderMoreUrgent,
    EqualUrgency,
}

impl PriceCategory {
    pub fn classify(requestor: Urgency, provider: Urgency) -> PriceCategory {
        if requestor.more_urgent_than(provider) {
            PriceCategory::RequestorMoreUrgent
        } else if provider.more_urgent_than(requestor) {
            PriceCategory::ProviderMoreUrgent
        } else {
            PriceCategory::EqualUrgency
        }
    }
}

/// Table-style output statistics for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mechanism: Mechanism,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// SHA-256 of the dataset's canonical JSON; guards comparisons.
    pub dataset_fingerprint: String,
    pub providers: u64,
    pub requestors: u64,
    /// Advertised resources (initial listings).
    pub available_resources: u64,
    /// Root advertisements consumed by at least one settlement.
    pub consumed_resources: u64,
    /// min(providers, requestors): the most pairings the dataset allows.
    pub possible_transactions: u64,
    /// Settled SLAs.
    pub settled_transactions: u64,
    /// Requests that reached settlement.
    pub satisfied_requests: u64,
    /// Requests refused outright by the debt guard.
    pub blocked_requests: u64,
    pub free_rider_count: u64,
    pub free_rider_settled: u64,
    /// consumed / available; 0 when nothing was advertised.
    pub resource_utilization_rate: Credits,
    /// satisfied / requests; vacuously 1 with zero requests.
    pub request_satisfaction_rate: Credits,
    pub transactions_by_urgency: BTreeMap<Urgency, u64>,
    /// Mean agreed price per relative-urgency category, when any settled.
    pub mean_price_by_category: BTreeMap<PriceCategory, Credits>,
}

impl MetricsReport {
    pub fn utilization_f64(&self) -> f64 {
        self.resource_utilization_rate.to_f64()
    }

    pub fn satisfaction_f64(&self) -> f64 {
        self.request_satisfaction_rate.to_f64()
    }
}

/// SHA-256 fingerprint of a dataset's canonical JSON.
pub fn dataset_fingerprint(dataset: &Dataset) -> String {
    let json = serde_json::to_string(dataset).expect("datasets serialize");
    let digest = Sha256::digest(json.as_bytes());
    let mut out = String::with_capacity(16);
    for byte in &digest[..8] {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("reports compare different runs: {0}")]
    MismatchedRuns(String),
}

/// Absolute and symmetric-percentage differences between two runs of the
/// same dataset and seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub left_mechanism: Mechanism,
    pub right_mechanism: Mechanism,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub consumed_resources: (u64, u64),
    pub settled_transactions: (u64, u64),
    pub utilization: (Credits, Credits),
    pub satisfaction: (Credits, Credits),
    pub utilization_abs_diff: Credits,
    /// |a-b| / ((a+b)/2), in percent.
    pub utilization_pct_diff: Credits,
    pub satisfaction_abs_diff: Credits,
    pub satisfaction_pct_diff: Credits,
}

/// Symmetric percentage difference |a-b| / ((a+b)/2) in percent; zero when
/// both rates are zero.
pub fn symmetric_pct_diff(a: Credits, b: Credits) -> Credits {
    let sum = a + b;
    if sum.is_zero() {
        return Credits::ZERO;
    }
    let ratio = (a - b).abs().ratio() * num_rational::Ratio::from_integer(200) / sum.ratio();
    Credits::new(*ratio.numer(), *ratio.denom())
}

/// Compare two reports produced from the same dataset and seed.
pub fn compare(
    left: &MetricsReport,
    right: &MetricsReport,
) -> Result<ComparisonReport, MetricsError> {
    if left.seed != right.seed {
        return Err(MetricsError::MismatchedRuns(format!(
            "seeds differ: {} vs {}",
            left.seed, right.seed
        )));
    }
    if left.dataset_fingerprint != right.dataset_fingerprint {
        return Err(MetricsError::MismatchedRuns(format!(
            "dataset fingerprints differ: {} vs {}",
            left.dataset_fingerprint, right.dataset_fingerprint
        )));
    }
    Ok(ComparisonReport {
        left_mechanism: left.mechanism,
        right_mechanism: right.mechanism,
        seed: left.seed,
        profile: left.profile.clone(),
        consumed_resources: (left.consumed_resources, right.consumed_resources),
        settled_transactions: (left.settled_transactions, right.settled_transactions),
        utilization: (
            left.resource_utilization_rate,
            right.resource_utilization_rate,
        ),
        satisfaction: (
            left.request_satisfaction_rate,
            right.request_satisfaction_rate,
        ),
        utilization_abs_diff: (left.resource_utilization_rate
            - right.resource_utilization_rate)
            .abs(),
        utilization_pct_diff: symmetric_pct_diff(
            left.resource_utilization_rate,
            right.resource_utilization_rate,
        ),
        satisfaction_abs_diff: (left.request_satisfaction_rate
            - right.request_satisfaction_rate)
            .abs(),
        satisfaction_pct_diff: symmetric_pct_diff(
            left.request_satisfaction_rate,
            right.request_satisfaction_rate,
        ),
    })
}
