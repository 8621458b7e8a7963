//! Workload datasets: two lists, provider specs and requestor specs, plus
//! the class cap and seed that produced them.
//!
//! Generation is fully deterministic: the same (profile, seed) yields a
//! byte-identical dataset. Budgets are uniform over [bundle credit value,
//! 2x that value] and urgencies uniform over the six levels; the remaining
//! distributions are documented next to their constants.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::credits::{Credits, Rank};
use crate::domain::{
    Advertisement, InstanceClass, ParticipantId, Region, ResourceBundle, ResourceRequest,
    SharingDuration, SimTime, Urgency,
};
use crate::ledger::FeedbackScores;
use crate::pricing::suggested_price;

/// Dataset size class; the cap applies to each side of the market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetClass {
    Small,
    Medium,
    Large,
}

impl DatasetClass {
    pub fn cap(self) -> usize {
        match self {
            DatasetClass::Small => 25,
            DatasetClass::Medium => 50,
            DatasetClass::Large => 100,
        }
    }
}

/// One provider's advertised capacity, price band, and reputation history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub id: ParticipantId,
    pub region: Region,
    pub resource_type: InstanceClass,
    pub count: u64,
    pub min_price: Credits,
    pub max_price: Credits,
    pub duration: SharingDuration,
    pub urgency: Urgency,
    pub posted_at: SimTime,
    /// Feedback history backing the displayed rank; replayable.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prior_feedback: Vec<FeedbackScores>,
    /// Mean-of-means of `prior_feedback`; validated on load.
    pub rank: Rank,
}

impl ProviderSpec {
    pub fn advertisement(&self) -> Advertisement {
        Advertisement {
            provider: self.id.clone(),
            bundle: ResourceBundle::single(self.resource_type, self.count),
            min_price: self.min_price,
            max_price: self.max_price,
            region: self.region.clone(),
            duration: self.duration,
            posted_at: self.posted_at,
            provider_deadline: self.urgency,
        }
    }

    fn derived_rank(&self) -> Rank {
        let means: Vec<_> = self.prior_feedback.iter().map(|f| f.mean()).collect();
        Rank::mean_of(&means).unwrap_or(Rank::ZERO)
    }
}

/// One requestor's demand, budget, and urgency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestorSpec {
    pub id: ParticipantId,
    pub resource_type: InstanceClass,
    pub count: u64,
    pub duration: SharingDuration,
    pub budget: Credits,
    pub urgency: Urgency,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred_region: Option<Region>,
    pub issued_at: SimTime,
    /// Debt this participant joins with; anything above the ceiling marks a
    /// free-rider.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub preloaded_debt: BTreeMap<InstanceClass, Credits>,
}

impl RequestorSpec {
    pub fn request(&self) -> ResourceRequest {
        ResourceRequest {
            requestor: self.id.clone(),
            instance_class: self.resource_type,
            count: self.count,
            duration: self.duration,
            budget: self.budget,
            urgency: self.urgency,
            preferred_region: self.preferred_region.clone(),
            issued_at: self.issued_at,
        }
    }

    pub fn is_debtor(&self) -> bool {
        self.preloaded_debt.values().any(|&c| c > Credits::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub class: DatasetClass,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub providers: Vec<ProviderSpec>,
    pub requestors: Vec<RequestorSpec>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DatasetError {
    #[error("{side} count {count} exceeds the {class:?} class cap of {cap}")]
    CapExceeded {
        side: &'static str,
        count: usize,
        class: DatasetClass,
        cap: usize,
    },
    #[error("duplicate participant id {0}")]
    DuplicateId(ParticipantId),
    #[error("provider {id}: stored rank {stored} != rank derived from history {derived}")]
    RankMismatch {
        id: ParticipantId,
        stored: Rank,
        derived: Rank,
    },
    #[error("provider {id}: invalid price band or bundle: {reason}")]
    InvalidProvider { id: ParticipantId, reason: String },
    #[error("requestor {id}: {reason}")]
    InvalidRequestor { id: ParticipantId, reason: String },
    #[error("free-rider count {count} exceeds requestor count {requestors}")]
    TooManyFreeRiders { count: usize, requestors: usize },
    #[error("profile {0:?} is a price-study profile and has no market dataset")]
    PriceStudyProfile(ExperimentProfile),
}

impl Dataset {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let cap = self.class.cap();
        if self.providers.len() > cap {
            return Err(DatasetError::CapExceeded {
                side: "provider",
                count: self.providers.len(),
                class: self.class,
                cap,
            });
        }
        if self.requestors.len() > cap {
            return Err(DatasetError::CapExceeded {
                side: "requestor",
                count: self.requestors.len(),
                class: self.class,
                cap,
            });
        }
        let mut seen = BTreeSet::new();
        for id in self
            .providers
            .iter()
            .map(|p| &p.id)
            .chain(self.requestors.iter().map(|r| &r.id))
        {
            if !seen.insert(id.clone()) {
                return Err(DatasetError::DuplicateId(id.clone()));
            }
        }
        for provider in &self.providers {
            let derived = provider.derived_rank();
            if derived != provider.rank {
                return Err(DatasetError::RankMismatch {
                    id: provider.id.clone(),
                    stored: provider.rank,
                    derived,
                });
            }
            provider.advertisement().validate().map_err(|e| {
                DatasetError::InvalidProvider {
                    id: provider.id.clone(),
                    reason: e.to_string(),
                }
            })?;
        }
        for requestor in &self.requestors {
            requestor.request().validate().map_err(|e| {
                DatasetError::InvalidRequestor {
                    id: requestor.id.clone(),
                    reason: e.to_string(),
                }
            })?;
        }
        Ok(())
    }

    pub fn free_rider_ids(&self) -> Vec<ParticipantId> {
        self.requestors
            .iter()
            .filter(|r| r.is_debtor())
            .map(|r| r.id.clone())
            .collect()
    }
}

/// The canned experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentProfile {
    /// More supply than demand: 100 providers, 50 requestors.
    Exp1,
    /// More demand than supply: 50 providers, 100 requestors.
    Exp2,
    /// Balanced: 100 providers, 100 requestors.
    Exp3,
    /// 50/50 market with injected free-riders.
    FreeRider,
    /// Price-dynamics study, requestor more urgent than provider.
    PriceCat1,
    /// Price-dynamics study, provider more urgent than requestor.
    PriceCat2,
    /// Price-dynamics study, equal urgencies.
    PriceCat3,
}

impl ExperimentProfile {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentProfile::Exp1 => "exp1",
            ExperimentProfile::Exp2 => "exp2",
            ExperimentProfile::Exp3 => "exp3",
            ExperimentProfile::FreeRider => "free-rider",
            ExperimentProfile::PriceCat1 => "price-cat1",
            ExperimentProfile::PriceCat2 => "price-cat2",
            ExperimentProfile::PriceCat3 => "price-cat3",
        }
    }

    pub fn is_price_study(self) -> bool {
        matches!(
            self,
            ExperimentProfile::PriceCat1
                | ExperimentProfile::PriceCat2
                | ExperimentProfile::PriceCat3
        )
    }
}

// Generator distributions. Budgets and urgencies are fixed by contract;
// the rest were chosen so that roughly nine in ten balanced-market requests
// can eventually match while one-shot arrival-time matching stays clearly
// lower, and are exercised end-to-end by the acceptance suite.

/// Provider lot sizes, weighted toward small lots; a lot can exceed a
/// request's count, so settlements may relist leftovers.
const PROVIDER_LOT_WEIGHTS: [(u64, u32); 3] = [(1, 45), (2, 35), (3, 20)];
/// Requested instance counts: uniform in 1..=REQUESTOR_COUNT_MAX.
const REQUESTOR_COUNT_MAX: u64 = 2;
/// Provider sharing durations, weighted toward shorter terms.
const PROVIDER_DURATION_WEIGHTS: [(SharingDuration, u32); 5] = [
    (SharingDuration::OneWeek, 40),
    (SharingDuration::TwoWeeks, 32),
    (SharingDuration::ThreeWeeks, 18),
    (SharingDuration::OneMonth, 7),
    (SharingDuration::TwoMonths, 3),
];
/// Requestor durations, weighted shorter still so offers usually cover them.
const REQUESTOR_DURATION_WEIGHTS: [(SharingDuration, u32); 5] = [
    (SharingDuration::OneWeek, 48),
    (SharingDuration::TwoWeeks, 32),
    (SharingDuration::ThreeWeeks, 14),
    (SharingDuration::OneMonth, 5),
    (SharingDuration::TwoMonths, 1),
];
/// Listed ask as a percentage of the suggested credit value: providers price
/// idle capacity to move it, so the ask usually sits below the suggestion.
const ASK_PCT_RANGE: (i64, i64) = (35, 70);
/// Reservation floor as a percentage of the suggested credit value.
const FLOOR_PCT_RANGE: (i64, i64) = (35, 50);
/// Requestor budget as a percentage of the requested bundle's credit value.
const BUDGET_PCT_RANGE: (i64, i64) = (100, 200);
/// Number of availability regions.
const REGION_COUNT: u32 = 4;
/// Probability (percent) that a requestor pins a preferred region.
const REGION_PREFERENCE_PCT: u32 = 5;
/// Prior feedbacks per provider: uniform in 0..=PRIOR_FEEDBACK_MAX.
const PRIOR_FEEDBACK_MAX: u32 = 4;
/// Feedback score weights, (points, weight): raters mostly hand out high
/// marks. Shared with the engine's post-settlement rating draw.
pub(crate) const SCORE_WEIGHTS: [(u8, u32); 5] = [(10, 50), (9, 25), (8, 15), (5, 7), (0, 3)];
/// Free-rider preloaded debt in credits.
const FREE_RIDER_DEBT: i64 = 50;

/// Arrival windows per profile: ads spread over `ad_window` minutes,
/// requests over `request_window`.
#[derive(Debug, Clone, Copy)]
struct ProfileShape {
    providers: usize,
    requestors: usize,
    ad_window: u64,
    request_window: u64,
    free_riders: usize,
}

fn profile_shape(profile: ExperimentProfile) -> Option<ProfileShape> {
    match profile {
        ExperimentProfile::Exp1 => Some(ProfileShape {
            providers: 100,
            requestors: 50,
            ad_window: 360,
            request_window: 240,
            free_riders: 0,
        }),
        ExperimentProfile::Exp2 => Some(ProfileShape {
            providers: 50,
            requestors: 100,
            ad_window: 360,
            request_window: 240,
            free_riders: 0,
        }),
        ExperimentProfile::Exp3 => Some(ProfileShape {
            providers: 100,
            requestors: 100,
            ad_window: 360,
            request_window: 240,
            free_riders: 0,
        }),
        ExperimentProfile::FreeRider => Some(ProfileShape {
            providers: 50,
            requestors: 50,
            ad_window: 360,
            request_window: 240,
            free_riders: 10,
        }),
        _ => None,
    }
}

fn weighted_pick<T: Copy, R: Rng>(rng: &mut R, weights: &[(T, u32)]) -> T {
    let total: u32 = weights.iter().map(|(_, w)| w).sum();
    let mut roll = rng.random_range(0..total);
    for &(item, w) in weights {
        if roll < w {
            return item;
        }
        roll -= w;
    }
    weights[weights.len() - 1].0
}

/// Class popularity: smaller instances trade more often.
const CLASS_WEIGHTS: [(InstanceClass, u32); 5] = [
    (InstanceClass::Micro, 35),
    (InstanceClass::Small, 25),
    (InstanceClass::Medium, 20),
    (InstanceClass::Large, 12),
    (InstanceClass::XLarge, 8),
];

fn pick_class<R: Rng>(rng: &mut R) -> InstanceClass {
    weighted_pick(rng, &CLASS_WEIGHTS)
}

fn pick_urgency<R: Rng>(rng: &mut R) -> Urgency {
    Urgency::ALL[rng.random_range(0..Urgency::ALL.len())]
}

fn pick_region<R: Rng>(rng: &mut R) -> Region {
    Region::new(format!("R{}", rng.random_range(0..REGION_COUNT) + 1))
}

pub(crate) fn pick_scores<R: Rng>(rng: &mut R) -> FeedbackScores {
    let mut points = [0u8; 5];
    for slot in &mut points {
        *slot = weighted_pick(rng, &SCORE_WEIGHTS);
    }
    FeedbackScores::from_points(points).expect("weights only emit legal scores")
}

/// Generate a reproducible dataset for one of the market profiles.
///
/// Price-study profiles have no market dataset and are rejected; they are
/// driven by the dedicated study harness.
pub fn generate(profile: ExperimentProfile, seed: u64) -> Result<Dataset, DatasetError> {
    let shape = profile_shape(profile).ok_or(DatasetError::PriceStudyProfile(profile))?;
    let mut dataset = generate_custom(
        DatasetClass::Large,
        seed,
        shape.providers,
        shape.requestors,
        shape.ad_window,
        shape.request_window,
    )?;
    dataset.profile = Some(profile.name().to_string());
    if shape.free_riders > 0 {
        dataset = inject_free_riders(&dataset, shape.free_riders, seed)?;
    }
    Ok(dataset)
}

/// Generate a dataset with explicit counts and arrival windows.
pub fn generate_custom(
    class: DatasetClass,
    seed: u64,
    providers: usize,
    requestors: usize,
    ad_window: u64,
    request_window: u64,
) -> Result<Dataset, DatasetError> {
    let cap = class.cap();
    if providers > cap {
        return Err(DatasetError::CapExceeded {
            side: "provider",
            count: providers,
            class,
            cap,
        });
    }
    if requestors > cap {
        return Err(DatasetError::CapExceeded {
            side: "requestor",
            count: requestors,
            class,
            cap,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut provider_specs = Vec::with_capacity(providers);
    for i in 0..providers {
        let resource_type = pick_class(&mut rng);
        let count = weighted_pick(&mut rng, &PROVIDER_LOT_WEIGHTS);
        let duration = weighted_pick(&mut rng, &PROVIDER_DURATION_WEIGHTS);
        let bundle = ResourceBundle::single(resource_type, count);
        let suggested = suggested_price(&bundle, duration);
        let ask_pct = rng.random_range(ASK_PCT_RANGE.0..=ASK_PCT_RANGE.1);
        let floor_pct = rng.random_range(FLOOR_PCT_RANGE.0..=FLOOR_PCT_RANGE.1);
        let max_price = suggested * Credits::new(ask_pct, 100);
        let min_price = (suggested * Credits::new(floor_pct, 100)).min(max_price);
        let prior_count = rng.random_range(0..=PRIOR_FEEDBACK_MAX);
        let prior_feedback: Vec<FeedbackScores> =
            (0..prior_count).map(|_| pick_scores(&mut rng)).collect();
        let spec = ProviderSpec {
            id: ParticipantId::new(format!("P{:03}", i + 1)),
            region: pick_region(&mut rng),
            resource_type,
            count,
            min_price,
            max_price,
            duration,
            urgency: pick_urgency(&mut rng),
            posted_at: rng.random_range(0..=ad_window),
            rank: Rank::ZERO,
            prior_feedback,
        };
        let spec = ProviderSpec {
            rank: spec.derived_rank(),
            ..spec
        };
        provider_specs.push(spec);
    }

    let mut requestor_specs = Vec::with_capacity(requestors);
    for i in 0..requestors {
        let resource_type = pick_class(&mut rng);
        let count = rng.random_range(1..=REQUESTOR_COUNT_MAX);
        let duration = weighted_pick(&mut rng, &REQUESTOR_DURATION_WEIGHTS);
        let bundle = ResourceBundle::single(resource_type, count);
        let value = suggested_price(&bundle, duration);
        let budget_pct = rng.random_range(BUDGET_PCT_RANGE.0..=BUDGET_PCT_RANGE.1);
        let budget = value * Credits::new(budget_pct, 100);
        let preferred_region = if rng.random_range(0..100u32) < REGION_PREFERENCE_PCT {
            Some(pick_region(&mut rng))
        } else {
            None
        };
        requestor_specs.push(RequestorSpec {
            id: ParticipantId::new(format!("R{:03}", i + 1)),
            resource_type,
            count,
            duration,
            budget,
            urgency: pick_urgency(&mut rng),
            preferred_region,
            issued_at: rng.random_range(0..=request_window),
            preloaded_debt: BTreeMap::new(),
        });
    }

    let dataset = Dataset {
        class,
        seed,
        profile: None,
        providers: provider_specs,
        requestors: requestor_specs,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Mark `count` seeded-random requestors as never-contributing debtors by
/// pre-loading debt beyond any non-negative ceiling. `count == 0` returns
/// the dataset unchanged.
pub fn inject_free_riders(
    dataset: &Dataset,
    count: usize,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    if count > dataset.requestors.len() {
        return Err(DatasetError::TooManyFreeRiders {
            count,
            requestors: dataset.requestors.len(),
        });
    }
    let mut out = dataset.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf4ee_51de);
    let mut indices: Vec<usize> = (0..out.requestors.len()).collect();
    for i in 0..count {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    for &idx in &indices[..count] {
        let class = pick_class(&mut rng);
        out.requestors[idx]
            .preloaded_debt
            .insert(class, Credits::from_integer(FREE_RIDER_DEBT));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(ExperimentProfile::Exp1, 42).unwrap();
        let b = generate(ExperimentProfile::Exp1, 42).unwrap();
        assert_eq!(a, b);
        let json_a = serde_json::to_string(&a).unwrap();
        let json_b = serde_json::to_string(&b).unwrap();
        assert_eq!(json_a, json_b);
        let c = generate(ExperimentProfile::Exp1, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn profiles_have_the_published_participant_counts() {
        let exp1 = generate(ExperimentProfile::Exp1, 1).unwrap();
        assert_eq!((exp1.providers.len(), exp1.requestors.len()), (100, 50));
        let exp2 = generate(ExperimentProfile::Exp2, 1).unwrap();
        assert_eq!((exp2.providers.len(), exp2.requestors.len()), (50, 100));
        let exp3 = generate(ExperimentProfile::Exp3, 1).unwrap();
        assert_eq!((exp3.providers.len(), exp3.requestors.len()), (100, 100));
    }

    #[test]
    fn class_caps_rejected_per_side() {
        let err = generate_custom(DatasetClass::Small, 1, 26, 10, 100, 100).unwrap_err();
        assert!(matches!(err, DatasetError::CapExceeded { side: "provider", .. }));
        let err = generate_custom(DatasetClass::Small, 1, 10, 26, 100, 100).unwrap_err();
        assert!(matches!(err, DatasetError::CapExceeded { side: "requestor", .. }));
        assert!(generate_custom(DatasetClass::Small, 1, 25, 25, 100, 100).is_ok());
    }

    #[test]
    fn budgets_sit_in_the_pinned_band() {
        let dataset = generate(ExperimentProfile::Exp3, 7).unwrap();
        for r in &dataset.requestors {
            let value = suggested_price(
                &ResourceBundle::single(r.resource_type, r.count),
                r.duration,
            );
            assert!(r.budget >= value, "budget below bundle value");
            assert!(r.budget <= value * 2, "budget above twice bundle value");
        }
    }

    #[test]
    fn price_bands_are_ordered() {
        let dataset = generate(ExperimentProfile::Exp2, 11).unwrap();
        for p in &dataset.providers {
            assert!(p.min_price <= p.max_price);
            assert!(!p.min_price.is_negative());
        }
    }

    #[test]
    fn inject_zero_is_identity() {
        let dataset = generate(ExperimentProfile::Exp1, 5).unwrap();
        let same = inject_free_riders(&dataset, 0, 5).unwrap();
        assert_eq!(dataset, same);
    }

    #[test]
    fn inject_marks_exactly_count_debtors() {
        let dataset = generate(ExperimentProfile::Exp2, 5).unwrap();
        let injected = inject_free_riders(&dataset, 10, 5).unwrap();
        assert_eq!(injected.free_rider_ids().len(), 10);
        assert!(dataset.free_rider_ids().is_empty());
        // Deterministic under the same seed.
        let again = inject_free_riders(&dataset, 10, 5).unwrap();
        assert_eq!(injected, again);
        let err = inject_free_riders(&dataset, 101, 5).unwrap_err();
        assert!(matches!(err, DatasetError::TooManyFreeRiders { .. }));
    }

    #[test]
    fn free_rider_profile_ships_with_debtors() {
        let dataset = generate(ExperimentProfile::FreeRider, 3).unwrap();
        assert_eq!(dataset.free_rider_ids().len(), 10);
        dataset.validate().unwrap();
    }

    #[test]
    fn price_study_profiles_have_no_dataset() {
        assert!(matches!(
            generate(ExperimentProfile::PriceCat1, 1),
            Err(DatasetError::PriceStudyProfile(_))
        ));
    }

    #[test]
    fn stored_rank_must_match_history() {
        let mut dataset = generate(ExperimentProfile::Exp1, 9).unwrap();
        // Find a provider with history and corrupt the stored rank.
        let provider = dataset
            .providers
            .iter_mut()
            .find(|p| !p.prior_feedback.is_empty())
            .expect("some provider has history");
        provider.rank = Rank::from_integer(99);
        assert!(matches!(
            dataset.validate(),
            Err(DatasetError::RankMismatch { .. })
        ));
    }

    #[test]
    fn dataset_roundtrips_through_json() {
        let dataset = generate(ExperimentProfile::FreeRider, 21).unwrap();
        let text = serde_json::to_string_pretty(&dataset).unwrap();
        let back: Dataset = serde_json::from_str(&text).unwrap();
        assert_eq!(back, dataset);
        back.validate().unwrap();
    }
}
