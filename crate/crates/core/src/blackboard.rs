//! The shared listing registry.
//!
//! Providers' advertisements become nine-attribute entries keyed by a unique
//! transaction id. Requestors run the multi-attribute selection over live
//! entries to build a top-3 shortlist, and simultaneous bids on one entry
//! are resolved by price, then rank, then a seeded coin toss.
//!
//! The registry is single-writer: all mutation flows through one event loop;
//! reads are snapshots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::credits::{Credits, Rank};
use crate::domain::{
    duration_weight_of, Advertisement, DomainError, InstanceClass, ParticipantId, Region,
    ResourceRequest, SharingDuration, SimTime,
};

/// Unique id of a live or settled listing. Never reused.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TransactionId(pub u64);

impl fmt::Display for TransactionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{:05}", self.0)
    }
}

/// Opaque handle to the bartering session that negotiates for an entry.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NegotiatorRef(pub u64);

/// The public nine-attribute listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlackboardEntry {
    pub transaction_id: TransactionId,
    pub provider: ParticipantId,
    pub resource_type: InstanceClass,
    pub available_count: u64,
    pub region: Region,
    /// The provider's listed (asking) price for the whole listing.
    pub price: Credits,
    pub duration: SharingDuration,
    pub provider_rank: Rank,
    pub negotiator_ref: NegotiatorRef,
}

/// Private terms a bartering session negotiates with, not shown on the board.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdTerms {
    pub provider: ParticipantId,
    pub min_price: Credits,
    pub max_price: Credits,
    pub posted_at: SimTime,
    pub provider_deadline: crate::domain::Urgency,
}

impl AdTerms {
    /// Minutes left in the provider's own deal window, saturating at zero.
    pub fn remaining_at(&self, now: SimTime) -> u64 {
        (self.posted_at + self.provider_deadline.deadline_minutes()).saturating_sub(now)
    }
}

/// An entry that passed the selection filters, scored for the shortlist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredOffer {
    pub entry: BlackboardEntry,
    /// Budget minus listed price; non-negative for any offer that passed the
    /// budget filter.
    pub price_benefit: Credits,
    pub rank_component: Rank,
    /// Price benefit plus rank points, added raw.
    pub utility: Credits,
}

/// One requestor's claim on a contested entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictBid {
    pub requestor: ParticipantId,
    pub offered_price: Credits,
    pub rank: Rank,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BlackboardError {
    #[error("invalid advertisement: {0}")]
    InvalidAdvertisement(#[from] DomainError),
    #[error("provider {provider} already lists an identical live offer")]
    DuplicateListing { provider: ParticipantId },
    #[error("unknown transaction id {0}")]
    UnknownEntry(TransactionId),
    #[error("entry {0} was already retired")]
    AlreadyRetired(TransactionId),
}

/// Shortlist length: the selection keeps the top three offers.
pub const SHORTLIST_LEN: usize = 3;

/// Minutes a requestor waits before revisiting the board after a fruitless
/// pass.
pub const REVISIT_INTERVAL: u64 = 5;

#[derive(Debug, Default)]
pub struct Blackboard {
    entries: BTreeMap<TransactionId, BlackboardEntry>,
    terms: BTreeMap<NegotiatorRef, AdTerms>,
    retired: BTreeSet<TransactionId>,
    /// Root advertisement of each entry's lineage; re-listed leftovers share
    /// their ancestor's root, which is what "consumed resources" counts.
    roots: BTreeMap<TransactionId, TransactionId>,
    next_id: u64,
    next_ref: u64,
    /// Bumps on every publish; sessions compare against it to learn whether
    /// the board changed since they last selected.
    version: u64,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn live_entries(&self) -> impl Iterator<Item = &BlackboardEntry> {
        self.entries.values()
    }

    pub fn live_count(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, id: TransactionId) -> Option<&BlackboardEntry> {
        self.entries.get(&id)
    }

    pub fn terms(&self, r: NegotiatorRef) -> Option<&AdTerms> {
        self.terms.get(&r)
    }

    /// Root advertisement id of an entry's lineage.
    pub fn root_of(&self, id: TransactionId) -> Option<TransactionId> {
        self.roots.get(&id).copied()
    }

    /// Live supply of a class in instances, for scarcity checks.
    pub fn live_supply(&self, class: InstanceClass) -> u64 {
        self.entries
            .values()
            .filter(|e| e.resource_type == class)
            .map(|e| e.available_count)
            .sum()
    }

    /// List a validated advertisement as a fresh entry.
    ///
    /// An identical live offer (same provider, class, count, and duration) is
    /// rejected to prevent double-listing.
    pub fn publish(
        &mut self,
        ad: &Advertisement,
        rank: Rank,
    ) -> Result<BlackboardEntry, BlackboardError> {
        ad.validate()?;
        let (class, count) = ad
            .bundle
            .single_class()
            .ok_or(BlackboardError::InvalidAdvertisement(DomainError::MultiClassBundle))?;
        let duplicate = self.entries.values().any(|e| {
            e.provider == ad.provider
                && e.resource_type == class
                && e.available_count == count
                && e.duration == ad.duration
        });
        if duplicate {
            return Err(BlackboardError::DuplicateListing {
                provider: ad.provider.clone(),
            });
        }
        let entry = self.insert_entry(
            ad.provider.clone(),
            class,
            count,
            ad.region.clone(),
            ad.max_price,
            ad.duration,
            rank,
            AdTerms {
                provider: ad.provider.clone(),
                min_price: ad.min_price,
                max_price: ad.max_price,
                posted_at: ad.posted_at,
                provider_deadline: ad.provider_deadline,
            },
            None,
        );
        Ok(entry)
    }

    /// Run the selection function for a request over the live entries.
    ///
    /// Returns up to three offers in descending utility (ties broken by
    /// older transaction id). An exhausted urgency or an empty pass yields
    /// an empty shortlist, which is a value, not an error.
    pub fn select(&self, request: &ResourceRequest, now: SimTime) -> Vec<ScoredOffer> {
        if request.remaining_at(now) == 0 {
            return Vec::new();
        }
        let mut passing: Vec<ScoredOffer> = self
            .entries
            .values()
            .filter(|e| e.resource_type == request.instance_class)
            .filter(|e| e.available_count >= request.count)
            .filter(|e| {
                duration_weight_of(e.duration) >= duration_weight_of(request.duration)
            })
            .filter(|e| e.price <= request.budget)
            .filter(|e| match &request.preferred_region {
                Some(region) => &e.region == region,
                None => true,
            })
            .map(|e| {
                let price_benefit = request.budget - e.price;
                let utility = price_benefit + e.provider_rank.as_credit_points();
                ScoredOffer {
                    entry: e.clone(),
                    price_benefit,
                    rank_component: e.provider_rank,
                    utility,
                }
            })
            .collect();
        passing.sort_by(|a, b| {
            b.utility
                .cmp(&a.utility)
                .then(a.entry.transaction_id.cmp(&b.entry.transaction_id))
        });
        passing.truncate(SHORTLIST_LEN);
        passing
    }

    /// Pick the winning bid for a contested entry.
    ///
    /// Highest offered price wins; ties at the maximum price go to the
    /// highest rank; full ties fall to a uniform draw from the seeded RNG.
    /// With distinct prices neither rank nor the RNG is consulted. Returns
    /// the index of the winner, or `None` for an empty bid set.
    pub fn resolve_conflict<R: Rng>(bids: &[ConflictBid], rng: &mut R) -> Option<usize> {
        if bids.is_empty() {
            return None;
        }
        if bids.len() == 1 {
            return Some(0);
        }
        let top_price = bids.iter().map(|b| b.offered_price).max().unwrap();
        let price_winners: Vec<usize> = (0..bids.len())
            .filter(|&i| bids[i].offered_price == top_price)
            .collect();
        if price_winners.len() == 1 {
            return Some(price_winners[0]);
        }
        let top_rank = price_winners
            .iter()
            .map(|&i| bids[i].rank)
            .max()
            .unwrap();
        let rank_winners: Vec<usize> = price_winners
            .into_iter()
            .filter(|&i| bids[i].rank == top_rank)
            .collect();
        if rank_winners.len() == 1 {
            return Some(rank_winners[0]);
        }
        let pick = rng.random_range(0..rank_winners.len());
        Some(rank_winners[pick])
    }

    /// Remove a live entry; the id is never reused.
    pub fn retire(&mut self, id: TransactionId) -> Result<BlackboardEntry, BlackboardError> {
        match self.entries.remove(&id) {
            Some(entry) => {
                self.retired.insert(id);
                Ok(entry)
            }
            None if self.retired.contains(&id) => Err(BlackboardError::AlreadyRetired(id)),
            None => Err(BlackboardError::UnknownEntry(id)),
        }
    }

    /// Settle `count_taken` instances from a live entry: the entry retires
    /// and any leftover capacity relists immediately as a reduced-count
    /// entry at the same per-listing price, sharing the original lineage.
    ///
    /// Returns the retired entry and the relisted leftover, if any.
    pub fn consume(
        &mut self,
        id: TransactionId,
        count_taken: u64,
    ) -> Result<(BlackboardEntry, Option<BlackboardEntry>), BlackboardError> {
        let root = self.roots.get(&id).copied().unwrap_or(id);
        let entry = self.retire(id)?;
        debug_assert!(count_taken <= entry.available_count);
        let leftover_count = entry.available_count.saturating_sub(count_taken);
        let leftover = if leftover_count > 0 {
            let terms = self
                .terms
                .get(&entry.negotiator_ref)
                .expect("terms outlive their entry")
                .clone();
            Some(self.insert_entry(
                entry.provider.clone(),
                entry.resource_type,
                leftover_count,
                entry.region.clone(),
                entry.price,
                entry.duration,
                entry.provider_rank,
                terms,
                Some(root),
            ))
        } else {
            None
        };
        Ok((entry, leftover))
    }

    #[allow(clippy::too_many_arguments)]
    fn insert_entry(
        &mut self,
        provider: ParticipantId,
        class: InstanceClass,
        count: u64,
        region: Region,
        price: Credits,
        duration: SharingDuration,
        rank: Rank,
        terms: AdTerms,
        root: Option<TransactionId>,
    ) -> BlackboardEntry {
        let id = TransactionId(self.next_id);
        self.next_id += 1;
        let negotiator_ref = NegotiatorRef(self.next_ref);
        self.next_ref += 1;
        let entry = BlackboardEntry {
            transaction_id: id,
            provider,
            resource_type: class,
            available_count: count,
            region,
            price,
            duration,
            provider_rank: rank,
            negotiator_ref,
        };
        self.terms.insert(negotiator_ref, terms);
        self.roots.insert(id, root.unwrap_or(id));
        self.entries.insert(id, entry.clone());
        self.version += 1;
        entry
    }
}
