//! Deterministic bartering-marketplace engine and discrete-event simulator.
//!
//! Providers advertise idle VM capacity for barter credits; requestors
//! acquire it through urgency-driven automated negotiation against a shared
//! blackboard of offers; a double-entry credit ledger tracks balances,
//! reputation, and debt. A first-come-first-served baseline runs the same
//! datasets for side-by-side utilization and satisfaction comparisons.
//!
//! Everything is seedable and replayable: the same dataset, seed, and
//! mechanism produce byte-identical event logs.

pub mod blackboard;
pub mod credits;
pub mod domain;
pub mod ledger;
pub mod negotiation;
pub mod pricing;
pub mod sim;

pub use blackboard::{
    AdTerms, Blackboard, BlackboardEntry, BlackboardError, ConflictBid, NegotiatorRef,
    ScoredOffer, TransactionId, REVISIT_INTERVAL, SHORTLIST_LEN,
};
pub use credits::{Credits, Rank};
pub use domain::{
    duration_weight_of, weight_of, Advertisement, DomainError, InstanceClass, ParticipantId,
    Region, ResourceBundle, ResourceRequest, SharingDuration, SimTime, Urgency,
};
pub use ledger::{
    pool_id, Account, DemandSnapshot, EntryKind, Feedback, FeedbackScores, GuardDecision,
    Ledger, LedgerEntry, LedgerError, LedgerRecord, RepaymentOutcome, Score, Settlement,
};
pub use negotiation::{
    Decision, NegotiationError, NegotiationSession, SessionId, SessionState, SlaRecord,
    WakeReason,
};
pub use pricing::{
    barter_credits, budget_fraction, estimated_bid, instance_value, suggested_price,
    transactional_price, transactional_price_shared, ClockPair, PricingError,
};
